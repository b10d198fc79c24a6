#include "pdmp/assumptions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

double probe_horizon(const PdmpModel& model, const Point& x, const QuadratureConfig& quad) {
    try {
        return integration_horizon(model, x, quad);
    } catch (const UnboundedHorizon&) {
        return -std::log(quad.tail_epsilon) / model.discount();
    }
}

void record(MarginReport& r, double margin, const Probe& p, std::optional<ActionId> boundary_action = {}) {
    ++r.evaluated;
    if (margin < r.min_margin || !r.argmin) {
        r.min_margin = margin;
        r.argmin = p;
        r.argmin_boundary_action = boundary_action;
    }
}

void close(MarginReport& r, double threshold = kMarginTolerance) {
    r.pass = r.evaluated == 0 || r.min_margin >= threshold;
}

}  // namespace

std::vector<Probe> make_probes(const PdmpModel& model, const ProbeOptions& options) {
    std::vector<Probe> out;
    const std::size_t count = std::max<std::size_t>(options.chebyshev_points, 2);
    for (StateId j = 0; j < model.state_count(); ++j) {
        const Point x = model.state_point(j);
        const double t_star = model.exit_time(x);
        const bool finite = std::isfinite(t_star);
        const double horizon = probe_horizon(model, x, options.quad);
        const auto& acts = model.actions(j);
        for (ActionId a : acts.interior) {
            std::vector<double> times;
            for (std::size_t k = 0; k < count; ++k) {
                const double t = 0.5 * horizon * (1.0 - std::cos(std::numbers::pi * k / (count - 1)));
                // The end of a finite segment is the boundary point, probed separately.
                if (finite && t >= t_star) continue;
                times.push_back(t);
            }
            for (double b : model.breakpoints(x, a))
                if (b >= 0.0 && b < horizon) times.push_back(b);
            std::sort(times.begin(), times.end());
            times.erase(std::unique(times.begin(), times.end()), times.end());
            for (double t : times) out.push_back({j, a, t, false});
        }
        if (finite && !acts.interior.empty()) out.push_back({j, acts.interior.front(), t_star, true});
    }
    return out;
}

RateBoundReport check_rate_bounds(const PdmpModel& model, const std::vector<Probe>& probes,
                                  const QuadratureConfig& quad) {
    RateBoundReport rep;
    rep.positivity.name = "rate floor positive";
    rep.lower.name = "lambda >= lambda_lower";
    rep.upper.name = "lambda <= lambda_upper";
    rep.declared_k_lambda = model.sojourn_bound();

    std::vector<char> seen(model.state_count(), 0);
    for (const auto& p : probes) {
        if (p.boundary) continue;
        const Point x = model.state_point(p.state);
        const Point y = model.flow(x, p.t);
        const double lambda = model.rate(y, model.control(x, p.action, p.t));
        const auto lo = model.rate_lower_bound(y);
        const auto hi = model.rate_upper_bound(y);
        if (lo) record(rep.lower, lambda - *lo, p);
        if (hi) record(rep.upper, *hi - lambda, p);
        if (!std::isfinite(model.exit_time(x))) record(rep.positivity, lo ? *lo : 0.0, p);

        if (seen[p.state]) continue;
        seen[p.state] = 1;
        // K_lambda integral for this state: int_0^{t*} exp(-int_0^t lambda_lower) dt.
        const auto floor_at = [&](double s) {
            const auto f = model.rate_lower_bound(model.flow(x, s));
            return f ? *f : 0.0;
        };
        const double t_star = model.exit_time(x);
        const double horizon = probe_horizon(model, x, quad);
        const double f0 = floor_at(0.0);
        std::vector<double> cuts{0.0, horizon};
        const auto inner = [&](double t) {
            if (t <= 0.0) return 0.0;
            std::vector<double> c{0.0, t};
            return integrate_scalar(floor_at, c, quad);
        };
        double k = integrate_scalar([&](double t) { return std::exp(-inner(t)); }, cuts, quad);
        if (!std::isfinite(t_star) && f0 > 0.0) k += std::exp(-inner(horizon)) / f0;
        rep.k_lambda = std::max(rep.k_lambda, k);
        if (std::isfinite(t_star)) rep.k_lambda_finite = std::max(rep.k_lambda_finite, k);
    }
    close(rep.lower);
    close(rep.upper);
    rep.positivity.pass = rep.positivity.evaluated == 0 || rep.positivity.min_margin > 0.0;
    rep.pass = rep.lower.pass && rep.upper.pass && rep.positivity.pass;
    if (rep.declared_k_lambda && rep.k_lambda > *rep.declared_k_lambda + 1e-8) rep.pass = false;
    return rep;
}

double flow_derivative_fd(const PdmpModel& model, const std::function<double(const Point&)>& v, const Point& x,
                          double t, double h) {
    const double step = h * (1.0 + std::abs(t));
    const double t_star = model.exit_time(x);
    auto at = [&](double s) { return v(model.flow(x, s)); };
    if (t >= step && (!std::isfinite(t_star) || t + step <= t_star))
        return (at(t + step) - at(t - step)) / (2.0 * step);
    if (t < step) return (-3.0 * at(t) + 4.0 * at(t + step) - at(t + 2.0 * step)) / (2.0 * step);
    return (3.0 * at(t) - 4.0 * at(t - step) + at(t - 2.0 * step)) / (2.0 * step);
}

GrowthReport check_growth(const PdmpModel& model, const GrowthCertificate& cert, const std::vector<Probe>& probes,
                          double fd_step) {
    GrowthReport rep;
    rep.drift.name = "Xv + cv - lambda (v - Qv) <= b";
    rep.rate_domination.name = "lambda + b / (c + alpha) <= v";
    rep.boundary.name = "v(phi(x, t*)) >= Qv + c + alpha";
    const double alpha = model.discount();
    const double c = cert.c;
    rep.certificate_valid = c + alpha > 0.0;

    auto qv = [&](const std::vector<JumpOutcome>& outcomes) {
        double s = 0.0;
        for (const auto& o : outcomes) s += o.probability * cert.v(o.target);
        return s;
    };
    for (const auto& p : probes) {
        const Point x = model.state_point(p.state);
        const Point y = model.flow(x, p.t);
        const double vy = cert.v(y);
        if (!(vy > 0.0)) rep.certificate_valid = false;
        if (p.boundary) {
            for (ActionId ab : model.actions(p.state).boundary) {
                const double margin = vy - qv(model.boundary_jump(y, ab)) - c - alpha;
                record(rep.boundary, margin, p, ab);
            }
            continue;
        }
        const ModeId mode = model.control(x, p.action, p.t);
        const double lambda = model.rate(y, mode);
        const double b = cert.b ? cert.b(y, mode) : 0.0;
        const double xv = cert.flow_derivative ? cert.flow_derivative(y) : flow_derivative_fd(model, cert.v, x, p.t, fd_step);
        const double drift = xv + c * vy - lambda * (vy - qv(model.interior_jump(y, mode)));
        record(rep.drift, b - drift, p);
        if (rep.certificate_valid) record(rep.rate_domination, vy - lambda - b / (c + alpha), p);
    }
    close(rep.drift);
    close(rep.rate_domination);
    close(rep.boundary);
    rep.pass = rep.certificate_valid && rep.drift.pass && rep.rate_domination.pass && rep.boundary.pass;
    return rep;
}

MassBoundReport mass_bound(const PdmpModel& model, const GrowthCertificate& cert, double total_mass) {
    const auto nu0 = model.initial_distribution();
    double nu_v = 0.0;
    for (StateId j = 0; j < nu0.size(); ++j)
        if (nu0[j] != 0.0) nu_v += nu0[j] * cert.v(model.state_point(j));
    MassBoundReport rep;
    rep.mass = total_mass;
    rep.bound = nu_v / (cert.c + model.discount()) + 1.0;
    rep.pass = cert.c + model.discount() > 0.0 && total_mass <= rep.bound + 1e-7;
    return rep;
}

MassBoundReport mass_bound(const GrowthCertificate& cert, const FiniteInstance& inst,
                           const std::vector<Point>& state_points, const OccupationMeasure& mu) {
    double nu_v = 0.0;
    for (std::size_t j = 0; j < inst.state_count; ++j)
        if (inst.nu0[j] != 0.0) nu_v += inst.nu0[j] * cert.v(state_points.at(j));
    MassBoundReport rep;
    rep.mass = mu.total_mass();
    rep.bound = nu_v / (cert.c + inst.alpha) + 1.0;
    rep.pass = cert.c + inst.alpha > 0.0 && rep.mass <= rep.bound + 1e-7;
    return rep;
}

PositivityReport check_w_positivity(const FiniteInstance& inst, double c0) {
    PositivityReport rep;
    rep.min_w = std::numeric_limits<double>::infinity();
    rep.min_w0 = std::numeric_limits<double>::infinity();
    const auto off = state_row_offsets(inst);
    for (std::size_t j = 0; j < inst.state_count; ++j) {
        double w0 = std::numeric_limits<double>::infinity();
        for (std::size_t r = off[j]; r < off[j + 1]; ++r) {
            const double w = c0 + inst.rows[r].running[0] + inst.rows[r].boundary[0];
            rep.min_w = std::min(rep.min_w, w);
            w0 = std::min(w0, w);
        }
        rep.min_w0 = std::min(rep.min_w0, w0);
    }
    rep.pass = c0 > 0.0 && rep.min_w > 0.0 && rep.min_w0 > 0.0;
    return rep;
}

}  // namespace pdmp
