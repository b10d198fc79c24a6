#include "pdmp/operators.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <thread>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cut points for [0, horizon]: endpoints plus every breakpoint strictly inside.
std::vector<double> segment_cuts(const PdmpModel& model, const Point& x, ActionId a, double horizon) {
    std::vector<double> cuts{0.0};
    auto bps = model.breakpoints(x, a);
    std::sort(bps.begin(), bps.end());
    for (double b : bps)
        if (b > cuts.back() && b < horizon) cuts.push_back(b);
    cuts.push_back(horizon);
    // Drop slivers that would only cost evaluations.
    std::vector<double> out{cuts.front()};
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        if (cuts[i] - out.back() > 1e-14 * std::max(1.0, horizon))
            out.push_back(cuts[i]);
        else if (i + 1 == cuts.size())
            out.back() = cuts[i];
    }
    if (out.size() < 2) out = {0.0, horizon};
    return out;
}

}  // namespace

double integration_horizon(const PdmpModel& model, const Point& x, const QuadratureConfig& quad) {
    const double t_star = model.exit_time(x);
    if (std::isfinite(t_star)) return t_star;
    const auto floor = model.rate_lower_bound(x);
    if (!floor || !(*floor > 0.0))
        throw UnboundedHorizon("t* is infinite and no positive jump-rate lower bound is declared");
    return -std::log(quad.tail_epsilon) / (model.discount() + *floor);
}

RateProfile::RateProfile(const PdmpModel& model, Point x, ActionId a, double horizon, const QuadratureConfig& quad)
    : model_(&model), x_(std::move(x)), a_(a) {
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw std::invalid_argument("RateProfile: horizon must be positive and finite");
    const auto cuts = segment_cuts(model, x_, a_, horizon);
    auto rate = [this](double t) { return rate_at(t); };

    nodes_.push_back(0.0);
    values_.push_back(0.0);
    std::size_t refinements = 0;
    for (std::size_t c = 1; c < cuts.size(); ++c) {
        // Depth-first bisection keeps the nodes in increasing order.
        std::vector<std::pair<double, double>> stack{{cuts[c - 1], cuts[c]}};
        while (!stack.empty()) {
            auto [lo, hi] = stack.back();
            stack.pop_back();
            double err = 0.0;
            const double v = kronrod_panel(rate, lo, hi, &err);
            const double tol = 0.1 * std::max(quad.abs_tol * (hi - lo) / horizon, quad.rel_tol * std::abs(v));
            if (err > tol && hi - lo > 1e-12 * horizon) {
                if (++refinements > quad.max_subdivisions)
                    throw QuadratureFailure("cumulative rate did not resolve within the subdivision budget");
                const double mid = 0.5 * (lo + hi);
                stack.push_back({mid, hi});
                stack.push_back({lo, mid});
                continue;
            }
            nodes_.push_back(hi);
            values_.push_back(values_.back() + v);
            error_ += err;
        }
    }
}

double RateProfile::rate_at(double t) const {
    return model_->rate(model_->flow(x_, t), model_->control(x_, a_, t));
}

double RateProfile::segment(double a, double b) const {
    if (b <= a) return 0.0;
    return kronrod_panel([this](double t) { return rate_at(t); }, a, b);
}

double RateProfile::operator()(double t) const {
    if (t <= 0.0) return 0.0;
    if (t >= nodes_.back()) {
        if (t == nodes_.back()) return values_.back();
        // Past the cached range: integrate adaptively from the last node.
        std::vector<double> cuts{nodes_.back()};
        for (double b : model_->breakpoints(x_, a_))
            if (b > cuts.back() && b < t) cuts.push_back(b);
        cuts.push_back(t);
        QuadratureConfig cfg;
        return values_.back() + integrate_scalar([this](double s) { return rate_at(s); }, cuts, cfg);
    }
    const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    const auto i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return values_[i] + segment(nodes_[i], t);
}

double RateProfile::invert(double level, double t_tol) const {
    if (level <= 0.0) return 0.0;
    double lo = 0.0;
    double hi = 0.0;
    if (level <= values_.back()) {
        const auto it = std::lower_bound(values_.begin(), values_.end(), level);
        const auto i = static_cast<std::size_t>(it - values_.begin());
        lo = nodes_[i - 1];
        hi = nodes_[i];
    } else {
        // Extend the profile in growing steps until the level is bracketed.
        double base = values_.back();
        lo = nodes_.back();
        double step = std::max(1.0, lo);
        for (int k = 0;; ++k) {
            if (k > 200 || !std::isfinite(lo + step))
                throw UnboundedHorizon("jump rate too small to reach the sampled cumulative level");
            const double gain = (*this)(lo + step) - (*this)(lo);
            if (base + gain >= level) {
                hi = lo + step;
                break;
            }
            base += gain;
            lo += step;
            step *= 2.0;
        }
    }
    // Safeguarded Newton on F(t) = Lambda(t) - level over the bracket [lo, hi].
    double a = lo;
    double b = hi;
    double t = 0.5 * (a + b);
    for (int iter = 0; iter < 200 && b - a > t_tol; ++iter) {
        const double f = (*this)(t) - level;
        if (f > 0.0)
            b = t;
        else
            a = t;
        const double slope = rate_at(t);
        double next = slope > 0.0 ? t - f / slope : 0.5 * (a + b);
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (std::abs(next - t) <= 0.25 * t_tol) {
            t = next;
            break;
        }
        t = next;
    }
    return t;
}

double cumulative_rate(const PdmpModel& model, const Point& x, ActionId a, double t, const QuadratureConfig& quad) {
    if (t < 0.0) throw std::invalid_argument("cumulative_rate: negative time");
    if (t > model.exit_time(x)) throw std::invalid_argument("cumulative_rate: time beyond t*(x)");
    if (t == 0.0) return 0.0;
    const auto cuts = segment_cuts(model, x, a, t);
    return integrate_scalar([&](double s) { return model.rate(model.flow(x, s), model.control(x, a, s)); }, cuts,
                            quad);
}

OperatorValue operator_L(const PdmpModel& model, const Point& x, ActionPair pair, const PointActionFunction& g,
                         const QuadratureConfig& quad, std::optional<double> g_bound) {
    const double horizon = integration_horizon(model, x, quad);
    if (horizon <= 0.0) return {};
    RateProfile profile(model, x, pair.interior, horizon, quad);
    const double alpha = model.discount();
    const auto cuts = segment_cuts(model, x, pair.interior, horizon);
    double err = 0.0;
    const double value = integrate_scalar(
        [&](double s) { return std::exp(-alpha * s - profile(s)) * g(model.flow(x, s), pair.interior); }, cuts, quad,
        &err);
    OperatorValue out{value, err + profile.error() * std::abs(value), false};
    if (!std::isfinite(model.exit_time(x))) {
        if (g_bound) {
            const double survival = std::exp(-alpha * horizon - profile(horizon));
            out.error += survival * *g_bound / (alpha + *model.rate_lower_bound(x));
        } else {
            out.uncertified_tail = true;
        }
    }
    return out;
}

double operator_H(const PdmpModel& model, const Point& x, ActionPair pair, const PointActionFunction& w,
                  const QuadratureConfig& quad) {
    const double t_star = model.exit_time(x);
    if (!std::isfinite(t_star)) return 0.0;
    const double lambda = cumulative_rate(model, x, pair.interior, t_star, quad);
    return std::exp(-model.discount() * t_star - lambda) * w(model.flow(x, t_star), pair.boundary);
}

KernelRow operator_G(const PdmpModel& model, const Point& x, ActionPair pair, const QuadratureConfig& quad) {
    auto row = evaluate_row(model, x, pair, quad);
    return {std::move(row.kernel), row.error};
}

RowValues evaluate_row(const PdmpModel& model, const Point& x, ActionPair pair, const QuadratureConfig& quad) {
    const double horizon = integration_horizon(model, x, quad);
    if (!(horizon > 0.0)) {
        // Starting on the boundary: the jump is immediate.
        RowValues out;
        const std::size_t n = model.cost_count();
        out.running.assign(n, 0.0);
        out.boundary.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.boundary[i] = model.boundary_cost(i, x, pair.boundary);
        for (const auto& o : model.boundary_jump(x, pair.boundary)) out.kernel.push_back({o.state, o.probability});
        normalize_layout(out.kernel);
        out.boundary_weight = 1.0;
        return out;
    }
    RateProfile profile(model, x, pair.interior, horizon, quad);
    return evaluate_row(model, profile, pair.boundary, quad);
}

namespace {

// Interior part of a row: [G per state | L1 | Lf_0..Lf_{n-1} | L(lambda + alpha)].
struct InteriorIntegrals {
    QuadratureResult q;
    std::size_t states = 0;
    std::size_t costs = 0;
};

InteriorIntegrals integrate_interior(const PdmpModel& model, const RateProfile& profile, const QuadratureConfig& quad) {
    const Point& x = profile.origin();
    const ActionId a = profile.action();
    const double alpha = model.discount();
    const std::size_t s = model.state_count();
    const std::size_t n = model.cost_count();
    const std::size_t i_sojourn = s;
    const std::size_t i_running = s + 1;
    const std::size_t i_rate = s + 1 + n;

    VectorIntegrand integrand = [&](double t, Eigen::Ref<Eigen::VectorXd> out) {
        out.setZero();
        const Point y = model.flow(x, t);
        const ModeId mode = model.control(x, a, t);
        const double lambda = model.rate(y, mode);
        const double weight = std::exp(-alpha * t - profile(t));
        if (lambda > 0.0) {
            for (const auto& o : model.interior_jump(y, mode)) out[o.state] += weight * lambda * o.probability;
        }
        out[i_sojourn] = weight;
        for (std::size_t i = 0; i < n; ++i) out[i_running + i] = weight * model.running_cost(i, y, a);
        out[i_rate] = weight * (lambda + alpha);
    };
    const auto cuts = segment_cuts(model, x, a, profile.horizon());
    return {integrate(integrand, s + n + 2, cuts, quad), s, n};
}

RowValues finish_row(const PdmpModel& model, const RateProfile& profile, const InteriorIntegrals& interior,
                     ActionId boundary_action) {
    const Point& x = profile.origin();
    const double alpha = model.discount();
    const double horizon = profile.horizon();
    const double t_star = model.exit_time(x);
    const std::size_t s = interior.states;
    const std::size_t n = interior.costs;
    const auto& q = interior.q;

    RowValues out;
    out.running.resize(n);
    out.boundary.assign(n, 0.0);
    out.sojourn = q.value[s];
    out.rate_plus_discount = q.value[s + 1 + n];
    for (std::size_t i = 0; i < n; ++i) out.running[i] = q.value[s + 1 + i];
    std::vector<double> kernel(q.value.data(), q.value.data() + s);

    double tail = 0.0;
    const double survival = std::exp(-alpha * horizon - profile(horizon));
    if (std::isfinite(t_star)) {
        out.boundary_weight = survival;
        const Point z = model.flow(x, t_star);
        for (std::size_t i = 0; i < n; ++i) out.boundary[i] = survival * model.boundary_cost(i, z, boundary_action);
        for (const auto& o : model.boundary_jump(z, boundary_action)) kernel[o.state] += survival * o.probability;
    } else {
        // Truncated tail: G and L(lambda + alpha) lose at most the survival weight.
        tail = survival;
        const double floor = *model.rate_lower_bound(x);
        for (std::size_t i = 0; i < n; ++i) {
            const auto bound = model.running_cost_bound(i);
            if (bound)
                tail = std::max(tail, survival * *bound / (alpha + floor));
            else
                out.uncertified_tail = true;
        }
    }
    for (std::size_t j = 0; j < s; ++j)
        if (kernel[j] != 0.0) out.kernel.push_back({static_cast<StateId>(j), kernel[j]});

    const double mass_scale = std::max(1.0, q.value.cwiseAbs().maxCoeff());
    out.error = q.error.maxCoeff() + profile.error() * mass_scale + tail;
    return out;
}

}  // namespace

RowValues evaluate_row(const PdmpModel& model, const RateProfile& profile, ActionId boundary_action,
                       const QuadratureConfig& quad) {
    return finish_row(model, profile, integrate_interior(model, profile, quad), boundary_action);
}

unsigned thread_budget() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("PDMP_LP_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
    }
    return n;
}

FiniteInstance tabulate(const PdmpModel& model, const QuadratureConfig& quad) {
    quad.validate();
    FiniteInstance inst;
    inst.state_count = model.state_count();
    inst.action_count = model.action_count();
    inst.alpha = model.discount();
    inst.nu0 = model.initial_distribution();
    inst.limits = model.limits();
    inst.feasible.reserve(inst.state_count);
    for (StateId j = 0; j < inst.state_count; ++j) inst.feasible.push_back(model.actions(j));
    if (model.cost_count() != inst.cost_count())
        throw std::invalid_argument("model cost count does not match its number of limits plus one");
    inst.rows = make_row_skeleton(inst.feasible, inst.cost_count());

    // Rows sharing (state, interior action) reuse one rate profile.
    struct Task {
        std::size_t first;
        std::size_t last;
    };
    std::vector<Task> tasks;
    for (std::size_t r = 0; r < inst.rows.size();) {
        std::size_t e = r + 1;
        while (e < inst.rows.size() && inst.rows[e].state == inst.rows[r].state &&
               inst.rows[e].pair.interior == inst.rows[r].pair.interior)
            ++e;
        tasks.push_back({r, e});
        r = e;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(tasks.size());
    auto worker = [&]() {
        for (std::size_t k = next++; k < tasks.size(); k = next++) {
            try {
                const auto& task = tasks[k];
                auto& head = inst.rows[task.first];
                const Point x = model.state_point(head.state);
                const double horizon = integration_horizon(model, x, quad);
                std::optional<RateProfile> profile;
                std::optional<InteriorIntegrals> interior;
                if (horizon > 0.0) {
                    profile.emplace(model, x, head.pair.interior, horizon, quad);
                    interior = integrate_interior(model, *profile, quad);
                }
                for (std::size_t r = task.first; r < task.last; ++r) {
                    auto& row = inst.rows[r];
                    auto values = profile ? finish_row(model, *profile, *interior, row.pair.boundary)
                                          : evaluate_row(model, x, row.pair, quad);
                    row.kernel = std::move(values.kernel);
                    row.running = std::move(values.running);
                    row.boundary = std::move(values.boundary);
                    row.sojourn = values.sojourn;
                    row.boundary_weight = values.boundary_weight;
                    row.quad_error = values.error;
                }
            } catch (...) {
                failures[k] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::min<unsigned>(thread_budget(), static_cast<unsigned>(std::max<std::size_t>(1, tasks.size())));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);
    return inst;
}

}  // namespace pdmp
