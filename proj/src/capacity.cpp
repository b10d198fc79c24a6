#include "pdmp/capacity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

constexpr double kGridTol = 1e-12;

void check_cost_vector(const std::vector<double>& v, std::size_t modes, const char* what) {
    if (!v.empty() && v.size() != modes)
        throw std::invalid_argument(std::string("capacity cost ") + what + " must have one entry per mode");
    for (double x : v)
        if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string("capacity cost ") + what + " must be nonnegative");
}

double entry(const std::vector<double>& v, std::size_t k) { return v.empty() ? 0.0 : v[k]; }

}  // namespace

void CapacityParams::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("capacity parameters: " + m); };
    if (!(lambda > 0.0) || !std::isfinite(lambda)) fail("lambda must be positive");
    if (!(tau > 0.0) || !std::isfinite(tau)) fail("tau must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be positive");
    if (gamma.empty()) fail("at least one construction rate is required");
    for (std::size_t i = 0; i < gamma.size(); ++i) {
        if (!(gamma[i] > 0.0) || !std::isfinite(gamma[i])) fail("construction rates must be positive");
        for (std::size_t k = 0; k < i; ++k)
            if (gamma[k] == gamma[i]) fail("construction rates must be distinct");
    }
    if (demand_cap < 1) fail("demand cap must be at least 1");
    if (sa_grid < 2) fail("sa_grid must be at least 2");
    if (depth < 0) fail("depth must be nonnegative");
    if (costs.empty()) fail("the objective cost is required");
    for (const auto& c : costs) {
        if (!(c.demand >= 0.0) || !(c.constant >= 0.0) || !(c.completion >= 0.0)) fail("costs must be nonnegative");
        check_cost_vector(c.rate, modes(), "rate");
        check_cost_vector(c.restart, modes(), "restart");
    }
    if (limits.size() + 1 != costs.size()) fail("need one limit per constraint cost");
    for (double d : limits)
        if (!(d >= 0.0)) fail("limits must be nonnegative");
    if (initial_m < 0 || initial_m > demand_cap) fail("initial demand outside [0, demand_cap]");
    if (initial_j < 0 || initial_j >= static_cast<int>(modes())) fail("initial mode out of range");
    if (!(initial_s >= 0.0 && initial_s < tau)) fail("initial investment outside [0, tau)");
    if (!(max_snap > 0.0)) fail("max_snap must be positive");
}

double alpha_prime(const CapacityParams& p) { return p.alpha / p.lambda; }

double growth_polynomial(double ap, double rho) { return ap * rho * rho + (2.0 - ap) * rho - 1.0; }

double minimal_growth_rho(double ap) {
    const double b = 2.0 - ap;
    return (-b + std::sqrt(b * b + 4.0 * ap)) / (2.0 * ap);
}

std::vector<double> investment_grid(const CapacityParams& p) {
    std::vector<double> grid{0.0};
    const double steps = p.sa_grid - 1;
    for (int d = 0; d < p.depth; ++d) {
        std::vector<double> next = grid;
        for (double s : grid)
            for (int k = 1; k < p.sa_grid - 1; ++k) next.push_back(s + (p.tau - s) * k / steps);
        std::sort(next.begin(), next.end());
        next.erase(std::unique(next.begin(), next.end(), [](double a, double b) { return std::abs(a - b) <= kGridTol; }),
                   next.end());
        grid = std::move(next);
    }
    return grid;
}

Point CapacityModel::make_point(double s, double m, double j) {
    Point x(3);
    x << s, m, j;
    return x;
}

CapacityModel::CapacityModel(CapacityParams params) : p_(std::move(params)) {
    p_.validate();
    grid_ = investment_grid(p_);
    thresholds_ = grid_;
    thresholds_.push_back(p_.tau);

    max_snap_ = p_.tau - grid_.back();
    for (std::size_t k = 1; k < grid_.size(); ++k) max_snap_ = std::max(max_snap_, 0.5 * (grid_[k] - grid_[k - 1]));
    if (max_snap_ > p_.max_snap) {
        std::ostringstream os;
        os << "investment grid too coarse: landings may move by " << max_snap_ << " > max_snap " << p_.max_snap;
        throw GridTooCoarse(os.str());
    }

    const std::size_t modes = p_.modes();
    const int cap = p_.demand_cap;
    const double steps = p_.sa_grid - 1;
    for (std::size_t si = 0; si < grid_.size(); ++si) {
        const double s = grid_[si];
        for (int m = 0; m <= cap; ++m) {
            for (std::size_t j = 0; j < modes; ++j) {
                points_.push_back(make_point(s, m, static_cast<double>(j)));
                StateActions acts;
                if (j == 0) {
                    for (std::size_t mode = 0; mode < modes; ++mode)
                        acts.interior.push_back(make_action(si, static_cast<ModeId>(mode)));
                    acts.boundary.push_back(make_action(0, 0));
                } else {
                    std::vector<std::size_t> options;
                    if (m == 0) {
                        options.push_back(si);
                    } else {
                        for (int k = 0; k < p_.sa_grid; ++k) {
                            const double target = s + (p_.tau - s) * k / steps;
                            std::size_t best = thresholds_.size() - 1;
                            for (std::size_t t = si; t < thresholds_.size(); ++t)
                                if (std::abs(thresholds_[t] - target) < std::abs(thresholds_[best] - target)) best = t;
                            options.push_back(best);
                        }
                        std::sort(options.begin(), options.end());
                        options.erase(std::unique(options.begin(), options.end()), options.end());
                    }
                    for (std::size_t t : options)
                        for (std::size_t mode = 0; mode < modes; ++mode)
                            if (mode != j) acts.interior.push_back(make_action(t, static_cast<ModeId>(mode)));
                    for (std::size_t mode = 0; mode < modes; ++mode)
                        acts.boundary.push_back(make_action(0, static_cast<ModeId>(mode)));
                }
                actions_.push_back(std::move(acts));
            }
        }
    }
    // Validates the initial state.
    (void)initial_distribution();
}

StateId CapacityModel::state_id(std::size_t s_index, int m, int j) const {
    return static_cast<StateId>((s_index * static_cast<std::size_t>(p_.demand_cap + 1) + static_cast<std::size_t>(m)) *
                                    p_.modes() +
                                static_cast<std::size_t>(j));
}

std::size_t CapacityModel::grid_index(double s) const {
    const std::size_t k = snap(s);
    if (std::abs(grid_[k] - s) > 1e-9) throw std::invalid_argument("investment level is not a grid point");
    return k;
}

std::size_t CapacityModel::snap(double s) const {
    const auto it = std::lower_bound(grid_.begin(), grid_.end(), s);
    if (it == grid_.begin()) return 0;
    if (it == grid_.end()) return grid_.size() - 1;
    const auto hi = static_cast<std::size_t>(it - grid_.begin());
    return (s - grid_[hi - 1] <= grid_[hi] - s) ? hi - 1 : hi;
}

double CapacityModel::action_threshold(ActionId a) const { return thresholds_.at(a / p_.modes()); }
ModeId CapacityModel::action_mode(ActionId a) const { return static_cast<ModeId>(a % p_.modes()); }
ActionId CapacityModel::make_action(std::size_t threshold_index, ModeId mode) const {
    return static_cast<ActionId>(threshold_index * p_.modes() + mode);
}

double CapacityModel::speed(ModeId j) const { return j == 0 ? 0.0 : p_.gamma[j - 1]; }

double CapacityModel::exit_time_of(StateId j) const { return exit_time(points_.at(j)); }

std::vector<double> CapacityModel::initial_distribution() const {
    std::vector<double> nu(points_.size(), 0.0);
    nu[state_id(grid_index(p_.initial_s), p_.initial_m, p_.initial_j)] = 1.0;
    return nu;
}

Point CapacityModel::flow(const Point& x, double t) const {
    return make_point(x[0] + speed(static_cast<ModeId>(x[2])) * t, x[1], x[2]);
}

double CapacityModel::exit_time(const Point& x) const {
    const double g = speed(static_cast<ModeId>(x[2]));
    if (g == 0.0) return std::numeric_limits<double>::infinity();
    return std::max(0.0, (p_.tau - x[0]) / g);
}

double CapacityModel::rate(const Point&, ModeId) const { return p_.lambda; }

ModeId CapacityModel::control(const Point& x, ActionId a, double t) const {
    const auto j = static_cast<ModeId>(x[2]);
    return x[0] + speed(j) * t < action_threshold(a) ? j : action_mode(a);
}

std::vector<JumpOutcome> CapacityModel::interior_jump(const Point& x, ModeId mode) const {
    const int m = static_cast<int>(x[1]);
    const std::size_t si = snap(x[0]);
    return {{state_id(si, std::min(m + 1, p_.demand_cap), static_cast<int>(mode)), 1.0,
             make_point(x[0], m + 1, static_cast<double>(mode))}};
}

std::vector<JumpOutcome> CapacityModel::boundary_jump(const Point& z, ActionId a) const {
    const int m = static_cast<int>(z[1]);
    const ModeId mode = action_mode(a);
    return {{state_id(0, std::max(m - 1, 0), static_cast<int>(mode)), 1.0,
             make_point(0.0, m - 1, static_cast<double>(mode))}};
}

double CapacityModel::running_cost(std::size_t i, const Point& x, ActionId) const {
    const auto& c = p_.costs[i];
    return c.demand * x[1] + entry(c.rate, static_cast<std::size_t>(x[2])) + c.constant;
}

double CapacityModel::boundary_cost(std::size_t i, const Point&, ActionId a) const {
    const auto& c = p_.costs[i];
    return c.completion + entry(c.restart, action_mode(a));
}

std::vector<double> CapacityModel::breakpoints(const Point& x, ActionId a) const {
    const double g = speed(static_cast<ModeId>(x[2]));
    if (g == 0.0) return {};
    const double t_star = exit_time(x);
    std::vector<double> out;
    for (std::size_t k = 1; k < grid_.size(); ++k) {
        const double t = (0.5 * (grid_[k - 1] + grid_[k]) - x[0]) / g;
        if (t > 0.0 && t < t_star) out.push_back(t);
    }
    const double sw = (action_threshold(a) - x[0]) / g;
    if (sw > 0.0 && sw < t_star) out.push_back(sw);
    std::sort(out.begin(), out.end());
    return out;
}

std::optional<double> CapacityModel::rate_lower_bound(const Point&) const { return p_.lambda; }
std::optional<double> CapacityModel::rate_upper_bound(const Point&) const { return p_.lambda; }
std::optional<double> CapacityModel::sojourn_bound() const { return 1.0 / p_.lambda; }

std::optional<double> CapacityModel::running_cost_bound(std::size_t i) const {
    const auto& c = p_.costs[i];
    const double rate_max = c.rate.empty() ? 0.0 : *std::max_element(c.rate.begin(), c.rate.end());
    return c.demand * p_.demand_cap + rate_max + c.constant;
}

std::optional<double> CapacityModel::boundary_cost_bound(std::size_t i) const {
    const auto& c = p_.costs[i];
    const double restart_max = c.restart.empty() ? 0.0 : *std::max_element(c.restart.begin(), c.restart.end());
    return c.completion + restart_max;
}

std::string CapacityModel::state_label(StateId j) const {
    const auto& x = points_.at(j);
    std::ostringstream os;
    os.precision(17);
    os << "(" << x[0] << "," << static_cast<int>(x[1]) << "," << static_cast<int>(x[2]) << ")";
    return os.str();
}

std::unique_ptr<CapacityModel> build_capacity_model(const CapacityParams& p) {
    return std::make_unique<CapacityModel>(p);
}

RowValues closed_form_G(const CapacityModel& model, StateId state, ActionPair pair) {
    const auto& p = model.params();
    const Point x = model.state_point(state);
    const double rate = p.alpha + p.lambda;
    const std::size_t n = model.cost_count();
    RowValues out;
    out.running.resize(n);
    out.boundary.assign(n, 0.0);
    std::vector<double> kernel(model.state_count(), 0.0);

    const double t_star = model.exit_time(x);
    if (!std::isfinite(t_star)) {
        const ModeId mode = model.control(x, pair.interior, 0.0);
        for (const auto& o : model.interior_jump(x, mode)) kernel[o.state] += p.lambda / rate * o.probability;
        out.sojourn = 1.0 / rate;
    } else {
        std::vector<double> cuts{0.0};
        for (double b : model.breakpoints(x, pair.interior)) cuts.push_back(b);
        cuts.push_back(t_star);
        for (std::size_t k = 1; k < cuts.size(); ++k) {
            const double ta = cuts[k - 1];
            const double tb = cuts[k];
            if (!(tb > ta)) continue;
            const double mid = 0.5 * (ta + tb);
            const ModeId mode = model.control(x, pair.interior, mid);
            const double mass = -p.lambda / rate * std::exp(-rate * ta) * std::expm1(-rate * (tb - ta));
            for (const auto& o : model.interior_jump(model.flow(x, mid), mode)) kernel[o.state] += mass * o.probability;
        }
        out.sojourn = -std::expm1(-rate * t_star) / rate;
        out.boundary_weight = std::exp(-rate * t_star);
        const Point z = model.flow(x, t_star);
        for (const auto& o : model.boundary_jump(z, pair.boundary))
            kernel[o.state] += out.boundary_weight * o.probability;
        for (std::size_t i = 0; i < n; ++i)
            out.boundary[i] = out.boundary_weight * model.boundary_cost(i, z, pair.boundary);
    }
    for (std::size_t i = 0; i < n; ++i) out.running[i] = out.sojourn * model.running_cost(i, x, pair.interior);
    out.rate_plus_discount = rate * out.sojourn;
    for (std::size_t j = 0; j < kernel.size(); ++j)
        if (kernel[j] != 0.0) out.kernel.push_back({static_cast<StateId>(j), kernel[j]});
    return out;
}

double capacity_k_lambda(const CapacityParams& p) {
    const double g_min = *std::min_element(p.gamma.begin(), p.gamma.end());
    return -std::expm1(-p.lambda * p.tau / g_min) / p.lambda;
}

GrowthCertificate capacity_certificate(const CapacityParams& p, double rho) {
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
    const double a1 = std::log1p(alpha_prime(p) * rho);
    const double lambda = p.lambda;
    GrowthCertificate cert;
    cert.v = [lambda, a1](const Point& x) { return lambda * std::exp(a1 * x[1]); };
    cert.b = [](const Point&, ModeId) { return 0.0; };
    cert.c = -rho * p.alpha;
    cert.flow_derivative = [](const Point&) { return 0.0; };
    std::ostringstream os;
    os.precision(17);
    os << "v = lambda exp(a1 m), a1 = log(1 + alpha' rho), rho = " << rho << ", b = 0, c = -rho alpha";
    cert.description = os.str();
    return cert;
}

}  // namespace pdmp
