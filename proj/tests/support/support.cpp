#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

namespace pdmp::testing {

FiniteInstance two_state_cycle() {
    FiniteInstance inst;
    inst.state_count = 2;
    inst.action_count = 1;
    inst.alpha = 1.0;
    inst.feasible = {{{0}, {0}}, {{0}, {0}}};
    inst.nu0 = {1.0, 0.0};
    for (StateId j = 0; j < 2; ++j) {
        InstanceRow row;
        row.state = j;
        row.kernel = {{1 - j, 0.5}};
        row.running = {0.5};
        row.boundary = {0.0};
        row.sojourn = 0.5;
        inst.rows.push_back(row);
    }
    return inst;
}

namespace {

std::vector<ActionId> random_subset(std::mt19937_64& rng, std::size_t pool, std::size_t count) {
    std::vector<ActionId> all(pool);
    std::iota(all.begin(), all.end(), 0);
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace

FiniteInstance random_instance(std::mt19937_64& rng, const RandomShape& shape) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };

    FiniteInstance inst;
    inst.state_count = pick(1, shape.max_states);
    inst.action_count = 4;
    inst.alpha = 0.5 + 1.5 * unit(rng);
    const std::size_t n = shape.constraints ? *shape.constraints : pick(0, shape.max_constraints);
    const std::size_t pool = std::min<std::size_t>(shape.max_pairs, 4);

    for (std::size_t j = 0; j < inst.state_count; ++j) {
        const std::size_t interior = pick(1, pool);
        const std::size_t boundary = pick(1, shape.max_pairs / interior);
        inst.feasible.push_back({random_subset(rng, 4, interior), random_subset(rng, 4, std::min<std::size_t>(boundary, 4))});
    }
    inst.rows = make_row_skeleton(inst.feasible, n + 1);
    for (auto& row : inst.rows) {
        const double mass = 0.3 + 0.65 * unit(rng);
        std::vector<double> w(inst.state_count);
        for (auto& x : w) x = unit(rng) < 0.7 ? unit(rng) : 0.0;
        w[pick(0, inst.state_count - 1)] += 0.1;
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        row.kernel.clear();
        for (StateId k = 0; k < inst.state_count; ++k)
            if (w[k] > 0.0) row.kernel.push_back({k, mass * w[k] / total});
        row.sojourn = (1.0 - mass) / inst.alpha;
        row.boundary_weight = 0.5 * unit(rng);
        for (std::size_t i = 0; i <= n; ++i) {
            row.running[i] = 2.0 * unit(rng) * row.sojourn;
            row.boundary[i] = unit(rng) * row.boundary_weight;
        }
    }
    std::vector<double> nu(inst.state_count);
    for (auto& x : nu) x = 0.05 + unit(rng);
    const double total = std::accumulate(nu.begin(), nu.end(), 0.0);
    for (auto& x : nu) x /= total;
    inst.nu0 = nu;

    const auto offsets = state_row_offsets(inst);
    std::vector<std::size_t> choice(inst.state_count);
    for (std::size_t j = 0; j < inst.state_count; ++j) choice[j] = pick(offsets[j], offsets[j + 1] - 1);
    inst.limits.assign(n, 0.0);
    const auto costs = deterministic_costs(inst, choice);
    for (std::size_t i = 1; i <= n; ++i) inst.limits[i - 1] = 1.1 * costs[i];
    return inst;
}

std::vector<double> deterministic_costs(const FiniteInstance& inst, const std::vector<std::size_t>& row_choice) {
    const auto s = static_cast<Eigen::Index>(inst.state_count);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(s, s);
    Eigen::VectorXd nu(s);
    for (Eigen::Index j = 0; j < s; ++j) {
        nu[j] = inst.nu0[j];
        for (const auto& e : inst.rows[row_choice[j]].kernel) a(e.state, j) -= e.probability;
    }
    const Eigen::VectorXd marginal = a.fullPivLu().solve(nu);
    std::vector<double> costs(inst.cost_count(), 0.0);
    for (Eigen::Index j = 0; j < s; ++j) {
        const auto& row = inst.rows[row_choice[j]];
        for (std::size_t i = 0; i < costs.size(); ++i) costs[i] += marginal[j] * (row.running[i] + row.boundary[i]);
    }
    return costs;
}

BruteForce brute_force_best(const FiniteInstance& inst, double slack) {
    const auto offsets = state_row_offsets(inst);
    std::vector<std::size_t> choice(offsets.begin(), offsets.end() - 1);
    BruteForce out;
    while (true) {
        ++out.policies;
        const auto costs = deterministic_costs(inst, choice);
        bool feasible = true;
        for (std::size_t i = 0; i < inst.limits.size(); ++i) feasible = feasible && costs[i + 1] <= inst.limits[i] + slack;
        if (feasible && (!out.best || costs[0] < *out.best)) out.best = costs[0];
        std::size_t j = 0;
        for (; j < choice.size(); ++j) {
            if (++choice[j] < offsets[j + 1]) break;
            choice[j] = offsets[j];
        }
        if (j == choice.size()) break;
    }
    return out;
}

CapacityParams capacity_fixture() {
    CapacityParams p;
    p.lambda = 1.0;
    p.tau = 1.0;
    p.gamma = {1.0, 2.0};
    p.demand_cap = 5;
    p.alpha = 1.0;
    p.depth = 2;
    CapacityCost objective;
    objective.demand = 1.0;
    CapacityCost spend;
    spend.rate = {0.0, 1.0, 2.0};
    p.costs = {objective, spend};
    p.limits = {0.5};
    return p;
}

RampModel::RampModel() : actions_(3, StateActions{{0, 1}, {0}}) {}

Point RampModel::state_point(StateId j) const {
    static constexpr double positions[] = {0.0, 0.5, 2.0};
    Point p(1);
    p[0] = positions[j];
    return p;
}

Point RampModel::flow(const Point& x, double t) const {
    Point y = x;
    y[0] += t;
    return y;
}

double RampModel::exit_time(const Point&) const { return std::numeric_limits<double>::infinity(); }

std::vector<JumpOutcome> RampModel::interior_jump(const Point&, ModeId mode) const {
    const StateId far = mode == 0 ? 1 : 2;
    return {{0, 0.5, state_point(0)}, {far, 0.5, state_point(far)}};
}

std::vector<JumpOutcome> RampModel::boundary_jump(const Point&, ActionId) const { return {}; }

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf,
                    const std::function<double(double)>& cdf_left) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        // Only the last of a run of ties carries the full empirical jump.
        if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
        std::size_t first = i;
        while (first > 0 && samples[first - 1] == samples[i]) --first;
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf(samples[i])));
        d = std::max(d, std::abs(static_cast<double>(first) / n - cdf_left(samples[i])));
    }
    return d;
}

}  // namespace pdmp::testing
