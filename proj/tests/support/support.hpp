#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "pdmp/capacity.hpp"
#include "pdmp/model.hpp"

namespace pdmp::testing {

/// Two states visited alternately: lambda = alpha = 1, no boundary, f_0 = 1, start in z0.
/// G = 1/2, calL = 1/2, Lf_0 = 1/2 in both states.
FiniteInstance two_state_cycle();

struct RandomShape {
    std::size_t max_states = 6;
    std::size_t max_pairs = 4;
    std::size_t max_constraints = 2;
    /// Fix the number of constraints instead of drawing it.
    std::optional<std::size_t> constraints;
};

/// Valid random instance. Limits are 1.1 times the costs of a random deterministic
/// policy, so the constrained problem is feasible.
FiniteInstance random_instance(std::mt19937_64& rng, const RandomShape& shape);

/// Costs of a deterministic policy by direct linear solve of the occupation equation.
std::vector<double> deterministic_costs(const FiniteInstance& inst, const std::vector<std::size_t>& row_choice);

struct BruteForce {
    std::optional<double> best;
    std::size_t policies = 0;
};

/// Minimum objective over all deterministic stationary policies meeting every limit.
BruteForce brute_force_best(const FiniteInstance& inst, double slack = 1e-12);

/// Capacity fixture: tau = 1, lambda = alpha = 1, gamma = (1, 2), M = 5, depth 2, and
/// one spending budget on construction.
CapacityParams capacity_fixture();

/// Flow x + t on the half line, rate mode + 1 + x, no boundary.
class RampModel final : public PdmpModel {
public:
    RampModel();

    std::size_t state_count() const override { return 3; }
    std::size_t action_count() const override { return 2; }
    Point state_point(StateId j) const override;
    const StateActions& actions(StateId j) const override { return actions_[j]; }
    std::size_t cost_count() const override { return 1; }
    double discount() const override { return 1.0; }
    std::vector<double> initial_distribution() const override { return {1.0, 0.0, 0.0}; }
    std::vector<double> limits() const override { return {}; }

    Point flow(const Point& x, double t) const override;
    double exit_time(const Point&) const override;
    double rate(const Point& x, ModeId mode) const override { return mode + 1.0 + x[0]; }
    ModeId control(const Point&, ActionId a, double) const override { return a; }
    std::vector<JumpOutcome> interior_jump(const Point& x, ModeId mode) const override;
    std::vector<JumpOutcome> boundary_jump(const Point& z, ActionId a) const override;
    double running_cost(std::size_t, const Point& x, ActionId) const override { return x[0]; }
    double boundary_cost(std::size_t, const Point&, ActionId) const override { return 0.0; }
    std::optional<double> rate_lower_bound(const Point& x) const override { return 1.0 + x[0]; }

    /// Closed form of the cumulative rate from x under action a.
    static double cumulative(double x, ActionId a, double t) { return (a + 1.0 + x) * t + 0.5 * t * t; }

private:
    std::vector<StateActions> actions_;
};

/// Two-sided one-sample Kolmogorov-Smirnov statistic; `cdf_left` gives F(t-) to allow atoms.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf,
                    const std::function<double(double)>& cdf_left);

/// Asymptotic critical value of sqrt(n) D at level 0.01.
inline constexpr double kKsCritical01 = 1.6276;

}  // namespace pdmp::testing
