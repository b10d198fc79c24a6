#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <vector>

#include "pdmp/assumptions.hpp"
#include "pdmp/model.hpp"
#include "pdmp/operators.hpp"

namespace pdmp {

/// Cost i of the capacity model: running cost demand*m + rate[j] + constant while
/// building at rate gamma_j, and completion + restart[a_d] when a project finishes.
struct CapacityCost {
    double demand = 0.0;
    /// Indexed by mode 0..kappa; empty means zero.
    std::vector<double> rate;
    double constant = 0.0;
    double completion = 0.0;
    /// Indexed by the boundary mode 0..kappa; empty means zero.
    std::vector<double> restart;
};

struct CapacityParams {
    double lambda = 1.0;
    double tau = 1.0;
    /// gamma_1..gamma_kappa; gamma_0 = 0 is implicit.
    std::vector<double> gamma{1.0, 2.0};
    int demand_cap = 5;
    double alpha = 1.0;
    /// Objective first, then one entry per constraint.
    std::vector<CapacityCost> costs{CapacityCost{}};
    std::vector<double> limits;
    /// Points per investment-threshold grid, endpoints included.
    int sa_grid = 5;
    /// Closure depth of the investment grid.
    int depth = 2;
    /// Initial post-jump state (s, m, j); s must be on the grid.
    double initial_s = 0.0;
    int initial_m = 0;
    int initial_j = 0;
    /// Largest tolerated distance between a landing point and its grid point.
    double max_snap = std::numeric_limits<double>::infinity();

    std::size_t modes() const { return gamma.size() + 1; }
    /// Throws std::invalid_argument on invalid parameters.
    void validate() const;
};

/// alpha / lambda.
double alpha_prime(const CapacityParams& p);
/// g(rho) = alpha' rho^2 + (2 - alpha') rho - 1.
double growth_polynomial(double alpha_prime, double rho);
/// Root of g in (0, 1): the smallest rho for which the exponential certificate holds.
double minimal_growth_rho(double alpha_prime);

/// Investment grid: closure of {0} under s -> s + (tau - s) k / (sa_grid - 1).
std::vector<double> investment_grid(const CapacityParams& p);

class CapacityModel final : public PdmpModel {
public:
    explicit CapacityModel(CapacityParams params);

    const CapacityParams& params() const { return p_; }
    const std::vector<double>& grid() const { return grid_; }
    /// Candidate threshold values: the grid plus tau.
    const std::vector<double>& thresholds() const { return thresholds_; }
    /// Largest snap distance any landing can incur.
    double max_snap_distance() const { return max_snap_; }

    StateId state_id(std::size_t s_index, int m, int j) const;
    std::size_t grid_index(double s) const;
    /// Threshold value s_a and mode j_a of an action.
    double action_threshold(ActionId a) const;
    ModeId action_mode(ActionId a) const;
    ActionId make_action(std::size_t threshold_index, ModeId mode) const;
    /// Nearest grid point to s.
    std::size_t snap(double s) const;
    double exit_time_of(StateId j) const;

    std::size_t state_count() const override { return points_.size(); }
    std::size_t action_count() const override { return thresholds_.size() * p_.modes(); }
    Point state_point(StateId j) const override { return points_[j]; }
    const StateActions& actions(StateId j) const override { return actions_[j]; }
    std::size_t cost_count() const override { return p_.costs.size(); }
    double discount() const override { return p_.alpha; }
    std::vector<double> initial_distribution() const override;
    std::vector<double> limits() const override { return p_.limits; }

    Point flow(const Point& x, double t) const override;
    double exit_time(const Point& x) const override;
    double rate(const Point& x, ModeId mode) const override;
    ModeId control(const Point& x, ActionId a, double t) const override;
    std::vector<JumpOutcome> interior_jump(const Point& x, ModeId mode) const override;
    std::vector<JumpOutcome> boundary_jump(const Point& z, ActionId a) const override;
    double running_cost(std::size_t i, const Point& x, ActionId a) const override;
    double boundary_cost(std::size_t i, const Point& z, ActionId a) const override;

    std::vector<double> breakpoints(const Point& x, ActionId a) const override;
    std::optional<double> rate_lower_bound(const Point& x) const override;
    std::optional<double> rate_upper_bound(const Point& x) const override;
    std::optional<double> sojourn_bound() const override;
    std::optional<double> running_cost_bound(std::size_t i) const override;
    std::optional<double> boundary_cost_bound(std::size_t i) const override;
    std::string state_label(StateId j) const override;

private:
    static Point make_point(double s, double m, double j);
    double speed(ModeId j) const;

    CapacityParams p_;
    std::vector<double> grid_;
    std::vector<double> thresholds_;
    std::vector<Point> points_;
    std::vector<StateActions> actions_;
    double max_snap_ = 0.0;
};

std::unique_ptr<CapacityModel> build_capacity_model(const CapacityParams& p);

/// Exact row from the constant-rate formulas, for comparison against quadrature.
RowValues closed_form_G(const CapacityModel& model, StateId state, ActionPair pair);

/// sup over finite-exit states of int_0^{t*} e^{-lambda t} dt = (1 - e^{-lambda tau / gamma_min}) / lambda.
double capacity_k_lambda(const CapacityParams& p);

/// v(s, m, j) = lambda e^{a1 m} with e^{a1} = 1 + alpha' rho, b = 0, c = -rho alpha.
GrowthCertificate capacity_certificate(const CapacityParams& p, double rho);

}  // namespace pdmp
