#pragma once

#include <string>
#include <vector>

#include "pdmp/model.hpp"

namespace pdmp {

/// Returns an empty string when `inst` can be realized by ConstantRateModel, otherwise
/// the reason it cannot.
std::string realization_obstacle(const FiniteInstance& inst, double tolerance = 1e-9);

/// PDMP reproducing a tabulated instance whose rows never reach a boundary and do not
/// depend on the boundary action: a still flow, constant rate lambda = 1/L1 - alpha,
/// Q = G / G(E), f_i = Lf_i / L1. Points are one-dimensional state indices.
class ConstantRateModel final : public PdmpModel {
public:
    /// Throws std::invalid_argument when the instance is not realizable.
    explicit ConstantRateModel(const FiniteInstance& inst);

    std::size_t state_count() const override { return inst_.state_count; }
    std::size_t action_count() const override { return inst_.action_count; }
    Point state_point(StateId j) const override;
    const StateActions& actions(StateId j) const override { return inst_.feasible[j]; }
    std::size_t cost_count() const override { return inst_.cost_count(); }
    double discount() const override { return inst_.alpha; }
    std::vector<double> initial_distribution() const override { return inst_.nu0; }
    std::vector<double> limits() const override { return inst_.limits; }

    Point flow(const Point& x, double) const override { return x; }
    double exit_time(const Point&) const override;
    double rate(const Point& x, ModeId mode) const override;
    ModeId control(const Point&, ActionId a, double) const override { return a; }
    std::vector<JumpOutcome> interior_jump(const Point& x, ModeId mode) const override;
    std::vector<JumpOutcome> boundary_jump(const Point& z, ActionId a) const override;
    double running_cost(std::size_t i, const Point& x, ActionId a) const override;
    double boundary_cost(std::size_t, const Point&, ActionId) const override { return 0.0; }

    std::optional<double> rate_lower_bound(const Point& x) const override;
    std::optional<double> rate_upper_bound(const Point& x) const override;
    std::optional<double> running_cost_bound(std::size_t i) const override;
    std::optional<double> boundary_cost_bound(std::size_t) const override { return 0.0; }

private:
    struct Stage {
        double rate = 0.0;
        std::vector<JumpOutcome> jumps;
        std::vector<double> running;
    };
    const Stage& stage(const Point& x, ActionId a) const;

    FiniteInstance inst_;
    /// Indexed by state, then position of the interior action in the feasible set.
    std::vector<std::vector<Stage>> stages_;
    std::vector<double> min_rate_;
    std::vector<double> max_rate_;
    std::vector<double> cost_bound_;
};

}  // namespace pdmp
