#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/operators.hpp"
#include "pdmp/policy.hpp"

namespace pdmp {

/// Independent stream for one trajectory, derived from (master seed, index).
class TrajectoryRng {
public:
    TrajectoryRng(std::uint64_t master_seed, std::uint64_t index);

    /// Uniform on the open interval (0, 1).
    double uniform();

private:
    std::mt19937_64 engine_;
};

struct Interjump {
    double time = 0.0;
    bool boundary = false;
};

/// Inverse-transform draw of the next jump time from x under interior action a.
Interjump sample_interjump(const PdmpModel& model, const RateProfile& profile, TrajectoryRng& rng);
Interjump sample_interjump(const PdmpModel& model, const Point& x, ActionId a, TrajectoryRng& rng,
                           const QuadratureConfig& quad = {});

/// Categorical draw from Q at the pre-jump point: Q(y, mode) when interior,
/// Q(y, boundary action) when on the boundary.
StateId sample_postjump(const PdmpModel& model, const Point& pre_jump, bool interior, ActionId action_or_mode,
                        TrajectoryRng& rng);

struct McEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
    std::size_t count = 0;
    /// Bound on |bias| from discount truncation; absent when costs are unbounded.
    std::optional<double> truncation_bias;
};

struct SimulationBudget {
    std::size_t trajectories = 100000;
    double eps_disc = 1e-8;
    std::uint64_t seed = 0;
    /// Safety cap on jumps per trajectory.
    std::size_t max_jumps = 10000000;
};

struct TrajectoryStep {
    std::size_t k = 0;
    double time = 0.0;
    StateId state = 0;
    ActionPair action;
    /// Whether the jump that led to this step was a boundary hit.
    bool boundary_hit = false;
};

struct TrajectorySample {
    std::vector<TrajectoryStep> steps;
    std::vector<double> costs;
    /// e^{-alpha T_K} at cutoff.
    double residual_discount = 0.0;
    std::size_t boundary_hits = 0;
};

/// Everything estimated from one batch of trajectories.
struct SimulationResult {
    /// D_0..D_n.
    std::vector<McEstimate> costs;
    /// Discounted visits per instance row.
    std::vector<McEstimate> occupation;
    /// Sum_k e^{-alpha T_k}.
    McEstimate total_mass;
    /// Jumps before cutoff per trajectory.
    McEstimate jump_count;
    /// Per state: mu~ - nu0 - G'mu, when an instance was supplied.
    std::vector<McEstimate> balance_residual;
    std::size_t truncated_by_jump_cap = 0;
};

/// Simulator for a fixed model, policy and initial law.
class Simulator {
public:
    /// `inst`, when given, must be the tabulation of `model`; it enables occupation
    /// and balance estimates indexed like its rows.
    Simulator(const PdmpModel& model, const StationaryPolicy& phi, const FiniteInstance* inst = nullptr,
              const QuadratureConfig& quad = {});

    /// One trajectory; `record` keeps its steps.
    TrajectorySample run(std::uint64_t seed, std::uint64_t index, double eps_disc, std::size_t max_jumps,
                         bool record = false) const;

    SimulationResult estimate(const SimulationBudget& budget) const;

    /// Truncation bias bound per cost, if the model declares cost bounds.
    std::vector<std::optional<double>> truncation_bounds(double eps_disc) const;

private:
    struct Stage;
    const Stage& stage(StateId j, ActionId a) const;
    void add_stage(StateId j, ActionId a);

    const PdmpModel& model_;
    const StationaryPolicy& phi_;
    const FiniteInstance* inst_;
    QuadratureConfig quad_;
    std::vector<double> nu0_cdf_;
    std::vector<std::vector<double>> policy_cdf_;
    std::vector<std::vector<std::pair<ActionId, std::shared_ptr<const Stage>>>> stages_;
    std::vector<std::size_t> row_offsets_;
};

std::vector<McEstimate> simulate_costs(const PdmpModel& model, const StationaryPolicy& phi,
                                       const SimulationBudget& budget, const QuadratureConfig& quad = {});

SimulationResult estimate_occupation(const PdmpModel& model, const StationaryPolicy& phi, const FiniteInstance& inst,
                                     const SimulationBudget& budget, const QuadratureConfig& quad = {});

/// CSV: traj_id,k,T_k,Z_k,theta_k,theta_partial_k,boundary_hit.
void write_trajectories_csv(std::ostream& out, const Simulator& sim, std::uint64_t seed, std::size_t count,
                            double eps_disc);

}  // namespace pdmp
