#pragma once

#include <cstddef>
#include <cstdint>
#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace pdmp {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;
/// Value of the control parametrization ell(x, a, t); indexes the rate/kernel modes.
using ModeId = std::uint32_t;

/// A location in E or on its boundary. Flows are closed-form maps, so points stay small.
using Point = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, 6, 1>;

/// (interior action, boundary action) chosen after a jump.
struct ActionPair {
    ActionId interior = 0;
    ActionId boundary = 0;

    auto operator<=>(const ActionPair&) const = default;
};

/// Feasible interior actions U(z_j) and boundary actions U(phi(z_j, t*(z_j))) of one state.
struct StateActions {
    std::vector<ActionId> interior;
    std::vector<ActionId> boundary;
};

using FeasibleActionSets = std::vector<StateActions>;

struct SparseEntry {
    StateId state = 0;
    double probability = 0.0;

    bool operator==(const SparseEntry&) const = default;
};

/// Sub-probability vector over post-jump states, sorted by state, no duplicates.
using SparseDistribution = std::vector<SparseEntry>;

double total_mass(const SparseDistribution& d);
double mass_at(const SparseDistribution& d, StateId state);
/// Sorts by state and merges duplicate entries.
void normalize_layout(SparseDistribution& d);

/// One row (z_j, u_kappa, u_iota) of the tabulated problem.
struct InstanceRow {
    StateId state = 0;
    ActionPair pair;
    /// G(z_j, pair; {z_k}) for every reachable k.
    SparseDistribution kernel;
    /// L f_i (z_j, pair), i = 0..n.
    std::vector<double> running;
    /// H r_i (z_j, pair), i = 0..n.
    std::vector<double> boundary;
    /// L 1, the expected discounted time until the next jump.
    double sojourn = 0.0;
    /// H 1, the discounted probability of reaching the boundary first.
    double boundary_weight = 0.0;
    /// Quadrature error bound achieved when the row was tabulated (0 for exact data).
    double quad_error = 0.0;
};

/// The finite occupation-measure problem: every quantity the linear program needs.
struct FiniteInstance {
    std::size_t state_count = 0;
    std::size_t action_count = 0;
    FeasibleActionSets feasible;
    double alpha = 1.0;
    /// Ordered by state, then interior action, then boundary action, following `feasible`.
    std::vector<InstanceRow> rows;
    std::vector<double> nu0;
    /// d_1..d_n.
    std::vector<double> limits;

    std::size_t cost_count() const { return limits.size() + 1; }
};

/// Offsets such that rows of state j are rows[off[j]..off[j+1]). Requires rows sorted by state.
std::vector<std::size_t> state_row_offsets(const FiniteInstance& inst);

/// Index of the row for (state, pair), if present.
std::optional<std::size_t> find_row(const FiniteInstance& inst, StateId state, ActionPair pair);

/// Rows for the full product of feasible sets, in canonical order, with empty data.
std::vector<InstanceRow> make_row_skeleton(const FeasibleActionSets& feasible, std::size_t cost_count);

struct Violation {
    std::string rule;
    std::string message;
};

/// Returns every broken structural invariant. Empty means the instance is well formed.
std::vector<Violation> validate_instance(const FiniteInstance& inst, double tolerance = 1e-8);

/// Result of one jump: the enumerated post-jump state, its probability, and the exact
/// landing point before projection onto the enumerated set.
struct JumpOutcome {
    StateId state = 0;
    double probability = 0.0;
    Point target;
};

/// Behavioral description of a controlled PDMP with finitely many post-jump points.
///
/// All callbacks must be pure and reentrant; tabulation and simulation call them
/// from several threads.
class PdmpModel {
public:
    virtual ~PdmpModel() = default;

    virtual std::size_t state_count() const = 0;
    virtual std::size_t action_count() const = 0;
    virtual Point state_point(StateId j) const = 0;
    virtual const StateActions& actions(StateId j) const = 0;
    /// n + 1: the objective plus n constraints.
    virtual std::size_t cost_count() const = 0;
    virtual double discount() const = 0;
    virtual std::vector<double> initial_distribution() const = 0;
    virtual std::vector<double> limits() const = 0;

    virtual Point flow(const Point& x, double t) const = 0;
    /// t*(x); +infinity when the flow never reaches the boundary.
    virtual double exit_time(const Point& x) const = 0;
    virtual double rate(const Point& x, ModeId mode) const = 0;
    /// ell(x, a, t).
    virtual ModeId control(const Point& x, ActionId a, double t) const = 0;
    virtual std::vector<JumpOutcome> interior_jump(const Point& x, ModeId mode) const = 0;
    virtual std::vector<JumpOutcome> boundary_jump(const Point& z, ActionId a) const = 0;
    virtual double running_cost(std::size_t i, const Point& x, ActionId a) const = 0;
    virtual double boundary_cost(std::size_t i, const Point& z, ActionId a) const = 0;

    /// Times in (0, t*(x)) where ell(x, a, .) or the interior kernel changes discontinuously.
    virtual std::vector<double> breakpoints(const Point& x, ActionId a) const;
    /// Positive lower bound on the rate at x. When t*(x) is infinite the bound must also
    /// hold at every later point of the flow from x.
    virtual std::optional<double> rate_lower_bound(const Point& x) const;
    virtual std::optional<double> rate_upper_bound(const Point& x) const;
    /// K_lambda, if the model declares one.
    virtual std::optional<double> sojourn_bound() const;
    virtual std::optional<double> running_cost_bound(std::size_t i) const;
    virtual std::optional<double> boundary_cost_bound(std::size_t i) const;
    /// Human-readable label of a state, used in reports.
    virtual std::string state_label(StateId j) const;
};

}  // namespace pdmp
