#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdmp/lp.hpp"
#include "pdmp/model.hpp"

namespace pdmp {

/// One admissible (state, action) of a constrained MDP.
struct MdpRow {
    StateId state = 0;
    ActionPair action;
    /// Stochastic transition row, sorted by state.
    SparseDistribution transition;
    /// C_0..C_q.
    std::vector<double> costs;
};

/// Constrained total-cost MDP with state-dependent action sets.
struct ConstrainedMdp {
    std::size_t state_count = 0;
    /// Rows ordered by state; the actions of state x are A(x).
    std::vector<MdpRow> rows;
    /// R_1..R_q.
    std::vector<double> limits;
    std::vector<double> initial;
    /// Absorbing cemetery: mass entering it leaves the model, so its balance row
    /// only fixes its own weight to the initial mass placed there.
    std::optional<StateId> cemetery;
    std::vector<std::string> state_names;

    std::size_t cost_count() const { return limits.size() + 1; }
};

/// Returns every broken invariant (stochastic rows, nonnegative costs, layout).
std::vector<Violation> validate_mdp(const ConstrainedMdp& mdp, double tolerance = 1e-12);

/// States z_1..z_s plus the cemetery Delta, T = G on E and T(.; Delta) = 1 - G(.; E),
/// costs C_i = Lf_i + Hr_i, and the extra cost I_{(Delta,Delta)} with limit 0.
ConstrainedMdp augment_delta(const FiniteInstance& inst);

LinearProgram assemble_total_cost_lp(const ConstrainedMdp& mdp);

struct TotalCostSolution {
    LpSolution lp;
    /// gamma per MDP row.
    std::vector<double> occupation;
};

TotalCostSolution solve_total_cost_lp(const ConstrainedMdp& mdp, const SimplexOptions& options = {});

}  // namespace pdmp
