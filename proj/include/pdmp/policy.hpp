#pragma once

#include <vector>

#include "pdmp/lp.hpp"
#include "pdmp/model.hpp"

namespace pdmp {

enum class Provenance { FromMeasure, DefaultFill };

struct PolicyChoice {
    ActionPair pair;
    double probability = 0.0;
};

/// Randomized stationary strategy: per state, a distribution over its feasible pairs.
struct StationaryPolicy {
    std::vector<std::vector<PolicyChoice>> choices;
    std::vector<Provenance> provenance;

    std::size_t state_count() const { return choices.size(); }
    double probability(StateId j, ActionPair pair) const;
};

/// Marginals at or below this are treated as unreached.
inline constexpr double kZeroMarginal = 1e-12;

/// phi(z_j; pair) = mu_{j,pair} / mu~_j; unreached states get a point mass on their
/// lexicographically smallest pair.
StationaryPolicy disintegrate(const OccupationMeasure& mu, const FiniteInstance& inst);

/// Point mass on one pair per state.
StationaryPolicy deterministic_policy(const FiniteInstance& inst, const std::vector<ActionPair>& pairs);

/// Throws Incompatible when the policy does not fit the instance's action sets.
void check_policy(const StationaryPolicy& phi, const FiniteInstance& inst, double tolerance = 1e-9);

struct PolicyEvaluation {
    /// D_0..D_n.
    std::vector<double> costs;
    /// mu~ = nu0 (I - G_phi)^{-1}.
    std::vector<double> marginal;
    /// mu_{j,pair} = mu~_j phi(z_j; pair), indexed like the instance rows.
    std::vector<double> weights;
};

/// Solves (I - G_phi') mu~ = nu0 and prices each cost. Throws SeriesDivergence when
/// the spectral radius of G_phi is at least 1 - 1e-9.
PolicyEvaluation evaluate_policy_exact(const StationaryPolicy& phi, const FiniteInstance& inst);

}  // namespace pdmp
