#include "pdmp/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "pdmp/errors.hpp"

namespace pdmp {

double StationaryPolicy::probability(StateId j, ActionPair pair) const {
    for (const auto& c : choices.at(j))
        if (c.pair == pair) return c.probability;
    return 0.0;
}

namespace {

std::vector<PolicyChoice> default_fill(const FiniteInstance& inst, std::size_t first, std::size_t last) {
    std::vector<PolicyChoice> out;
    std::size_t best = first;
    for (std::size_t r = first; r < last; ++r) {
        out.push_back({inst.rows[r].pair, 0.0});
        if (inst.rows[r].pair < inst.rows[best].pair) best = r;
    }
    out[best - first].probability = 1.0;
    return out;
}

}  // namespace

StationaryPolicy disintegrate(const OccupationMeasure& mu, const FiniteInstance& inst) {
    if (mu.weights.size() != inst.rows.size()) throw Incompatible("measure does not match the instance rows");
    const auto off = state_row_offsets(inst);
    StationaryPolicy phi;
    phi.choices.resize(inst.state_count);
    phi.provenance.resize(inst.state_count);
    for (std::size_t j = 0; j < inst.state_count; ++j) {
        double marginal = 0.0;
        for (std::size_t r = off[j]; r < off[j + 1]; ++r) marginal += std::max(mu.weights[r], 0.0);
        if (marginal <= kZeroMarginal) {
            phi.choices[j] = default_fill(inst, off[j], off[j + 1]);
            phi.provenance[j] = Provenance::DefaultFill;
            continue;
        }
        for (std::size_t r = off[j]; r < off[j + 1]; ++r)
            phi.choices[j].push_back({inst.rows[r].pair, std::max(mu.weights[r], 0.0) / marginal});
        phi.provenance[j] = Provenance::FromMeasure;
    }
    return phi;
}

StationaryPolicy deterministic_policy(const FiniteInstance& inst, const std::vector<ActionPair>& pairs) {
    if (pairs.size() != inst.state_count) throw Incompatible("one pair per state required");
    const auto off = state_row_offsets(inst);
    StationaryPolicy phi;
    phi.choices.resize(inst.state_count);
    phi.provenance.assign(inst.state_count, Provenance::FromMeasure);
    for (std::size_t j = 0; j < inst.state_count; ++j) {
        bool found = false;
        for (std::size_t r = off[j]; r < off[j + 1]; ++r) {
            const bool hit = inst.rows[r].pair == pairs[j];
            found = found || hit;
            phi.choices[j].push_back({inst.rows[r].pair, hit ? 1.0 : 0.0});
        }
        if (!found) throw Incompatible("pair not feasible at state " + std::to_string(j));
    }
    return phi;
}

void check_policy(const StationaryPolicy& phi, const FiniteInstance& inst, double tol) {
    if (phi.choices.size() != inst.state_count)
        throw Incompatible("policy has " + std::to_string(phi.choices.size()) + " states, instance has " +
                           std::to_string(inst.state_count));
    for (std::size_t j = 0; j < inst.state_count; ++j) {
        double total = 0.0;
        for (const auto& c : phi.choices[j]) {
            if (!find_row(inst, static_cast<StateId>(j), c.pair) && c.probability > 0.0)
                throw Incompatible("policy uses an infeasible pair at state " + std::to_string(j));
            if (!(c.probability >= 0.0)) throw Incompatible("negative probability at state " + std::to_string(j));
            total += c.probability;
        }
        if (std::abs(total - 1.0) > tol)
            throw Incompatible("policy probabilities at state " + std::to_string(j) + " sum to " +
                               std::to_string(total));
    }
}

PolicyEvaluation evaluate_policy_exact(const StationaryPolicy& phi, const FiniteInstance& inst) {
    check_policy(phi, inst);
    const auto s = static_cast<Eigen::Index>(inst.state_count);
    const std::size_t n = inst.cost_count();
    std::vector<double> row_prob(inst.rows.size(), 0.0);
    for (std::size_t r = 0; r < inst.rows.size(); ++r)
        row_prob[r] = phi.probability(inst.rows[r].state, inst.rows[r].pair);

    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(s, s);
    Eigen::MatrixXd stage = Eigen::MatrixXd::Zero(s, static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < inst.rows.size(); ++r) {
        const auto& row = inst.rows[r];
        if (row_prob[r] == 0.0) continue;
        for (const auto& e : row.kernel) g(row.state, e.state) += row_prob[r] * e.probability;
        for (std::size_t i = 0; i < n; ++i)
            stage(row.state, static_cast<Eigen::Index>(i)) += row_prob[r] * (row.running[i] + row.boundary[i]);
    }

    double radius = s > 0 ? g.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    if (radius >= 1.0 - 1e-9) radius = g.eigenvalues().cwiseAbs().maxCoeff();
    if (radius >= 1.0 - 1e-9)
        throw SeriesDivergence("spectral radius of G_phi is " + std::to_string(radius) + ", series diverges");

    Eigen::VectorXd nu0(s);
    for (Eigen::Index j = 0; j < s; ++j) nu0[j] = inst.nu0[j];
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(s, s) - g.transpose();
    const Eigen::VectorXd marginal = system.partialPivLu().solve(nu0);

    PolicyEvaluation out;
    out.marginal.assign(marginal.data(), marginal.data() + s);
    out.costs.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.costs[i] = marginal.dot(stage.col(static_cast<Eigen::Index>(i)));
    out.weights.resize(inst.rows.size());
    for (std::size_t r = 0; r < inst.rows.size(); ++r) out.weights[r] = marginal[inst.rows[r].state] * row_prob[r];
    return out;
}

}  // namespace pdmp
