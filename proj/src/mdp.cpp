#include "pdmp/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace pdmp {

std::vector<Violation> validate_mdp(const ConstrainedMdp& mdp, double tol) {
    std::vector<Violation> out;
    auto add = [&](std::string rule, std::string msg) { out.push_back({std::move(rule), std::move(msg)}); };
    if (mdp.initial.size() != mdp.state_count) add("initial", "initial law has wrong length");
    double mass = 0.0;
    for (double p : mdp.initial) {
        if (!(p >= 0.0)) add("initial", "negative initial probability");
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-9) add("initial", "initial law does not sum to 1");
    if (mdp.cemetery && *mdp.cemetery >= mdp.state_count) add("cemetery", "cemetery state out of range");

    std::vector<char> has_action(mdp.state_count, 0);
    StateId prev = 0;
    for (std::size_t k = 0; k < mdp.rows.size(); ++k) {
        const auto& row = mdp.rows[k];
        const auto where = " in row " + std::to_string(k);
        if (row.state >= mdp.state_count) {
            add("state", "state out of range" + where);
            continue;
        }
        if (k > 0 && row.state < prev) add("layout", "rows not ordered by state" + where);
        prev = row.state;
        has_action[row.state] = 1;
        double total = 0.0;
        for (const auto& e : row.transition) {
            if (e.state >= mdp.state_count) add("T", "transition target out of range" + where);
            if (!(e.probability >= 0.0)) add("T", "negative transition probability" + where);
            total += e.probability;
        }
        if (std::abs(total - 1.0) > tol) add("T", "transition row sums to " + std::to_string(total) + where);
        if (row.costs.size() != mdp.cost_count()) add("costs", "wrong number of costs" + where);
        for (double c : row.costs)
            if (!(c >= 0.0) || !std::isfinite(c)) add("costs", "negative or non-finite cost" + where);
    }
    for (std::size_t x = 0; x < mdp.state_count; ++x)
        if (!has_action[x]) add("actions", "state " + std::to_string(x) + " has no admissible action");
    return out;
}

ConstrainedMdp augment_delta(const FiniteInstance& inst) {
    ConstrainedMdp mdp;
    const auto delta = static_cast<StateId>(inst.state_count);
    const std::size_t n = inst.cost_count();
    mdp.state_count = inst.state_count + 1;
    mdp.cemetery = delta;
    mdp.limits = inst.limits;
    mdp.limits.push_back(0.0);
    mdp.initial = inst.nu0;
    mdp.initial.push_back(0.0);
    for (std::size_t j = 0; j < inst.state_count; ++j) mdp.state_names.push_back(std::to_string(j));
    mdp.state_names.push_back("DELTA");

    for (const auto& row : inst.rows) {
        MdpRow r;
        r.state = row.state;
        r.action = row.pair;
        r.transition = row.kernel;
        const double lost = 1.0 - total_mass(row.kernel);
        if (lost > 0.0) r.transition.push_back({delta, lost});
        r.costs.resize(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) r.costs[i] = row.running[i] + row.boundary[i];
        mdp.rows.push_back(std::move(r));
    }
    MdpRow self;
    self.state = delta;
    self.transition = {{delta, 1.0}};
    self.costs.assign(n + 1, 0.0);
    self.costs[n] = 1.0;
    mdp.rows.push_back(std::move(self));
    return mdp;
}

LinearProgram assemble_total_cost_lp(const ConstrainedMdp& mdp) {
    const auto violations = validate_mdp(mdp);
    if (!violations.empty()) {
        std::string msg = "invalid MDP:";
        for (const auto& v : violations) msg += "\n  [" + v.rule + "] " + v.message;
        throw std::invalid_argument(msg);
    }
    const auto cols = static_cast<Eigen::Index>(mdp.rows.size());
    const auto s = static_cast<Eigen::Index>(mdp.state_count);
    const auto q = static_cast<Eigen::Index>(mdp.limits.size());
    auto state_name = [&](StateId x) {
        if (mdp.cemetery && x == *mdp.cemetery) return std::string("DELTA");
        return std::to_string(x);
    };

    LinearProgram lp;
    lp.objective.resize(cols);
    lp.eq_matrix = Eigen::MatrixXd::Zero(s, cols);
    lp.eq_rhs.resize(s);
    lp.in_matrix = Eigen::MatrixXd::Zero(q, cols);
    lp.in_rhs.resize(q);
    for (Eigen::Index k = 0; k < cols; ++k) {
        const auto& row = mdp.rows[k];
        lp.objective[k] = row.costs[0];
        lp.eq_matrix(row.state, k) += 1.0;
        for (const auto& e : row.transition)
            if (!(mdp.cemetery && e.state == *mdp.cemetery)) lp.eq_matrix(e.state, k) -= e.probability;
        for (Eigen::Index i = 0; i < q; ++i) lp.in_matrix(i, k) = row.costs[i + 1];
        if (mdp.cemetery && row.state == *mdp.cemetery)
            lp.column_names.push_back("mu_DELTA");
        else
            lp.column_names.push_back("mu_" + state_name(row.state) + "_" + std::to_string(row.action.interior) + "_" +
                                      std::to_string(row.action.boundary));
    }
    for (Eigen::Index x = 0; x < s; ++x) {
        lp.eq_rhs[x] = mdp.initial[x];
        lp.eq_names.push_back("bal_" + state_name(static_cast<StateId>(x)));
    }
    for (Eigen::Index i = 0; i < q; ++i) {
        lp.in_rhs[i] = mdp.limits[i];
        lp.in_names.push_back("con_" + std::to_string(i + 1));
    }
    return lp;
}

TotalCostSolution solve_total_cost_lp(const ConstrainedMdp& mdp, const SimplexOptions& options) {
    TotalCostSolution out;
    out.lp = simplex_solve(assemble_total_cost_lp(mdp), options);
    if (out.lp.status == LpStatus::Optimal)
        out.occupation.assign(out.lp.primal.data(), out.lp.primal.data() + out.lp.primal.size());
    return out;
}

}  // namespace pdmp
