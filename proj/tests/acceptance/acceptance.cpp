// Acceptance gate: one line per criterion, exit status 0 only when every criterion passes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/assumptions.hpp"
#include "pdmp/capacity.hpp"
#include "pdmp/cli.hpp"
#include "pdmp/io.hpp"
#include "pdmp/lp.hpp"
#include "pdmp/mdp.hpp"
#include "pdmp/operators.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/realization.hpp"
#include "pdmp/simulator.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace pdmp;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

const CapacityModel& capacity_model() {
    static const CapacityModel model(testing::capacity_fixture());
    return model;
}

const FiniteInstance& capacity_instance() {
    static const FiniteInstance inst = tabulate(capacity_model());
    return inst;
}

std::vector<std::pair<StateId, ActionPair>> random_capacity_rows(std::size_t count, std::uint64_t seed) {
    const auto& model = capacity_model();
    std::mt19937_64 rng(seed);
    std::vector<std::pair<StateId, ActionPair>> out;
    while (out.size() < count) {
        const auto j = static_cast<StateId>(std::uniform_int_distribution<std::size_t>(0, model.state_count() - 1)(rng));
        const auto& acts = model.actions(j);
        const auto a = acts.interior[std::uniform_int_distribution<std::size_t>(0, acts.interior.size() - 1)(rng)];
        const auto b = acts.boundary[std::uniform_int_distribution<std::size_t>(0, acts.boundary.size() - 1)(rng)];
        out.push_back({j, {a, b}});
    }
    return out;
}

Outcome operator_identities() {
    const auto& model = capacity_model();
    double worst_g = 0.0;
    double worst_h = 0.0;
    for (const auto& [j, pair] : random_capacity_rows(200, 1)) {
        const auto row = evaluate_row(model, model.state_point(j), pair);
        worst_g = std::max(worst_g, std::abs(total_mass(row.kernel) + model.discount() * row.sojourn - 1.0));
        worst_h = std::max(worst_h, std::abs(row.rate_plus_discount + row.boundary_weight - 1.0));
    }
    return {worst_g <= 1e-8 && worst_h <= 1e-8,
            "max |G(E)+a*calL-1| = " + fmt(worst_g) + ", max |L(l+a)+calH-1| = " + fmt(worst_h)};
}

Outcome closed_form_rows() {
    const auto& model = capacity_model();
    double worst = 0.0;
    for (const auto& [j, pair] : random_capacity_rows(100, 2)) {
        const auto q = evaluate_row(model, model.state_point(j), pair);
        const auto c = closed_form_G(model, j, pair);
        for (const auto& e : c.kernel) worst = std::max(worst, std::abs(mass_at(q.kernel, e.state) - e.probability));
        for (const auto& e : q.kernel) worst = std::max(worst, std::abs(mass_at(c.kernel, e.state) - e.probability));
        for (std::size_t i = 0; i < c.running.size(); ++i) {
            worst = std::max(worst, std::abs(q.running[i] - c.running[i]));
            worst = std::max(worst, std::abs(q.boundary[i] - c.boundary[i]));
        }
        worst = std::max(worst, std::abs(q.sojourn - c.sojourn));
        worst = std::max(worst, std::abs(q.boundary_weight - c.boundary_weight));
    }
    return {worst <= 1e-9, "max entrywise discrepancy " + fmt(worst)};
}

Outcome cycle_anchor() {
    const auto sol = solve_constrained_pdmp(testing::two_state_cycle());
    if (sol.lp.status != LpStatus::Optimal) return {false, to_string(sol.lp.status)};
    // Geometric series: mu0 = sum_k 4^-k = 4/3, mu1 = mu0 / 2, value = c / alpha = 1.
    const double e_value = std::abs(sol.lp.objective - 1.0);
    const double e_mass =
        std::max(std::abs(sol.measure.marginal[0] - 4.0 / 3.0), std::abs(sol.measure.marginal[1] - 2.0 / 3.0));
    return {e_value <= 1e-9 && e_mass <= 1e-9, "|value-1| = " + fmt(e_value) + ", mass error " + fmt(e_mass)};
}

std::vector<FiniteInstance> random_instances() {
    std::mt19937_64 rng(2024);
    std::vector<FiniteInstance> out;
    for (int k = 0; k < 20; ++k) out.push_back(testing::random_instance(rng, {}));
    return out;
}

Outcome round_trip() {
    double worst_gap = 0.0;
    double worst_excess = -1.0;
    for (const auto& inst : random_instances()) {
        const auto sol = solve_constrained_pdmp(inst);
        if (sol.lp.status != LpStatus::Optimal) return {false, std::string("LP ") + to_string(sol.lp.status)};
        const auto eval = evaluate_policy_exact(disintegrate(sol.measure, inst), inst);
        worst_gap = std::max(worst_gap, std::abs(eval.costs[0] - sol.lp.objective));
        for (std::size_t i = 0; i < inst.limits.size(); ++i)
            worst_excess = std::max(worst_excess, eval.costs[i + 1] - inst.limits[i]);
    }
    return {worst_gap <= 1e-7 && worst_excess <= 1e-7,
            "max value gap " + fmt(worst_gap) + ", max D_i - d_i " + fmt(worst_excess)};
}

Outcome delta_equivalence() {
    double worst = 0.0;
    for (const auto& inst : random_instances()) {
        const auto direct = solve_constrained_pdmp(inst);
        const auto augmented = solve_total_cost_lp(augment_delta(inst));
        if (direct.lp.status != LpStatus::Optimal || augmented.lp.status != LpStatus::Optimal)
            return {false, "non-optimal LP"};
        worst = std::max(worst, std::abs(direct.lp.objective - augmented.lp.objective));
    }
    return {worst <= 1e-7, "max |direct - augmented| = " + fmt(worst)};
}

Outcome brute_force() {
    std::mt19937_64 rng(77);
    double worst_excess = -1.0;
    double worst_unconstrained = 0.0;
    for (int k = 0; k < 10; ++k) {
        testing::RandomShape shape;
        shape.max_states = 3;
        shape.max_pairs = 3;
        shape.constraints = k < 5 ? 0 : 1 + k % 2;
        const auto inst = testing::random_instance(rng, shape);
        const auto oracle = testing::brute_force_best(inst);
        const auto sol = solve_constrained_pdmp(inst);
        if (!oracle.best || sol.lp.status != LpStatus::Optimal) return {false, "no feasible policy"};
        worst_excess = std::max(worst_excess, sol.lp.objective - *oracle.best);
        if (inst.limits.empty()) worst_unconstrained = std::max(worst_unconstrained, std::abs(sol.lp.objective - *oracle.best));
    }
    return {worst_excess <= 1e-9 && worst_unconstrained <= 1e-9,
            "max LP - best deterministic " + fmt(worst_excess) + ", unconstrained gap " + fmt(worst_unconstrained)};
}

struct ZTable {
    double worst = 0.0;
    std::string where;
    std::size_t count = 0;
    std::size_t over = 0;
    /// Largest LP mass among balance rows with |z| > 3.
    double over_mass = 0.0;

    /// |LP - MC| / SE after removing the deterministic truncation bias bound.
    void add(const std::string& name, double reference, const McEstimate& e, double bias, double mass = 0.0) {
        const double excess = std::max(0.0, std::abs(e.mean - reference) - bias);
        const double z = e.standard_error > 0.0 ? excess / e.standard_error
                         : excess <= 1e-12      ? 0.0
                                                : std::numeric_limits<double>::infinity();
        ++count;
        if (!(z <= 3.0)) {
            ++over;
            over_mass = std::max(over_mass, mass);
        }
        if (!(z <= worst)) {
            worst = z;
            where = name;
        }
    }
};

void mc_against_lp(const PdmpModel& model, const FiniteInstance& inst, const std::string& label, ZTable& table) {
    const auto sol = solve_constrained_pdmp(inst);
    const auto phi = disintegrate(sol.measure, inst);
    SimulationBudget budget;
    budget.trajectories = 100000;
    budget.seed = 0;
    const auto est = Simulator(model, phi, &inst).estimate(budget);
    for (std::size_t i = 0; i < inst.cost_count(); ++i)
        table.add(label + " D_" + std::to_string(i), sol.attained[i], est.costs[i], est.costs[i].truncation_bias.value_or(0.0));
    table.add(label + " mass", sol.measure.total_mass(), est.total_mass, est.total_mass.truncation_bias.value_or(0.0));
    for (std::size_t j = 0; j < est.balance_residual.size(); ++j)
        table.add(label + " balance z" + std::to_string(j), 0.0, est.balance_residual[j], budget.eps_disc,
                  sol.measure.marginal[j]);
}

Outcome monte_carlo() {
    ZTable table;
    const auto cycle = testing::two_state_cycle();
    mc_against_lp(ConstantRateModel(cycle), cycle, "cycle", table);
    mc_against_lp(capacity_model(), capacity_instance(), "capacity", table);
    std::string detail = "max |z| = " + fmt(table.worst) + " (" + table.where + "), " + std::to_string(table.over) +
                         " of " + std::to_string(table.count) + " quantities above 3";
    if (table.over > 0) detail += ", largest LP state mass among them " + fmt(table.over_mass);
    return {table.worst <= 3.0, detail};
}

Outcome survival_law() {
    testing::RampModel ramp;
    const auto& cap = capacity_model();
    struct ProbeCase {
        const PdmpModel* model;
        StateId state;
        ActionId action;
    };
    const std::vector<ProbeCase> cases{
        {&ramp, 0, 0},
        {&ramp, 1, 1},
        {&ramp, 2, 0},
        {&cap, cap.state_id(0, 2, 1), cap.actions(cap.state_id(0, 2, 1)).interior.back()},
        {&cap, cap.state_id(3, 1, 2), cap.actions(cap.state_id(3, 1, 2)).interior.front()},
    };
    constexpr std::size_t n = 100000;
    double worst = 0.0;
    for (std::size_t c = 0; c < cases.size(); ++c) {
        const auto& pc = cases[c];
        const Point x = pc.model->state_point(pc.state);
        const double t_star = pc.model->exit_time(x);
        const RateProfile profile(*pc.model, x, pc.action, integration_horizon(*pc.model, x, {}), {});
        TrajectoryRng rng(c, 0);
        std::vector<double> samples(n);
        for (auto& s : samples) s = sample_interjump(*pc.model, profile, rng).time;
        std::function<double(double)> lambda;
        if (pc.model == &ramp) {
            const double x0 = x[0];
            const ActionId a = pc.action;
            lambda = [x0, a](double t) { return testing::RampModel::cumulative(x0, a, t); };
        } else {
            const double rate = cap.params().lambda;
            lambda = [rate](double t) { return rate * t; };
        }
        auto left = [&](double t) { return -std::expm1(-lambda(std::min(t, t_star))); };
        auto right = [&](double t) { return t >= t_star ? 1.0 : left(t); };
        const double d = testing::ks_statistic(samples, right, left) * std::sqrt(static_cast<double>(n));
        worst = std::max(worst, d);
    }
    return {worst <= testing::kKsCritical01, "max sqrt(n) D = " + fmt(worst) + " vs " + fmt(testing::kKsCritical01)};
}

Outcome growth_certificate() {
    const auto& p = capacity_model().params();
    const auto probes = make_probes(capacity_model());
    const auto good = check_growth(capacity_model(), capacity_certificate(p, 0.7), probes);
    const auto bad = check_growth(capacity_model(), capacity_certificate(p, 0.5), probes);
    const double ap = alpha_prime(p);
    const double reduced = bad.boundary.min_margin * (1.0 + ap * 0.5) / p.alpha;
    const double expected = -ap / 4.0;
    const auto sol = solve_constrained_pdmp(capacity_instance());
    std::vector<Point> points;
    for (StateId j = 0; j < capacity_model().state_count(); ++j) points.push_back(capacity_model().state_point(j));
    const auto mass = mass_bound(capacity_certificate(p, 0.7), capacity_instance(), points, sol.measure);
    const bool pass = good.pass && !bad.pass && std::abs(reduced - expected) <= 1e-6 && mass.pass;
    return {pass, std::string("rho=0.7 ") + (good.pass ? "passes" : "fails") + ", rho=0.5 " +
                      (bad.pass ? "passes" : "fails") + " with g margin " + fmt(reduced) + " (g(1/2) = " +
                      fmt(expected) + "), mass " + fmt(mass.mass) + " <= " + fmt(mass.bound)};
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "pdmp_acceptance_determinism";
    fs::remove_all(root);
    const std::string instance = (fs::path(PDMP_FIXTURE_DIR) / "capacity.json").string();
    std::string reports[2];
    for (int k = 0; k < 2; ++k) {
        const std::string dir = (root / std::to_string(k)).string();
        const char* argv[] = {"pdmp", "solve", instance.c_str(), "--seed", "0", "--n-traj", "100000", "--out-dir",
                              dir.c_str()};
        std::ostringstream out;
        std::ostringstream err;
        if (run_cli(9, argv, out, err) != 0) return {false, "solve failed: " + err.str()};
        std::ifstream in(root / std::to_string(k) / "report.json", std::ios::binary);
        reports[k].assign(std::istreambuf_iterator<char>(in), {});
    }
    fs::remove_all(root);
    const bool same = !reports[0].empty() && reports[0] == reports[1];
    return {same, same ? "report.json identical (" + std::to_string(reports[0].size()) + " bytes)" : "reports differ"};
}

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "operator identities", 10.0, operator_identities},
        {2, "closed form vs quadrature", 10.0, closed_form_rows},
        {3, "two-state cycle anchor", 1.0, cycle_anchor},
        {4, "policy round trip", 30.0, round_trip},
        {5, "cemetery augmentation", 30.0, delta_equivalence},
        {6, "brute-force oracle", 10.0, brute_force},
        {7, "Monte Carlo consistency", 120.0, monte_carlo},
        {8, "survival law", 60.0, survival_law},
        {9, "growth certificate", 10.0, growth_certificate},
        {10, "determinism", 240.0, determinism},
    };
    // Shared fixtures are built once up front so their cost is not charged to one criterion.
    const auto setup_start = std::chrono::steady_clock::now();
    (void)capacity_instance();
    const double setup = std::chrono::duration<double>(std::chrono::steady_clock::now() - setup_start).count();
    std::cout << "setup: capacity fixture tabulated in " << fmt(setup) << " s\n";

    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = seconds <= c.budget_seconds;
        const bool pass = outcome.pass && in_time;
        if (!pass) ++failures;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << outcome.detail
                  << "; " << fmt(seconds) << " s" << (in_time ? "" : " exceeds " + fmt(c.budget_seconds) + " s")
                  << "\n"
                  << std::flush;
    }
    std::cout << (failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria failed") << "\n";
    return failures == 0 ? 0 : 1;
}
