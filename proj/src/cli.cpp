#include "pdmp/cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "pdmp/assumptions.hpp"
#include "pdmp/capacity.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/io.hpp"
#include "pdmp/lp.hpp"
#include "pdmp/mdp.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/simulator.hpp"

namespace pdmp {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitUnbounded = 3;
constexpr int kExitCheckFailed = 4;

struct CommonFlags {
    std::uint64_t seed = 0;
    std::size_t n_traj = 0;
    double eps_disc = 1e-8;
    double quad_tol = 1e-10;
    std::string out_dir = ".";
};

QuadratureConfig quad_config(const CommonFlags& f) {
    QuadratureConfig q;
    q.abs_tol = f.quad_tol;
    q.rel_tol = f.quad_tol;
    q.validate();
    return q;
}

/// Wall-clock bookkeeping kept out of the deterministic reports.
class Timings {
public:
    void start(const std::string& name) { begin_[name] = Clock::now(); }
    void stop(const std::string& name) {
        seconds_[name] = std::chrono::duration<double>(Clock::now() - begin_[name]).count();
    }

    void write(const fs::path& path, const std::string& command) const {
        Json j;
        j["command"] = command;
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        j["finished_at"] = stamp;
        Json t = Json::object();
        for (const auto& [k, v] : seconds_) t[k] = v;
        j["seconds"] = t;
        write_text_file(path, dump_json(j));
    }

private:
    using Clock = std::chrono::steady_clock;
    std::map<std::string, Clock::time_point> begin_;
    std::map<std::string, double> seconds_;
};

Json header(const std::string& command, const LoadedInstance& loaded, const CommonFlags& flags) {
    Json j;
    j["schema"] = kReportSchema;
    j["tool"] = "pdmp";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["seed"] = flags.seed;
    Json inst;
    inst["kind"] = to_string(loaded.kind);
    inst["digest"] = loaded.digest;
    inst["states"] = loaded.instance.state_count;
    inst["rows"] = loaded.instance.rows.size();
    inst["alpha"] = loaded.instance.alpha;
    inst["constraints"] = loaded.instance.limits.size();
    double max_quad_error = 0.0;
    for (const auto& r : loaded.instance.rows) max_quad_error = std::max(max_quad_error, r.quad_error);
    inst["max_quad_error"] = max_quad_error;
    inst["quad_tol"] = flags.quad_tol;
    j["instance"] = inst;
    if (loaded.capacity) {
        const auto* model = dynamic_cast<const CapacityModel*>(loaded.model.get());
        Json dev = Json::array();
        dev.push_back("demand truncated at " + std::to_string(loaded.capacity->demand_cap) +
                      "; arrivals at the cap keep the demand at the cap");
        dev.push_back("completion at zero demand keeps the demand at zero");
        dev.push_back("investment thresholds restricted to a grid of " + std::to_string(loaded.capacity->sa_grid) +
                      " points per state; landings snapped to the investment grid");
        j["deviations"] = dev;
        if (model) {
            j["investment_grid"] = model->grid();
            j["max_snap_distance"] = model->max_snap_distance();
        }
    }
    return j;
}

/// Standardized gap after discounting the known truncation bias; infinite when an
/// exact estimate misses the reference.
double z_score(double mc, double reference, double se, double bias) {
    const double diff = mc - reference;
    const double excess = std::max(0.0, std::abs(diff) - bias);
    if (se > 0.0) return std::copysign(excess / se, diff);
    return excess <= 1e-12 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
}

Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

/// MC cross-check of a policy against its exact evaluation on the tabulated instance.
struct McCheck {
    Json table;
    bool pass = true;
};

McCheck mc_check(const LoadedInstance& loaded, const StationaryPolicy& phi, const CommonFlags& flags,
                 const QuadratureConfig& quad) {
    if (!loaded.model) throw Incompatible("instance cannot be simulated: " + loaded.model_note);
    const auto exact = evaluate_policy_exact(phi, loaded.instance);
    SimulationBudget budget;
    budget.trajectories = flags.n_traj;
    budget.eps_disc = flags.eps_disc;
    budget.seed = flags.seed;
    Simulator sim(*loaded.model, phi, &loaded.instance, quad);
    const auto est = sim.estimate(budget);

    McCheck out;
    Json rows = Json::array();
    // Only cost rows decide the verdict; mass and balance rows are diagnostics.
    auto add = [&](const std::string& name, double reference, const McEstimate& e, bool decides) {
        const double z = z_score(e.mean, reference, e.standard_error, e.truncation_bias.value_or(0.0));
        const bool ok = std::abs(z) <= 3.0;
        if (decides) out.pass = out.pass && ok;
        Json r;
        r["quantity"] = name;
        r["reference"] = reference;
        r["mc_mean"] = e.mean;
        r["se"] = e.standard_error;
        r["z"] = number_or_null(z);
        if (e.truncation_bias) r["truncation_bias_bound"] = *e.truncation_bias;
        r["pass"] = ok;
        rows.push_back(r);
    };
    for (std::size_t i = 0; i < exact.costs.size(); ++i) add("D_" + std::to_string(i), exact.costs[i], est.costs[i], true);
    double mass = 0.0;
    for (double m : exact.marginal) mass += m;
    add("total_mass", mass, est.total_mass, false);

    double worst = 0.0;
    std::size_t worst_state = 0;
    for (std::size_t j = 0; j < est.balance_residual.size(); ++j) {
        const auto& e = est.balance_residual[j];
        const double z = z_score(e.mean, 0.0, e.standard_error, flags.eps_disc);
        if (!(std::abs(z) <= std::abs(worst))) {
            worst = z;
            worst_state = j;
        }
    }
    const bool balance_ok = std::abs(worst) <= 3.0;

    out.table["trajectories"] = flags.n_traj;
    out.table["eps_disc"] = flags.eps_disc;
    out.table["rows"] = rows;
    out.table["balance"] = {{"states", est.balance_residual.size()},
                            {"max_abs_z", number_or_null(std::abs(worst))},
                            {"argmax_state", worst_state},
                            {"pass", balance_ok}};
    out.table["mean_jumps_before_cutoff"] = est.jump_count.mean;
    out.table["trajectories_hitting_jump_cap"] = est.truncated_by_jump_cap;
    out.table["pass"] = out.pass;
    return out;
}

Json policy_summary(const StationaryPolicy& phi) {
    std::size_t from_measure = 0;
    std::size_t randomized = 0;
    for (std::size_t j = 0; j < phi.state_count(); ++j) {
        if (phi.provenance[j] == Provenance::FromMeasure) ++from_measure;
        std::size_t support = 0;
        for (const auto& c : phi.choices[j])
            if (c.probability > 0.0) ++support;
        if (support > 1) ++randomized;
    }
    return {{"states", phi.state_count()},
            {"from_measure", from_measure},
            {"default_filled", phi.state_count() - from_measure},
            {"randomized_states", randomized}};
}

int cmd_solve(const std::string& path, const CommonFlags& flags, std::ostream& out) {
    Timings timings;
    timings.start("total");
    const auto quad = quad_config(flags);
    timings.start("load");
    const auto loaded = load_instance_file(path, quad);
    timings.stop("load");
    const auto& inst = loaded.instance;

    timings.start("lp");
    const auto sol = solve_constrained_pdmp(inst);
    timings.stop("lp");

    Json report = header("solve", loaded, flags);
    Json lp;
    lp["status"] = to_string(sol.lp.status);
    lp["iterations"] = sol.lp.iterations;
    lp["bland_used"] = sol.lp.bland_used;
    const fs::path dir(flags.out_dir);
    int code = kExitOk;
    if (sol.lp.status == LpStatus::Optimal) {
        lp["objective"] = sol.lp.objective;
        lp["primal_residual"] = sol.lp.primal_residual;
        lp["dual_residual"] = sol.lp.dual_residual;
        lp["complementarity"] = sol.lp.complementarity;
        double worst_balance = 0.0;
        for (double r : sol.balance_residual) worst_balance = std::max(worst_balance, std::abs(r));
        lp["max_balance_residual"] = worst_balance;
        lp["total_mass"] = sol.measure.total_mass();
        report["lp"] = lp;

        Json cons = Json::array();
        for (std::size_t i = 0; i < inst.limits.size(); ++i) {
            const double attained = sol.attained[i + 1];
            cons.push_back({{"index", i + 1},
                            {"attained", attained},
                            {"limit", inst.limits[i]},
                            {"binding", std::abs(attained - inst.limits[i]) <= 1e-7}});
        }
        report["constraints"] = cons;

        const auto phi = disintegrate(sol.measure, inst);
        const auto exact = evaluate_policy_exact(phi, inst);
        report["policy"] = policy_summary(phi);
        report["policy_evaluation"] = {{"costs", exact.costs},
                                       {"objective_gap", std::abs(exact.costs[0] - sol.lp.objective)}};

        if (flags.n_traj > 0) {
            timings.start("simulation");
            report["monte_carlo"] = mc_check(loaded, phi, flags, quad).table;
            timings.stop("simulation");
        }

        write_text_file(dir / "policy.json", dump_json(policy_to_json(phi)));
        std::ostringstream csv;
        write_measure_csv(csv, inst, sol.measure);
        write_text_file(dir / "measure.csv", csv.str());
        out << "Optimal objective " << format_number(sol.lp.objective) << "\n";
    } else {
        if (sol.lp.status == LpStatus::Unbounded) {
            std::vector<double> ray(sol.lp.ray.data(), sol.lp.ray.data() + sol.lp.ray.size());
            lp["ray"] = ray;
            code = kExitUnbounded;
        } else {
            code = kExitInfeasible;
        }
        report["lp"] = lp;
        out << to_string(sol.lp.status) << "\n";
    }
    write_text_file(dir / "report.json", dump_json(report));
    timings.stop("total");
    timings.write(dir / "report.meta.json", "solve");
    return code;
}

int cmd_simulate(const std::string& instance_path, const std::string& policy_path, const CommonFlags& flags,
                 std::size_t dump, std::ostream& out) {
    Timings timings;
    timings.start("total");
    const auto quad = quad_config(flags);
    const auto loaded = load_instance_file(instance_path, quad);
    const auto phi = policy_from_json(read_json_file(policy_path));
    check_policy(phi, loaded.instance);

    Json report = header("simulate", loaded, flags);
    report["policy"] = policy_summary(phi);
    timings.start("simulation");
    const auto mc = mc_check(loaded, phi, flags, quad);
    timings.stop("simulation");
    report["monte_carlo"] = mc.table;
    const fs::path dir(flags.out_dir);
    write_text_file(dir / "simulation.json", dump_json(report));
    if (dump > 0) {
        Simulator sim(*loaded.model, phi, &loaded.instance, quad);
        std::ostringstream csv;
        write_trajectories_csv(csv, sim, flags.seed, dump, flags.eps_disc);
        write_text_file(dir / "trajectories.csv", csv.str());
    }
    timings.stop("total");
    timings.write(dir / "simulation.meta.json", "simulate");
    for (const auto& r : mc.table["rows"])
        out << r["quantity"].get<std::string>() << ": reference " << format_number(r["reference"].get<double>())
            << ", mc " << format_number(r["mc_mean"].get<double>()) << " +- "
            << format_number(r["se"].get<double>()) << "\n";
    out << (mc.pass ? "PASS" : "FAIL") << "\n";
    return mc.pass ? kExitOk : kExitCheckFailed;
}

Json margin_json(const MarginReport& m, const PdmpModel& model) {
    Json j;
    j["name"] = m.name;
    j["evaluated"] = m.evaluated;
    j["min_margin"] = m.evaluated ? number_or_null(m.min_margin) : Json(nullptr);
    if (m.argmin) {
        Json p;
        p["state"] = m.argmin->state;
        p["label"] = model.state_label(m.argmin->state);
        p["interior_action"] = m.argmin->action;
        p["t"] = m.argmin->t;
        p["boundary"] = m.argmin->boundary;
        if (m.argmin_boundary_action) p["boundary_action"] = *m.argmin_boundary_action;
        j["argmin"] = p;
    }
    j["pass"] = m.pass;
    return j;
}

int cmd_check(const std::string& instance_path, const std::string& cert_path, const CommonFlags& flags,
              std::size_t chebyshev, std::ostream& out) {
    Timings timings;
    timings.start("total");
    const auto quad = quad_config(flags);
    const auto loaded = load_instance_file(instance_path, quad);
    if (!loaded.model) throw Incompatible("assumption checks need a model: " + loaded.model_note);
    const auto& model = *loaded.model;
    const auto cj = read_json_file(cert_path);

    GrowthCertificate cert;
    std::optional<double> rho;
    try {
        const auto kind = cj.at("kind").get<std::string>();
        if (kind == "capacity_exponential") {
            if (!loaded.capacity) throw ParseError("capacity_exponential certificate needs a capacity instance");
            rho = cj.at("rho").get<double>();
            cert = capacity_certificate(*loaded.capacity, *rho);
        } else if (kind == "constant") {
            const double v = cj.at("v").get<double>();
            const double b = cj.value("b", 0.0);
            cert.v = [v](const Point&) { return v; };
            cert.b = [b](const Point&, ModeId) { return b; };
            cert.c = cj.at("c").get<double>();
            cert.flow_derivative = [](const Point&) { return 0.0; };
            cert.description = "constant v";
        } else {
            throw ParseError("unknown certificate kind '" + kind + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("certificate: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("certificate: ") + e.what());
    }

    ProbeOptions po;
    po.chebyshev_points = chebyshev;
    po.quad = quad;
    const auto probes = make_probes(model, po);
    const auto rates = check_rate_bounds(model, probes, quad);
    const auto growth = check_growth(model, cert, probes);
    const auto sol = solve_constrained_pdmp(loaded.instance);
    std::vector<Point> points;
    for (StateId j = 0; j < model.state_count(); ++j) points.push_back(model.state_point(j));
    std::optional<MassBoundReport> mass;
    if (sol.lp.status == LpStatus::Optimal) mass = mass_bound(cert, loaded.instance, points, sol.measure);
    const auto positivity = check_w_positivity(loaded.instance);

    Json report = header("check", loaded, flags);
    report["verdict_scope"] = "verified on probes";
    report["probes"] = probes.size();
    report["certificate"] = {{"description", cert.description}, {"c", cert.c}};
    Json rj;
    rj["positivity"] = margin_json(rates.positivity, model);
    rj["lower"] = margin_json(rates.lower, model);
    rj["upper"] = margin_json(rates.upper, model);
    rj["k_lambda"] = rates.k_lambda;
    rj["k_lambda_finite_exit"] = rates.k_lambda_finite;
    if (rates.declared_k_lambda) rj["declared_k_lambda"] = *rates.declared_k_lambda;
    rj["pass"] = rates.pass;
    report["rate_bounds"] = rj;
    Json gj;
    gj["certificate_valid"] = growth.certificate_valid;
    gj["drift"] = margin_json(growth.drift, model);
    gj["rate_domination"] = margin_json(growth.rate_domination, model);
    gj["boundary"] = margin_json(growth.boundary, model);
    if (rho && loaded.capacity) {
        const double ap = alpha_prime(*loaded.capacity);
        gj["alpha_prime"] = ap;
        gj["g_rho"] = growth_polynomial(ap, *rho);
        gj["minimal_rho"] = minimal_growth_rho(ap);
        // The boundary margin at zero demand equals alpha g(rho) / (1 + alpha' rho).
        gj["reduced_margin_g"] = growth.boundary.min_margin * (1.0 + ap * *rho) / loaded.capacity->alpha;
    }
    gj["pass"] = growth.pass;
    report["growth"] = gj;
    if (mass) report["mass_bound"] = {{"mass", mass->mass}, {"bound", mass->bound}, {"pass", mass->pass}};
    report["w_positivity"] = {{"min_w", positivity.min_w}, {"min_w0", positivity.min_w0}, {"pass", positivity.pass}};
    const bool pass = rates.pass && growth.pass && (!mass || mass->pass) && positivity.pass;
    report["pass"] = pass;

    const fs::path dir(flags.out_dir);
    write_text_file(dir / "check.json", dump_json(report));
    timings.stop("total");
    timings.write(dir / "check.meta.json", "check");
    out << "rate bounds: " << (rates.pass ? "PASS" : "FAIL") << "\n";
    out << "growth: " << (growth.pass ? "PASS" : "FAIL") << " (min margins " << format_number(growth.drift.min_margin)
        << ", " << format_number(growth.rate_domination.min_margin) << ", "
        << format_number(growth.boundary.min_margin) << ")\n";
    if (mass) out << "mass bound: " << (mass->pass ? "PASS" : "FAIL") << "\n";
    out << "w positivity: " << (positivity.pass ? "PASS" : "FAIL") << "\n";
    return pass ? kExitOk : kExitCheckFailed;
}

struct CapacityFlags {
    double lambda = 1.0;
    double tau = 1.0;
    std::vector<double> gamma{1.0, 2.0};
    int demand_cap = 5;
    double alpha = 1.0;
    int sa_grid = 5;
    int depth = 2;
    double demand_cost = 1.0;
    std::vector<double> rate_cost{0.0, 1.0, 2.0};
    double completion_cost = 0.0;
    std::vector<double> budget;
    bool tabulated = false;
    std::string out;
};

int cmd_gen_capacity(const CapacityFlags& f, const CommonFlags& flags, std::ostream& out) {
    CapacityParams p;
    p.lambda = f.lambda;
    p.tau = f.tau;
    p.gamma = f.gamma;
    p.demand_cap = f.demand_cap;
    p.alpha = f.alpha;
    p.sa_grid = f.sa_grid;
    p.depth = f.depth;
    CapacityCost objective;
    objective.demand = f.demand_cost;
    objective.completion = f.completion_cost;
    p.costs = {objective};
    for (double d : f.budget) {
        CapacityCost spend;
        spend.rate = f.rate_cost;
        p.costs.push_back(spend);
        p.limits.push_back(d);
    }
    p.validate();
    Json j = capacity_to_json(p);
    if (f.tabulated) {
        CapacityModel model(p);
        j = instance_to_json(tabulate(model, quad_config(flags)));
    }
    write_text_file(f.out, dump_json(j));
    out << "wrote " << f.out << "\n";
    return kExitOk;
}

int cmd_export_lp(const std::string& path, const std::string& target, bool delta, const CommonFlags& flags,
                  std::ostream& out) {
    const auto loaded = load_instance_file(path, quad_config(flags));
    const auto lp = delta ? assemble_total_cost_lp(augment_delta(loaded.instance)) : assemble_problem_p(loaded.instance);
    std::ostringstream text;
    write_mps(text, lp, delta ? "PDMP_DELTA" : "PDMP");
    write_text_file(target, text.str());
    out << "wrote " << target << " (" << lp.columns() << " columns)\n";
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Constrained discounted control of piecewise deterministic Markov processes"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    CommonFlags flags;
    auto add_common = [&](CLI::App* cmd, bool simulation) {
        cmd->add_option("--quad-tol", flags.quad_tol, "Quadrature tolerance (absolute and relative)")
            ->capture_default_str();
        cmd->add_option("--out-dir", flags.out_dir, "Directory for output files")->capture_default_str();
        if (simulation) {
            cmd->add_option("--seed", flags.seed, "Master seed of all randomness")->capture_default_str();
            cmd->add_option("--eps-disc", flags.eps_disc, "Stop a trajectory once exp(-alpha T) drops below this")
                ->capture_default_str();
        }
    };

    std::string instance_path;
    std::string policy_path;
    std::string cert_path;
    std::string target;
    bool delta = false;
    std::size_t dump = 0;
    std::size_t chebyshev = 33;
    CapacityFlags cap;

    auto* solve = app.add_subcommand("solve", "Solve the occupation-measure LP and extract a policy");
    solve->add_option("instance", instance_path, "Instance JSON")->required();
    add_common(solve, true);
    solve->add_option("--n-traj", flags.n_traj, "Monte Carlo cross-check trajectories (0 skips)")
        ->capture_default_str();

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo check of a policy against its exact costs");
    simulate->add_option("instance", instance_path, "Instance JSON")->required();
    simulate->add_option("policy", policy_path, "Policy JSON")->required();
    add_common(simulate, true);
    std::size_t sim_traj = 100000;
    simulate->add_option("--n-traj", sim_traj, "Trajectories")->capture_default_str();
    simulate->add_option("--dump-trajectories", dump, "Write the first N trajectories to trajectories.csv");

    auto* check = app.add_subcommand("check", "Check rate bounds and a growth certificate");
    check->add_option("instance", instance_path, "Instance JSON")->required();
    check->add_option("certificate", cert_path, "Certificate JSON")->required();
    add_common(check, false);
    check->add_option("--probes", chebyshev, "Chebyshev points per flow segment")->capture_default_str();

    auto* gen = app.add_subcommand("gen-capacity", "Write a capacity-expansion instance");
    gen->add_option("--out", cap.out, "Output file")->required();
    gen->add_option("--lambda", cap.lambda)->capture_default_str();
    gen->add_option("--tau", cap.tau)->capture_default_str();
    gen->add_option("--gamma", cap.gamma, "Construction rates gamma_1..gamma_k")->capture_default_str();
    gen->add_option("--demand-cap", cap.demand_cap)->capture_default_str();
    gen->add_option("--alpha", cap.alpha)->capture_default_str();
    gen->add_option("--sa-grid", cap.sa_grid, "Threshold grid points")->capture_default_str();
    gen->add_option("--depth", cap.depth, "Investment grid closure depth")->capture_default_str();
    gen->add_option("--demand-cost", cap.demand_cost, "Objective cost per unit of demand and time")
        ->capture_default_str();
    gen->add_option("--completion-cost", cap.completion_cost)->capture_default_str();
    gen->add_option("--rate-cost", cap.rate_cost, "Spending rate per mode for budget constraints")
        ->capture_default_str();
    gen->add_option("--budget", cap.budget, "Add a spending constraint with this limit");
    gen->add_flag("--tabulated", cap.tabulated, "Write the tabulated instance instead of parameters");
    gen->add_option("--quad-tol", flags.quad_tol)->capture_default_str();

    auto* exp = app.add_subcommand("export-lp", "Write the LP in MPS format");
    exp->add_option("instance", instance_path, "Instance JSON")->required();
    exp->add_option("--out", target, "Output MPS file")->required();
    exp->add_flag("--delta", delta, "Export the cemetery-augmented total-cost LP");
    exp->add_option("--quad-tol", flags.quad_tol)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (*solve) return cmd_solve(instance_path, flags, out);
        if (*simulate) {
            flags.n_traj = sim_traj;
            return cmd_simulate(instance_path, policy_path, flags, dump, out);
        }
        if (*check) return cmd_check(instance_path, cert_path, flags, chebyshev, out);
        if (*gen) return cmd_gen_capacity(cap, flags, out);
        if (*exp) return cmd_export_lp(instance_path, target, delta, flags, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

}  // namespace pdmp
