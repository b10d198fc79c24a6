#include "pdmp/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "pdmp/errors.hpp"

namespace pdmp {

TrajectoryRng::TrajectoryRng(std::uint64_t master_seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
}

double TrajectoryRng::uniform() {
    // 53 random bits, offset by half a unit so neither endpoint occurs.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

namespace {

std::size_t categorical(const std::vector<double>& cdf, double u) {
    const double target = u * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

StateId draw_outcome(const std::vector<JumpOutcome>& outcomes, double u) {
    if (outcomes.empty()) throw std::runtime_error("jump with an empty post-jump distribution");
    double total = 0.0;
    for (const auto& o : outcomes) total += o.probability;
    double acc = 0.0;
    const double target = u * total;
    for (const auto& o : outcomes) {
        acc += o.probability;
        if (target < acc) return o.state;
    }
    return outcomes.back().state;
}

}  // namespace

Interjump sample_interjump(const PdmpModel& model, const RateProfile& profile, TrajectoryRng& rng) {
    const double level = -std::log(rng.uniform());
    const double t_star = model.exit_time(profile.origin());
    if (std::isfinite(t_star) && level >= profile(profile.horizon())) return {t_star, true};
    return {profile.invert(level), false};
}

Interjump sample_interjump(const PdmpModel& model, const Point& x, ActionId a, TrajectoryRng& rng,
                           const QuadratureConfig& quad) {
    const double horizon = integration_horizon(model, x, quad);
    if (!(horizon > 0.0)) {
        (void)rng.uniform();
        return {0.0, true};
    }
    RateProfile profile(model, x, a, horizon, quad);
    return sample_interjump(model, profile, rng);
}

StateId sample_postjump(const PdmpModel& model, const Point& pre_jump, bool interior, ActionId action_or_mode,
                        TrajectoryRng& rng) {
    const auto outcomes =
        interior ? model.interior_jump(pre_jump, action_or_mode) : model.boundary_jump(pre_jump, action_or_mode);
    return draw_outcome(outcomes, rng.uniform());
}

/// Cached data of one (state, interior action): the rate profile and the cumulative
/// discounted running costs along the flow.
struct Simulator::Stage {
    Point x;
    ActionId action = 0;
    double t_star = 0.0;
    bool immediate = false;
    std::optional<RateProfile> profile;
    std::vector<double> nodes;
    std::vector<Eigen::VectorXd> cumulative;
    const PdmpModel* model = nullptr;
    QuadratureConfig quad;

    void integrand(double s, Eigen::Ref<Eigen::VectorXd> out) const {
        const Point y = model->flow(x, s);
        const double w = std::exp(-model->discount() * s);
        for (Eigen::Index i = 0; i < out.size(); ++i)
            out[i] = w * model->running_cost(static_cast<std::size_t>(i), y, action);
    }

    /// int_0^t e^{-alpha s} f_i(phi(x, s), a) ds for every i.
    Eigen::VectorXd running(double t) const {
        const auto n = static_cast<Eigen::Index>(model->cost_count());
        VectorIntegrand f = [this](double s, Eigen::Ref<Eigen::VectorXd> out) { integrand(s, out); };
        if (t <= 0.0 || nodes.empty()) return Eigen::VectorXd::Zero(n);
        if (t >= nodes.back()) {
            if (t == nodes.back()) return cumulative.back();
            std::vector<double> cuts{nodes.back(), t};
            return cumulative.back() + integrate(f, static_cast<std::size_t>(n), cuts, quad).value;
        }
        const auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
        const auto i = static_cast<std::size_t>(it - nodes.begin()) - 1;
        Eigen::VectorXd value(n), error(n);
        if (t == nodes[i]) return cumulative[i];
        kronrod_panel(f, nodes[i], t, value, error);
        return cumulative[i] + value;
    }
};

Simulator::Simulator(const PdmpModel& model, const StationaryPolicy& phi, const FiniteInstance* inst,
                     const QuadratureConfig& quad)
    : model_(model), phi_(phi), inst_(inst), quad_(quad) {
    const std::size_t s = model.state_count();
    if (phi.state_count() != s) throw Incompatible("policy and model have different state counts");
    if (inst && inst->state_count != s) throw Incompatible("instance and model have different state counts");
    if (inst) check_policy(phi, *inst);

    const auto nu0 = model.initial_distribution();
    double acc = 0.0;
    for (double p : nu0) nu0_cdf_.push_back(acc += p);

    policy_cdf_.resize(s);
    stages_.resize(s);
    if (inst) row_offsets_ = state_row_offsets(*inst);
    for (StateId j = 0; j < s; ++j) {
        double c = 0.0;
        for (const auto& choice : phi.choices[j]) {
            policy_cdf_[j].push_back(c += choice.probability);
            if (choice.probability > 0.0) add_stage(j, choice.pair.interior);
        }
        if (policy_cdf_[j].empty() || !(policy_cdf_[j].back() > 0.0))
            throw Incompatible("policy has no positive probability at state " + std::to_string(j));
    }
}

void Simulator::add_stage(StateId j, ActionId a) {
    for (const auto& e : stages_[j])
        if (e.first == a) return;
    auto st = std::make_shared<Stage>();
    st->model = &model_;
    st->quad = quad_;
    st->x = model_.state_point(j);
    st->action = a;
    st->t_star = model_.exit_time(st->x);
    const double horizon = integration_horizon(model_, st->x, quad_);
    if (!(horizon > 0.0)) {
        st->immediate = true;
        stages_[j].emplace_back(a, std::move(st));
        return;
    }
    st->profile.emplace(model_, st->x, a, horizon, quad_);

    // Nodes for the running costs, refined until one panel resolves each interval.
    const auto n = static_cast<Eigen::Index>(model_.cost_count());
    VectorIntegrand f = [raw = st.get()](double s, Eigen::Ref<Eigen::VectorXd> out) { raw->integrand(s, out); };
    std::vector<double> cuts{0.0};
    for (double b : model_.breakpoints(st->x, a))
        if (b > cuts.back() && b < horizon) cuts.push_back(b);
    cuts.push_back(horizon);
    st->nodes.push_back(0.0);
    st->cumulative.push_back(Eigen::VectorXd::Zero(n));
    Eigen::VectorXd value(n), error(n);
    std::size_t refinements = 0;
    for (std::size_t c = 1; c < cuts.size(); ++c) {
        std::vector<std::pair<double, double>> stack{{cuts[c - 1], cuts[c]}};
        while (!stack.empty()) {
            auto [lo, hi] = stack.back();
            stack.pop_back();
            kronrod_panel(f, lo, hi, value, error);
            bool ok = true;
            for (Eigen::Index i = 0; i < n; ++i) {
                const double tol =
                    0.1 * std::max(quad_.abs_tol * (hi - lo) / horizon, quad_.rel_tol * std::abs(value[i]));
                ok = ok && error[i] <= tol;
            }
            if (!ok && hi - lo > 1e-12 * horizon) {
                if (++refinements > quad_.max_subdivisions)
                    throw QuadratureFailure("running cost did not resolve within the subdivision budget");
                const double mid = 0.5 * (lo + hi);
                stack.push_back({mid, hi});
                stack.push_back({lo, mid});
                continue;
            }
            st->nodes.push_back(hi);
            st->cumulative.push_back(st->cumulative.back() + value);
        }
    }
    stages_[j].emplace_back(a, std::move(st));
}

const Simulator::Stage& Simulator::stage(StateId j, ActionId a) const {
    for (const auto& e : stages_[j])
        if (e.first == a) return *e.second;
    throw std::logic_error("stage not prepared");
}

TrajectorySample Simulator::run(std::uint64_t seed, std::uint64_t index, double eps_disc, std::size_t max_jumps,
                                bool record) const {
    TrajectoryRng rng(seed, index);
    const std::size_t n = model_.cost_count();
    const double alpha = model_.discount();
    TrajectorySample out;
    out.costs.assign(n, 0.0);

    auto state = static_cast<StateId>(categorical(nu0_cdf_, rng.uniform()));
    double time = 0.0;
    double discount = 1.0;
    bool arrived_by_boundary = false;
    for (std::size_t k = 0;; ++k) {
        if (discount < eps_disc || k >= max_jumps) break;
        const auto& choice = phi_.choices[state][categorical(policy_cdf_[state], rng.uniform())];
        if (record) out.steps.push_back({k, time, state, choice.pair, arrived_by_boundary});
        const Stage& st = stage(state, choice.pair.interior);

        Interjump jump{0.0, true};
        if (!st.immediate) jump = sample_interjump(model_, *st.profile, rng);
        if (jump.time > 0.0) {
            const auto running = st.running(jump.time);
            for (std::size_t i = 0; i < n; ++i) out.costs[i] += discount * running[static_cast<Eigen::Index>(i)];
        }
        time += jump.time;
        const double next_discount = discount * std::exp(-alpha * jump.time);
        const Point y = model_.flow(st.x, jump.time);
        if (jump.boundary) {
            for (std::size_t i = 0; i < n; ++i) out.costs[i] += next_discount * model_.boundary_cost(i, y, choice.pair.boundary);
            state = sample_postjump(model_, y, false, choice.pair.boundary, rng);
            ++out.boundary_hits;
        } else {
            state = sample_postjump(model_, y, true, model_.control(st.x, choice.pair.interior, jump.time), rng);
        }
        arrived_by_boundary = jump.boundary;
        discount = next_discount;
    }
    out.residual_discount = discount;
    return out;
}

namespace {

struct Moments {
    double s1 = 0.0;
    double s2 = 0.0;

    void add(double x) {
        s1 += x;
        s2 += x * x;
    }
    void merge(const Moments& o) {
        s1 += o.s1;
        s2 += o.s2;
    }
};

McEstimate finish(const Moments& m, std::size_t count, double shift = 0.0) {
    // Statistics of (x - shift) from the raw sums of x.
    McEstimate e;
    e.count = count;
    if (count == 0) return e;
    const double nn = static_cast<double>(count);
    const double mean_x = m.s1 / nn;
    e.mean = mean_x - shift;
    if (count > 1) {
        const double var = std::max(0.0, (m.s2 - nn * mean_x * mean_x) / (nn - 1.0));
        e.standard_error = std::sqrt(var / nn);
    }
    return e;
}

struct Accumulator {
    std::size_t count = 0;
    std::size_t capped = 0;
    std::vector<Moments> costs;
    Moments mass;
    Moments jumps;
    std::vector<Moments> rows;
    std::vector<Moments> states;

    void merge(const Accumulator& o) {
        count += o.count;
        capped += o.capped;
        for (std::size_t i = 0; i < costs.size(); ++i) costs[i].merge(o.costs[i]);
        mass.merge(o.mass);
        jumps.merge(o.jumps);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i].merge(o.rows[i]);
        for (std::size_t i = 0; i < states.size(); ++i) states[i].merge(o.states[i]);
    }
};

Accumulator merge_range(std::vector<Accumulator>& parts, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return std::move(parts[lo]);
    const std::size_t mid = lo + (hi - lo) / 2;
    Accumulator left = merge_range(parts, lo, mid);
    left.merge(merge_range(parts, mid, hi));
    return left;
}

}  // namespace

std::vector<std::optional<double>> Simulator::truncation_bounds(double eps_disc) const {
    const std::size_t n = model_.cost_count();
    std::vector<std::optional<double>> out(n);
    double g_max = std::numeric_limits<double>::quiet_NaN();
    if (inst_) {
        g_max = 0.0;
        for (const auto& row : inst_->rows) g_max = std::max(g_max, total_mass(row.kernel));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto f = model_.running_cost_bound(i);
        const auto r = model_.boundary_cost_bound(i);
        if (!f || !r) continue;
        double bound = eps_disc * *f / model_.discount();
        if (*r > 0.0) {
            if (!(g_max < 1.0)) continue;
            bound += eps_disc * *r / (1.0 - g_max);
        }
        out[i] = bound;
    }
    return out;
}

SimulationResult Simulator::estimate(const SimulationBudget& budget) const {
    constexpr std::size_t kChunk = 1024;
    const std::size_t n = model_.cost_count();
    const std::size_t chunks = (budget.trajectories + kChunk - 1) / kChunk;
    const std::size_t row_count = inst_ ? inst_->rows.size() : 0;
    const std::size_t state_count = inst_ ? inst_->state_count : 0;

    // Row of each policy choice, for occupation estimates.
    std::vector<std::vector<std::size_t>> choice_rows(phi_.state_count());
    if (inst_) {
        for (StateId j = 0; j < phi_.state_count(); ++j)
            for (const auto& c : phi_.choices[j]) {
                std::size_t row = row_offsets_[j];
                while (row < row_offsets_[j + 1] && inst_->rows[row].pair != c.pair) ++row;
                choice_rows[j].push_back(row);
            }
    }

    std::vector<Accumulator> parts(chunks);
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(chunks);
    auto worker = [&]() {
        std::vector<double> row_scratch(row_count, 0.0);
        std::vector<double> state_scratch(state_count, 0.0);
        std::vector<char> state_seen(state_count, 0);
        std::vector<std::size_t> touched_rows;
        std::vector<std::size_t> touched_states;
        for (std::size_t c = next++; c < chunks; c = next++) {
            try {
                Accumulator acc;
                acc.costs.resize(n);
                acc.rows.resize(row_count);
                acc.states.resize(state_count);
                const std::size_t first = c * kChunk;
                const std::size_t last = std::min(budget.trajectories, first + kChunk);
                for (std::size_t t = first; t < last; ++t) {
                    const bool need_steps = inst_ != nullptr;
                    auto sample = run(budget.seed, t, budget.eps_disc, budget.max_jumps, need_steps);
                    ++acc.count;
                    if (sample.residual_discount >= budget.eps_disc) ++acc.capped;
                    for (std::size_t i = 0; i < n; ++i) acc.costs[i].add(sample.costs[i]);
                    double mass = 0.0;
                    std::size_t jumps = 0;
                    if (need_steps) {
                        for (const auto& step : sample.steps) {
                            const double w = std::exp(-model_.discount() * step.time);
                            mass += w;
                            ++jumps;
                            const auto& rows_of_state = choice_rows[step.state];
                            std::size_t pos = 0;
                            while (phi_.choices[step.state][pos].pair != step.action) ++pos;
                            const std::size_t row = rows_of_state[pos];
                            if (row_scratch[row] == 0.0) touched_rows.push_back(row);
                            row_scratch[row] += w;
                        }
                        for (std::size_t row : touched_rows) {
                            const double w = row_scratch[row];
                            acc.rows[row].add(w);
                            const auto& r = inst_->rows[row];
                            auto bump = [&](StateId j, double v) {
                                if (!state_seen[j]) {
                                    state_seen[j] = 1;
                                    touched_states.push_back(j);
                                }
                                state_scratch[j] += v;
                            };
                            bump(r.state, w);
                            for (const auto& e : r.kernel) bump(e.state, -e.probability * w);
                            row_scratch[row] = 0.0;
                        }
                        for (std::size_t j : touched_states) {
                            acc.states[j].add(state_scratch[j]);
                            state_scratch[j] = 0.0;
                            state_seen[j] = 0;
                        }
                        touched_rows.clear();
                        touched_states.clear();
                    }
                    acc.mass.add(mass);
                    acc.jumps.add(static_cast<double>(jumps));
                }
                parts[c] = std::move(acc);
            } catch (...) {
                failures[c] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::min<unsigned>(thread_budget(), static_cast<unsigned>(std::max<std::size_t>(chunks, 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (auto& f : failures)
        if (f) std::rethrow_exception(f);

    SimulationResult out;
    if (chunks == 0) {
        out.costs.resize(n);
        return out;
    }
    const Accumulator total = merge_range(parts, 0, chunks);
    const auto bounds = truncation_bounds(budget.eps_disc);
    for (std::size_t i = 0; i < n; ++i) {
        auto e = finish(total.costs[i], total.count);
        e.truncation_bias = bounds[i];
        out.costs.push_back(e);
    }
    out.total_mass = finish(total.mass, total.count);
    if (inst_) {
        // The first uncounted visit weighs less than eps_disc and later ones decay geometrically.
        double g_max = 0.0;
        for (const auto& row : inst_->rows) g_max = std::max(g_max, total_mass(row.kernel));
        if (g_max < 1.0) out.total_mass.truncation_bias = budget.eps_disc / (1.0 - g_max);
    }
    out.jump_count = finish(total.jumps, total.count);
    out.truncated_by_jump_cap = total.capped;
    if (inst_) {
        for (std::size_t r = 0; r < row_count; ++r) out.occupation.push_back(finish(total.rows[r], total.count));
        // Residual per trajectory is a_j - nu0_j with a_j accumulated above.
        for (std::size_t j = 0; j < state_count; ++j) {
            const double nu = inst_->nu0[j];
            const double nn = static_cast<double>(total.count);
            Moments shifted;
            shifted.s1 = total.states[j].s1 - nn * nu;
            shifted.s2 = total.states[j].s2 - 2.0 * nu * total.states[j].s1 + nn * nu * nu;
            out.balance_residual.push_back(finish(shifted, total.count));
        }
    }
    return out;
}

std::vector<McEstimate> simulate_costs(const PdmpModel& model, const StationaryPolicy& phi,
                                       const SimulationBudget& budget, const QuadratureConfig& quad) {
    Simulator sim(model, phi, nullptr, quad);
    return sim.estimate(budget).costs;
}

SimulationResult estimate_occupation(const PdmpModel& model, const StationaryPolicy& phi, const FiniteInstance& inst,
                                     const SimulationBudget& budget, const QuadratureConfig& quad) {
    Simulator sim(model, phi, &inst, quad);
    return sim.estimate(budget);
}

void write_trajectories_csv(std::ostream& out, const Simulator& sim, std::uint64_t seed, std::size_t count,
                            double eps_disc) {
    out << "traj_id,k,T_k,Z_k,theta_k,theta_partial_k,boundary_hit\n";
    char buf[64];
    for (std::size_t t = 0; t < count; ++t) {
        const auto sample = sim.run(seed, t, eps_disc, 10000000, true);
        for (const auto& s : sample.steps) {
            std::snprintf(buf, sizeof buf, "%.17g", s.time);
            out << t << ',' << s.k << ',' << buf << ',' << s.state << ',' << s.action.interior << ','
                << s.action.boundary << ',' << (s.boundary_hit ? 1 : 0) << '\n';
        }
    }
}

}  // namespace pdmp
