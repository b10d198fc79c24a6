#include "pdmp/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace pdmp {

double total_mass(const SparseDistribution& d) {
    double s = 0.0;
    for (const auto& e : d) s += e.probability;
    return s;
}

double mass_at(const SparseDistribution& d, StateId state) {
    auto it = std::lower_bound(d.begin(), d.end(), state,
                               [](const SparseEntry& e, StateId s) { return e.state < s; });
    return (it != d.end() && it->state == state) ? it->probability : 0.0;
}

void normalize_layout(SparseDistribution& d) {
    std::stable_sort(d.begin(), d.end(), [](const SparseEntry& a, const SparseEntry& b) { return a.state < b.state; });
    SparseDistribution merged;
    merged.reserve(d.size());
    for (const auto& e : d) {
        if (!merged.empty() && merged.back().state == e.state)
            merged.back().probability += e.probability;
        else
            merged.push_back(e);
    }
    d = std::move(merged);
}

std::vector<std::size_t> state_row_offsets(const FiniteInstance& inst) {
    std::vector<std::size_t> off(inst.state_count + 1, 0);
    for (const auto& row : inst.rows)
        if (row.state < inst.state_count) ++off[row.state + 1];
    for (std::size_t j = 0; j < inst.state_count; ++j) off[j + 1] += off[j];
    return off;
}

std::optional<std::size_t> find_row(const FiniteInstance& inst, StateId state, ActionPair pair) {
    for (std::size_t r = 0; r < inst.rows.size(); ++r)
        if (inst.rows[r].state == state && inst.rows[r].pair == pair) return r;
    return std::nullopt;
}

std::vector<InstanceRow> make_row_skeleton(const FeasibleActionSets& feasible, std::size_t cost_count) {
    std::vector<InstanceRow> rows;
    for (std::size_t j = 0; j < feasible.size(); ++j) {
        for (ActionId k : feasible[j].interior) {
            for (ActionId i : feasible[j].boundary) {
                InstanceRow row;
                row.state = static_cast<StateId>(j);
                row.pair = {k, i};
                row.running.assign(cost_count, 0.0);
                row.boundary.assign(cost_count, 0.0);
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

namespace {

std::string row_name(const InstanceRow& r) {
    std::ostringstream os;
    os << "(" << r.state << "," << r.pair.interior << "," << r.pair.boundary << ")";
    return os.str();
}

bool duplicate_free(const std::vector<ActionId>& v) {
    std::set<ActionId> s(v.begin(), v.end());
    return s.size() == v.size();
}

}  // namespace

std::vector<Violation> validate_instance(const FiniteInstance& inst, double tol) {
    std::vector<Violation> out;
    auto add = [&](std::string rule, std::string msg) { out.push_back({std::move(rule), std::move(msg)}); };

    if (inst.state_count == 0) add("states", "instance has no states");
    if (!(inst.alpha > 0.0) || !std::isfinite(inst.alpha)) add("alpha", "discount rate must be positive and finite");
    if (inst.feasible.size() != inst.state_count)
        add("feasible", "feasible action sets do not cover every state");

    for (std::size_t j = 0; j < inst.feasible.size(); ++j) {
        const auto& fa = inst.feasible[j];
        auto where = " at state " + std::to_string(j);
        if (fa.interior.empty()) add("feasible", "empty interior action set" + where);
        if (fa.boundary.empty()) add("feasible", "empty boundary action set" + where);
        for (const auto* set : {&fa.interior, &fa.boundary}) {
            for (ActionId a : *set)
                if (a >= inst.action_count) add("action_id", "action " + std::to_string(a) + " out of range" + where);
            if (!duplicate_free(*set)) add("feasible", "duplicate action" + where);
        }
    }

    if (inst.nu0.size() != inst.state_count) {
        add("nu0", "nu0 has wrong length");
    } else {
        double s = 0.0;
        bool negative = false;
        for (double p : inst.nu0) {
            s += p;
            negative = negative || p < 0.0 || !std::isfinite(p);
        }
        if (negative || std::abs(s - 1.0) > tol) add("nu0", "nu0 not a probability vector");
    }

    for (std::size_t i = 0; i < inst.limits.size(); ++i)
        if (!(inst.limits[i] >= 0.0)) add("limits", "limit d_" + std::to_string(i + 1) + " must be nonnegative");

    if (inst.feasible.size() == inst.state_count) {
        auto expected = make_row_skeleton(inst.feasible, inst.cost_count());
        bool layout_ok = expected.size() == inst.rows.size();
        for (std::size_t r = 0; layout_ok && r < expected.size(); ++r)
            layout_ok = expected[r].state == inst.rows[r].state && expected[r].pair == inst.rows[r].pair;
        if (!layout_ok) add("rows", "rows do not match the product of feasible action sets in canonical order");
    }

    for (const auto& row : inst.rows) {
        const auto name = row_name(row);
        if (row.running.size() != inst.cost_count() || row.boundary.size() != inst.cost_count()) {
            add("costs", "row " + name + " has wrong number of cost entries");
            continue;
        }
        for (std::size_t i = 0; i < inst.cost_count(); ++i) {
            if (!(row.running[i] >= 0.0) || !std::isfinite(row.running[i]))
                add("costs", "row " + name + " has negative or non-finite Lf_" + std::to_string(i));
            if (!(row.boundary[i] >= 0.0) || !std::isfinite(row.boundary[i]))
                add("costs", "row " + name + " has negative or non-finite Hr_" + std::to_string(i));
        }
        if (!(row.sojourn >= 0.0)) add("calL", "row " + name + " has negative calL");
        if (!(row.boundary_weight >= 0.0) || row.boundary_weight > 1.0 + tol)
            add("calH", "row " + name + " has calH outside [0,1]");
        double mass = 0.0;
        StateId prev = 0;
        bool first = true;
        for (const auto& e : row.kernel) {
            if (e.state >= inst.state_count) add("G", "row " + name + " targets unknown state " + std::to_string(e.state));
            if (!(e.probability >= 0.0) || e.probability > 1.0 + tol)
                add("G", "row " + name + " has entry outside [0,1]");
            if (!first && e.state <= prev) add("G", "row " + name + " entries not sorted or duplicated");
            prev = e.state;
            first = false;
            mass += e.probability;
        }
        if (mass > 1.0 + tol) add("G", "row " + name + " has G mass " + std::to_string(mass) + " > 1");
        const double identity = mass + inst.alpha * row.sojourn - 1.0;
        if (std::abs(identity) > std::max(tol, 10.0 * row.quad_error))
            add("identity", "row " + name + " violates G(E) + alpha*calL = 1 by " + std::to_string(identity));
    }
    return out;
}

std::vector<double> PdmpModel::breakpoints(const Point&, ActionId) const { return {}; }
std::optional<double> PdmpModel::rate_lower_bound(const Point&) const { return std::nullopt; }
std::optional<double> PdmpModel::rate_upper_bound(const Point&) const { return std::nullopt; }
std::optional<double> PdmpModel::sojourn_bound() const { return std::nullopt; }
std::optional<double> PdmpModel::running_cost_bound(std::size_t) const { return std::nullopt; }
std::optional<double> PdmpModel::boundary_cost_bound(std::size_t) const { return std::nullopt; }
std::string PdmpModel::state_label(StateId j) const { return "z" + std::to_string(j); }

}  // namespace pdmp
