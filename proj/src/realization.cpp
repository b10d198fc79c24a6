#include "pdmp/realization.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pdmp {

std::string realization_obstacle(const FiniteInstance& inst, double tol) {
    const auto off = state_row_offsets(inst);
    for (std::size_t j = 0; j < inst.state_count; ++j) {
        for (std::size_t r = off[j]; r < off[j + 1]; ++r) {
            const auto& row = inst.rows[r];
            const auto where = " at row mu_" + std::to_string(row.state) + "_" + std::to_string(row.pair.interior) +
                               "_" + std::to_string(row.pair.boundary);
            if (row.boundary_weight > tol) return "rows reach a boundary (calH > 0)" + where;
            for (double h : row.boundary)
                if (h > tol) return "rows carry boundary costs" + where;
            if (!(row.sojourn > 0.0) || row.sojourn * inst.alpha >= 1.0 - tol)
                return "rows need 0 < alpha calL < 1 for a positive jump rate" + where;
            // Rows sharing an interior action must agree: the boundary action is inert.
            for (std::size_t q = off[j]; q < r; ++q) {
                const auto& other = inst.rows[q];
                if (other.pair.interior != row.pair.interior) continue;
                bool same = other.sojourn == row.sojourn && other.running == row.running &&
                            other.kernel.size() == row.kernel.size();
                for (std::size_t e = 0; same && e < row.kernel.size(); ++e)
                    same = other.kernel[e].state == row.kernel[e].state &&
                           std::abs(other.kernel[e].probability - row.kernel[e].probability) <= tol;
                if (!same) return "rows depend on the boundary action" + where;
            }
        }
    }
    return {};
}

ConstantRateModel::ConstantRateModel(const FiniteInstance& inst) : inst_(inst) {
    const auto why = realization_obstacle(inst_);
    if (!why.empty()) throw std::invalid_argument("instance cannot be simulated: " + why);
    const auto off = state_row_offsets(inst_);
    const std::size_t n = inst_.cost_count();
    stages_.resize(inst_.state_count);
    min_rate_.assign(inst_.state_count, std::numeric_limits<double>::infinity());
    max_rate_.assign(inst_.state_count, 0.0);
    cost_bound_.assign(n, 0.0);
    for (std::size_t j = 0; j < inst_.state_count; ++j) {
        const auto& interior = inst_.feasible[j].interior;
        stages_[j].resize(interior.size());
        for (std::size_t r = off[j]; r < off[j + 1]; ++r) {
            const auto& row = inst_.rows[r];
            const auto pos = static_cast<std::size_t>(
                std::find(interior.begin(), interior.end(), row.pair.interior) - interior.begin());
            auto& st = stages_[j][pos];
            const double mass = total_mass(row.kernel);
            st.rate = 1.0 / row.sojourn - inst_.alpha;
            st.jumps.clear();
            for (const auto& e : row.kernel) {
                Point target(1);
                target << static_cast<double>(e.state);
                st.jumps.push_back({e.state, e.probability / mass, target});
            }
            st.running.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                st.running[i] = row.running[i] / row.sojourn;
                cost_bound_[i] = std::max(cost_bound_[i], st.running[i]);
            }
            min_rate_[j] = std::min(min_rate_[j], st.rate);
            max_rate_[j] = std::max(max_rate_[j], st.rate);
        }
    }
}

Point ConstantRateModel::state_point(StateId j) const {
    Point x(1);
    x << static_cast<double>(j);
    return x;
}

double ConstantRateModel::exit_time(const Point&) const { return std::numeric_limits<double>::infinity(); }

const ConstantRateModel::Stage& ConstantRateModel::stage(const Point& x, ActionId a) const {
    const auto j = static_cast<std::size_t>(x[0]);
    const auto& interior = inst_.feasible.at(j).interior;
    const auto it = std::find(interior.begin(), interior.end(), a);
    if (it == interior.end()) throw std::invalid_argument("action not feasible at this state");
    return stages_[j][static_cast<std::size_t>(it - interior.begin())];
}

double ConstantRateModel::rate(const Point& x, ModeId mode) const { return stage(x, mode).rate; }

std::vector<JumpOutcome> ConstantRateModel::interior_jump(const Point& x, ModeId mode) const {
    return stage(x, mode).jumps;
}

std::vector<JumpOutcome> ConstantRateModel::boundary_jump(const Point&, ActionId) const { return {}; }

double ConstantRateModel::running_cost(std::size_t i, const Point& x, ActionId a) const {
    return stage(x, a).running[i];
}

std::optional<double> ConstantRateModel::rate_lower_bound(const Point& x) const {
    return min_rate_.at(static_cast<std::size_t>(x[0]));
}

std::optional<double> ConstantRateModel::rate_upper_bound(const Point& x) const {
    return max_rate_.at(static_cast<std::size_t>(x[0]));
}

std::optional<double> ConstantRateModel::running_cost_bound(std::size_t i) const { return cost_bound_.at(i); }

}  // namespace pdmp
