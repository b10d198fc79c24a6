#include "pdmp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <Eigen/LU>

#include "pdmp/errors.hpp"

namespace pdmp {

void LinearProgram::check() const {
    const auto n = objective.size();
    auto fail = [](const std::string& m) { throw std::invalid_argument("LinearProgram: " + m); };
    if (eq_matrix.rows() != eq_rhs.size() || (eq_matrix.rows() > 0 && eq_matrix.cols() != n))
        fail("equality block dimensions");
    if (in_matrix.rows() != in_rhs.size() || (in_matrix.rows() > 0 && in_matrix.cols() != n))
        fail("inequality block dimensions");
    if (!column_names.empty() && column_names.size() != static_cast<std::size_t>(n)) fail("column names");
    if (!eq_names.empty() && eq_names.size() != static_cast<std::size_t>(eq_rhs.size())) fail("equality names");
    if (!in_names.empty() && in_names.size() != static_cast<std::size_t>(in_rhs.size())) fail("inequality names");
    if (!objective.allFinite() || !eq_matrix.allFinite() || !eq_rhs.allFinite() || !in_matrix.allFinite() ||
        !in_rhs.allFinite())
        fail("non-finite entry");
}

const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "Optimal";
        case LpStatus::Infeasible: return "Infeasible";
        case LpStatus::Unbounded: return "Unbounded";
    }
    return "?";
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class Simplex {
public:
    Simplex(const LinearProgram& lp, const SimplexOptions& opt) : lp_(lp), opt_(opt) { build(); }

    LpSolution solve();

private:
    enum class Outcome { Optimal, Unbounded };

    void build();
    void refactor();
    Outcome run(const VectorXd& cost, bool allow_artificial);
    void pivot(Index r, Index q, const VectorXd& w);
    void drive_out_artificials();
    VectorXd full_primal() const;

    const LinearProgram& lp_;
    const SimplexOptions& opt_;
    Index n_ = 0;       // structural columns
    Index m_eq_ = 0;
    Index m_in_ = 0;
    Index m_ = 0;
    Index slack0_ = 0;  // first slack column
    Index art0_ = 0;    // first artificial column
    MatrixXd a_;
    VectorXd b_;
    VectorXd sign_;
    std::vector<Index> basis_;
    std::vector<Index> position_;  // basis position of a column, or -1
    std::vector<char> barred_;
    MatrixXd binv_;
    VectorXd xb_;
    std::size_t iterations_ = 0;
    std::size_t since_refactor_ = 0;
    std::size_t degenerate_run_ = 0;
    bool bland_ = false;
    Index ray_column_ = -1;
    VectorXd ray_direction_;
};

void Simplex::build() {
    n_ = lp_.objective.size();
    m_eq_ = lp_.eq_rhs.size();
    m_in_ = lp_.in_rhs.size();
    m_ = m_eq_ + m_in_;
    sign_ = VectorXd::Ones(m_);
    b_.resize(m_);
    for (Index i = 0; i < m_eq_; ++i) {
        b_[i] = lp_.eq_rhs[i];
        if (b_[i] < 0.0) sign_[i] = -1.0;
    }
    for (Index k = 0; k < m_in_; ++k) {
        b_[m_eq_ + k] = lp_.in_rhs[k];
        if (b_[m_eq_ + k] < 0.0) sign_[m_eq_ + k] = -1.0;
    }
    std::vector<Index> needs_artificial;
    for (Index i = 0; i < m_; ++i)
        if (i < m_eq_ || sign_[i] < 0.0) needs_artificial.push_back(i);

    slack0_ = n_;
    art0_ = n_ + m_in_;
    const Index cols = art0_ + static_cast<Index>(needs_artificial.size());
    a_ = MatrixXd::Zero(m_, cols);
    if (m_eq_ > 0) a_.topLeftCorner(m_eq_, n_) = lp_.eq_matrix;
    if (m_in_ > 0) a_.block(m_eq_, 0, m_in_, n_) = lp_.in_matrix;
    for (Index k = 0; k < m_in_; ++k) a_(m_eq_ + k, slack0_ + k) = 1.0;
    for (Index i = 0; i < m_; ++i) {
        a_.row(i) *= sign_[i];
        b_[i] *= sign_[i];
    }

    basis_.assign(m_, -1);
    position_.assign(cols, -1);
    barred_.assign(cols, 0);
    for (Index k = 0; k < m_in_; ++k)
        if (sign_[m_eq_ + k] > 0.0) basis_[m_eq_ + k] = slack0_ + k;
    for (std::size_t t = 0; t < needs_artificial.size(); ++t) {
        const Index row = needs_artificial[t];
        const Index col = art0_ + static_cast<Index>(t);
        a_(row, col) = 1.0;
        basis_[row] = col;
    }
    for (Index r = 0; r < m_; ++r) position_[basis_[r]] = r;
    binv_ = MatrixXd::Identity(m_, m_);
    xb_ = b_;
}

void Simplex::refactor() {
    if (m_ == 0) return;
    MatrixXd basis(m_, m_);
    for (Index r = 0; r < m_; ++r) basis.col(r) = a_.col(basis_[r]);
    Eigen::PartialPivLU<MatrixXd> lu(basis);
    binv_ = lu.inverse();
    xb_ = binv_ * b_;
    for (Index r = 0; r < m_; ++r)
        if (xb_[r] < 0.0 && xb_[r] > -opt_.feasibility_tol) xb_[r] = 0.0;
    since_refactor_ = 0;
}

void Simplex::pivot(Index r, Index q, const VectorXd& w) {
    const double theta = xb_[r] / w[r];
    xb_ -= theta * w;
    xb_[r] = theta;
    for (Index i = 0; i < m_; ++i)
        if (xb_[i] < 0.0 && xb_[i] > -opt_.feasibility_tol) xb_[i] = 0.0;
    const Eigen::RowVectorXd pivot_row = binv_.row(r) / w[r];
    for (Index i = 0; i < m_; ++i)
        if (i != r && w[i] != 0.0) binv_.row(i) -= w[i] * pivot_row;
    binv_.row(r) = pivot_row;
    position_[basis_[r]] = -1;
    basis_[r] = q;
    position_[q] = r;
    ++iterations_;
    if (++since_refactor_ >= opt_.refactor_interval) refactor();
}

Simplex::Outcome Simplex::run(const VectorXd& cost, bool allow_artificial) {
    const Index cols = a_.cols();
    const Index limit = allow_artificial ? cols : art0_;
    std::vector<char> rejected(cols, 0);
    VectorXd cb(m_);
    while (true) {
        if (iterations_ >= opt_.max_iterations) throw NumericalBreakdown("simplex iteration limit reached");
        for (Index r = 0; r < m_; ++r) cb[r] = cost[basis_[r]];
        const VectorXd y = binv_.transpose() * cb;
        const VectorXd d = cost.head(limit) - a_.leftCols(limit).transpose() * y;

        Index q = -1;
        double best = -opt_.optimality_tol;
        for (Index j = 0; j < limit; ++j) {
            if (position_[j] >= 0 || barred_[j] || rejected[j]) continue;
            if (bland_) {
                if (d[j] < -opt_.optimality_tol) {
                    q = j;
                    break;
                }
            } else if (d[j] < best) {
                best = d[j];
                q = j;
            }
        }
        if (q < 0) {
            if (std::any_of(rejected.begin(), rejected.end(), [](char c) { return c != 0; }))
                throw NumericalBreakdown("every improving column has a pivot below tolerance");
            return Outcome::Optimal;
        }

        const VectorXd w = binv_ * a_.col(q);
        double wmax = 0.0;
        for (Index i = 0; i < m_; ++i) wmax = std::max(wmax, w[i]);
        if (wmax <= 1e-12) {
            ray_column_ = q;
            ray_direction_ = w;
            return Outcome::Unbounded;
        }
        constexpr double kCandidate = 1e-9;
        Index r = -1;
        if (bland_) {
            double min_ratio = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < m_; ++i) {
                if (w[i] <= opt_.pivot_tol) continue;
                const double ratio = std::max(xb_[i], 0.0) / w[i];
                if (r < 0 || ratio < min_ratio - 1e-15) {
                    r = i;
                    min_ratio = ratio;
                } else if (ratio <= min_ratio + 1e-15 && basis_[i] < basis_[r]) {
                    r = i;
                }
            }
            if (r < 0 || w[r] < opt_.pivot_tol)
                throw NumericalBreakdown("pivot below tolerance under Bland's rule");
        } else {
            // Harris two-pass ratio test.
            double theta_max = std::numeric_limits<double>::infinity();
            for (Index i = 0; i < m_; ++i)
                if (w[i] > kCandidate)
                    theta_max = std::min(theta_max, (std::max(xb_[i], 0.0) + opt_.feasibility_tol) / w[i]);
            double best_pivot = 0.0;
            for (Index i = 0; i < m_; ++i) {
                if (w[i] <= kCandidate) continue;
                if (std::max(xb_[i], 0.0) / w[i] <= theta_max && w[i] > best_pivot) {
                    best_pivot = w[i];
                    r = i;
                }
            }
        }
        if (r < 0) {
            rejected[q] = 1;
            continue;
        }
        std::fill(rejected.begin(), rejected.end(), 0);
        const double theta = std::max(xb_[r], 0.0) / w[r];
        xb_[r] = std::max(xb_[r], 0.0);
        pivot(r, q, w);
        if (theta <= 1e-12) {
            if (++degenerate_run_ > 5 * static_cast<std::size_t>(std::max<Index>(m_, 1))) bland_ = true;
        } else {
            degenerate_run_ = 0;
        }
    }
}

void Simplex::drive_out_artificials() {
    for (Index r = 0; r < m_; ++r) {
        if (basis_[r] < art0_) continue;
        const Eigen::RowVectorXd row = binv_.row(r) * a_.leftCols(art0_);
        Index q = -1;
        double best = 1e-7;
        for (Index j = 0; j < art0_; ++j) {
            if (position_[j] >= 0) continue;
            if (std::abs(row[j]) > best) {
                best = std::abs(row[j]);
                q = j;
            }
        }
        if (q < 0) {
            // Redundant row: the artificial stays basic at zero and can never move.
            continue;
        }
        const VectorXd w = binv_ * a_.col(q);
        xb_[r] = 0.0;
        pivot(r, q, w);
    }
    for (Index j = art0_; j < a_.cols(); ++j)
        if (position_[j] < 0) barred_[j] = 1;
}

VectorXd Simplex::full_primal() const {
    VectorXd x = VectorXd::Zero(a_.cols());
    for (Index r = 0; r < m_; ++r) x[basis_[r]] = std::max(xb_[r], 0.0);
    return x;
}

LpSolution Simplex::solve() {
    LpSolution sol;
    const Index cols = a_.cols();
    const double b_scale = 1.0 + (m_ > 0 ? b_.cwiseAbs().maxCoeff() : 0.0);

    if (art0_ < cols) {
        VectorXd phase1 = VectorXd::Zero(cols);
        phase1.tail(cols - art0_).setOnes();
        run(phase1, true);
        refactor();
        double infeasibility = 0.0;
        for (Index r = 0; r < m_; ++r)
            if (basis_[r] >= art0_) infeasibility += std::max(xb_[r], 0.0);
        if (infeasibility > opt_.feasibility_tol * b_scale) {
            sol.status = LpStatus::Infeasible;
            sol.iterations = iterations_;
            sol.bland_used = bland_;
            return sol;
        }
        drive_out_artificials();
        refactor();
    }

    VectorXd cost = VectorXd::Zero(cols);
    cost.head(n_) = lp_.objective;
    degenerate_run_ = 0;
    const auto outcome = run(cost, false);
    sol.iterations = iterations_;
    sol.bland_used = bland_;
    if (outcome == Outcome::Unbounded) {
        sol.status = LpStatus::Unbounded;
        VectorXd dir = VectorXd::Zero(cols);
        dir[ray_column_] = 1.0;
        for (Index r = 0; r < m_; ++r) dir[basis_[r]] -= ray_direction_[r];
        sol.ray = dir.head(n_).cwiseMax(0.0);
        sol.objective = -std::numeric_limits<double>::infinity();
        return sol;
    }
    refactor();

    const VectorXd x = full_primal();
    VectorXd cb(m_);
    for (Index r = 0; r < m_; ++r) cb[r] = cost[basis_[r]];
    const VectorXd y = binv_.transpose() * cb;
    const VectorXd d = cost - a_.transpose() * y;

    sol.status = LpStatus::Optimal;
    sol.primal = x.head(n_);
    sol.objective = lp_.objective.dot(sol.primal);
    sol.reduced_costs = d.head(n_);
    sol.dual_eq.resize(m_eq_);
    sol.dual_in.resize(m_in_);
    for (Index i = 0; i < m_eq_; ++i) sol.dual_eq[i] = sign_[i] * y[i];
    for (Index k = 0; k < m_in_; ++k) sol.dual_in[k] = sign_[m_eq_ + k] * y[m_eq_ + k];

    double primal_res = 0.0;
    if (m_eq_ > 0) primal_res = (lp_.eq_matrix * sol.primal - lp_.eq_rhs).cwiseAbs().maxCoeff();
    VectorXd slack_values;
    if (m_in_ > 0) {
        slack_values = lp_.in_rhs - lp_.in_matrix * sol.primal;
        primal_res = std::max(primal_res, (-slack_values).cwiseMax(0.0).maxCoeff());
    }
    double dual_res = 0.0;
    for (Index j = 0; j < n_; ++j) dual_res = std::max(dual_res, -d[j]);
    for (Index k = 0; k < m_in_; ++k) dual_res = std::max(dual_res, sol.dual_in[k]);
    double comp = 0.0;
    for (Index j = 0; j < n_; ++j) comp = std::max(comp, std::abs(sol.primal[j] * d[j]));
    for (Index k = 0; k < m_in_; ++k) comp = std::max(comp, std::abs(sol.dual_in[k] * slack_values[k]));
    sol.primal_residual = primal_res;
    sol.dual_residual = std::max(dual_res, 0.0);
    sol.complementarity = comp;
    return sol;
}

}  // namespace

LpSolution simplex_solve(const LinearProgram& lp, const SimplexOptions& options) {
    lp.check();
    Simplex s(lp, options);
    return s.solve();
}

double OccupationMeasure::total_mass() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

OccupationMeasure make_measure(const FiniteInstance& inst, std::vector<double> weights) {
    if (weights.size() != inst.rows.size()) throw std::invalid_argument("measure size does not match rows");
    OccupationMeasure mu;
    mu.marginal.assign(inst.state_count, 0.0);
    for (std::size_t r = 0; r < weights.size(); ++r) mu.marginal[inst.rows[r].state] += weights[r];
    mu.weights = std::move(weights);
    return mu;
}

std::vector<double> attained_costs(const FiniteInstance& inst, const std::vector<double>& weights) {
    std::vector<double> out(inst.cost_count(), 0.0);
    for (std::size_t r = 0; r < inst.rows.size(); ++r)
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += (inst.rows[r].running[i] + inst.rows[r].boundary[i]) * weights[r];
    return out;
}

std::vector<double> balance_residuals(const FiniteInstance& inst, const std::vector<double>& weights) {
    std::vector<double> r(inst.state_count, 0.0);
    for (std::size_t j = 0; j < inst.state_count; ++j) r[j] = -inst.nu0[j];
    for (std::size_t k = 0; k < inst.rows.size(); ++k) {
        const auto& row = inst.rows[k];
        r[row.state] += weights[k];
        for (const auto& e : row.kernel) r[e.state] -= e.probability * weights[k];
    }
    return r;
}

std::string column_name(const InstanceRow& row) {
    return "mu_" + std::to_string(row.state) + "_" + std::to_string(row.pair.interior) + "_" +
           std::to_string(row.pair.boundary);
}

LinearProgram assemble_problem_p(const FiniteInstance& inst) {
    const auto n = static_cast<Eigen::Index>(inst.rows.size());
    const auto s = static_cast<Eigen::Index>(inst.state_count);
    const auto c = static_cast<Eigen::Index>(inst.limits.size());
    LinearProgram lp;
    lp.objective.resize(n);
    lp.eq_matrix = Eigen::MatrixXd::Zero(s, n);
    lp.eq_rhs.resize(s);
    lp.in_matrix = Eigen::MatrixXd::Zero(c, n);
    lp.in_rhs.resize(c);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& row = inst.rows[k];
        lp.objective[k] = row.running[0] + row.boundary[0];
        lp.eq_matrix(row.state, k) += 1.0;
        for (const auto& e : row.kernel) lp.eq_matrix(e.state, k) -= e.probability;
        for (Eigen::Index i = 0; i < c; ++i) lp.in_matrix(i, k) = row.running[i + 1] + row.boundary[i + 1];
        lp.column_names.push_back(column_name(row));
    }
    for (Eigen::Index j = 0; j < s; ++j) {
        lp.eq_rhs[j] = inst.nu0[j];
        lp.eq_names.push_back("bal_" + std::to_string(j));
    }
    for (Eigen::Index i = 0; i < c; ++i) {
        lp.in_rhs[i] = inst.limits[i];
        lp.in_names.push_back("con_" + std::to_string(i + 1));
    }
    return lp;
}

PdmpSolution solve_constrained_pdmp(const FiniteInstance& inst, const SimplexOptions& options) {
    const auto violations = validate_instance(inst);
    if (!violations.empty()) {
        std::string msg = "invalid instance:";
        for (const auto& v : violations) msg += "\n  [" + v.rule + "] " + v.message;
        throw std::invalid_argument(msg);
    }
    PdmpSolution out;
    out.lp = simplex_solve(assemble_problem_p(inst), options);
    if (out.lp.status != LpStatus::Optimal) return out;
    std::vector<double> w(out.lp.primal.data(), out.lp.primal.data() + out.lp.primal.size());
    out.measure = make_measure(inst, std::move(w));
    out.attained = attained_costs(inst, out.measure.weights);
    out.balance_residual = balance_residuals(inst, out.measure.weights);
    return out;
}

namespace {

std::string mps_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

void write_mps(std::ostream& out, const LinearProgram& lp, const std::string& name) {
    lp.check();
    auto col = [&](Eigen::Index j) {
        return lp.column_names.empty() ? "x" + std::to_string(j) : lp.column_names[j];
    };
    auto eq = [&](Eigen::Index i) { return lp.eq_names.empty() ? "e" + std::to_string(i) : lp.eq_names[i]; };
    auto in = [&](Eigen::Index i) { return lp.in_names.empty() ? "l" + std::to_string(i) : lp.in_names[i]; };

    out << "NAME          " << name << "\n";
    out << "ROWS\n";
    out << " N  obj\n";
    for (Eigen::Index i = 0; i < lp.eq_rhs.size(); ++i) out << " E  " << eq(i) << "\n";
    for (Eigen::Index i = 0; i < lp.in_rhs.size(); ++i) out << " L  " << in(i) << "\n";
    out << "COLUMNS\n";
    auto entry = [&](const std::string& c, const std::string& r, double v) {
        out << "    " << pad(c, 8) << "  " << pad(r, 8) << "  " << mps_number(v) << "\n";
    };
    for (Eigen::Index j = 0; j < lp.objective.size(); ++j) {
        const auto c = col(j);
        if (lp.objective[j] != 0.0) entry(c, "obj", lp.objective[j]);
        for (Eigen::Index i = 0; i < lp.eq_rhs.size(); ++i)
            if (lp.eq_matrix(i, j) != 0.0) entry(c, eq(i), lp.eq_matrix(i, j));
        for (Eigen::Index i = 0; i < lp.in_rhs.size(); ++i)
            if (lp.in_matrix(i, j) != 0.0) entry(c, in(i), lp.in_matrix(i, j));
    }
    out << "RHS\n";
    for (Eigen::Index i = 0; i < lp.eq_rhs.size(); ++i)
        if (lp.eq_rhs[i] != 0.0) entry("RHS", eq(i), lp.eq_rhs[i]);
    for (Eigen::Index i = 0; i < lp.in_rhs.size(); ++i)
        if (lp.in_rhs[i] != 0.0) entry("RHS", in(i), lp.in_rhs[i]);
    out << "ENDATA\n";
}

}  // namespace pdmp
