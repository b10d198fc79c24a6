#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pdmp/model.hpp"

namespace pdmp {

/// min c'x  s.t.  A_eq x = b_eq,  A_in x <= b_in,  x >= 0.
struct LinearProgram {
    Eigen::VectorXd objective;
    Eigen::MatrixXd eq_matrix;
    Eigen::VectorXd eq_rhs;
    Eigen::MatrixXd in_matrix;
    Eigen::VectorXd in_rhs;
    std::vector<std::string> column_names;
    std::vector<std::string> eq_names;
    std::vector<std::string> in_names;

    std::size_t columns() const { return static_cast<std::size_t>(objective.size()); }
    /// Throws std::invalid_argument on inconsistent dimensions or non-finite data.
    void check() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus s);

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    Eigen::VectorXd primal;
    /// Multipliers y_eq (free) and y_in (<= 0) with reduced costs c - A'y >= 0 at optimum.
    Eigen::VectorXd dual_eq;
    Eigen::VectorXd dual_in;
    Eigen::VectorXd reduced_costs;
    /// For Unbounded: a direction d >= 0 with A_eq d = 0, A_in d <= 0 and c'd < 0.
    Eigen::VectorXd ray;
    std::size_t iterations = 0;
    bool bland_used = false;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double complementarity = 0.0;
};

struct SimplexOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    /// Smallest pivot accepted once Bland's rule is active.
    double pivot_tol = 1e-11;
    std::size_t refactor_interval = 100;
    std::size_t max_iterations = 1000000;
};

/// Dense revised simplex, two phases, Dantzig pricing with a permanent switch to
/// Bland's rule after 5 * rows consecutive degenerate pivots. Deterministic.
LpSolution simplex_solve(const LinearProgram& lp, const SimplexOptions& options = {});

/// Weights mu_{j,k,i} indexed like FiniteInstance::rows, plus the state marginal.
struct OccupationMeasure {
    std::vector<double> weights;
    std::vector<double> marginal;

    double total_mass() const;
};

OccupationMeasure make_measure(const FiniteInstance& inst, std::vector<double> weights);

/// Sum over rows of (Lf_i + Hr_i) mu, for i = 0..n.
std::vector<double> attained_costs(const FiniteInstance& inst, const std::vector<double>& weights);

/// r_j = mu~_j - nu0_j - sum_p G(p; z_j) mu_p.
std::vector<double> balance_residuals(const FiniteInstance& inst, const std::vector<double>& weights);

/// Column name mu_j_k_i.
std::string column_name(const InstanceRow& row);

LinearProgram assemble_problem_p(const FiniteInstance& inst);

struct PdmpSolution {
    LpSolution lp;
    OccupationMeasure measure;
    /// Objective and constraint values attained by the measure.
    std::vector<double> attained;
    std::vector<double> balance_residual;
};

/// Validates, assembles and solves the occupation-measure LP.
/// Throws std::invalid_argument listing violations for a malformed instance.
PdmpSolution solve_constrained_pdmp(const FiniteInstance& inst, const SimplexOptions& options = {});

/// Fixed-column MPS. Names longer than the classic fields shift later fields, which
/// free-format readers accept.
void write_mps(std::ostream& out, const LinearProgram& lp, const std::string& name);

}  // namespace pdmp
