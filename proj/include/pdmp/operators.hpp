#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/quadrature.hpp"

namespace pdmp {

/// Horizon used in place of t*(x): t*(x) itself when finite, otherwise
/// -ln(tail_epsilon) / (alpha + rate floor). Throws UnboundedHorizon without a floor.
double integration_horizon(const PdmpModel& model, const Point& x, const QuadratureConfig& quad);

/// Cached cumulative rate t -> Lambda^a(x, t) along one flow segment.
///
/// Nodes are placed at every breakpoint and refined until a single Kronrod panel
/// resolves the rate on each node interval; values between nodes are a panel
/// integral from the node to the left, so the profile is nondecreasing.
class RateProfile {
public:
    RateProfile(const PdmpModel& model, Point x, ActionId a, double horizon, const QuadratureConfig& quad);

    double operator()(double t) const;
    double horizon() const { return nodes_.back(); }
    const Point& origin() const { return x_; }
    ActionId action() const { return a_; }
    /// Accumulated error bound of the node values.
    double error() const { return error_; }

    /// Smallest t >= 0 with Lambda(t) = level, to within `t_tol`. Extends past the
    /// horizon by integrating further when needed. Throws UnboundedHorizon when the
    /// rate is too small to ever reach `level`.
    double invert(double level, double t_tol = 1e-10) const;

private:
    double rate_at(double t) const;
    double segment(double a, double b) const;

    const PdmpModel* model_;
    Point x_;
    ActionId a_;
    std::vector<double> nodes_;
    std::vector<double> values_;
    double error_ = 0.0;
};

/// Lambda^a(x, t).
double cumulative_rate(const PdmpModel& model, const Point& x, ActionId a, double t,
                       const QuadratureConfig& quad = {});

struct OperatorValue {
    double value = 0.0;
    double error = 0.0;
    /// True when t*(x) is infinite and no bound on the integrand was available to
    /// certify the truncated tail.
    bool uncertified_tail = false;
};

/// Function of (point, action) fed to L and H.
using PointActionFunction = std::function<double(const Point&, ActionId)>;

/// L g(x, pair) = int_0^{t*} exp(-alpha s - Lambda^a(x,s)) g(phi(x,s), a) ds.
/// `g_bound` certifies the tail when t*(x) is infinite.
OperatorValue operator_L(const PdmpModel& model, const Point& x, ActionPair pair, const PointActionFunction& g,
                         const QuadratureConfig& quad = {}, std::optional<double> g_bound = {});

/// H w(x, pair) = exp(-alpha t* - Lambda^a(x,t*)) w(phi(x,t*), a_boundary); 0 when t* is infinite.
double operator_H(const PdmpModel& model, const Point& x, ActionPair pair, const PointActionFunction& w,
                  const QuadratureConfig& quad = {});

struct KernelRow {
    SparseDistribution distribution;
    double error = 0.0;
};

/// G(x, pair; .) over the enumerated post-jump states.
KernelRow operator_G(const PdmpModel& model, const Point& x, ActionPair pair, const QuadratureConfig& quad = {});

/// Every one-stage quantity of a row, integrated together.
struct RowValues {
    SparseDistribution kernel;
    std::vector<double> running;
    std::vector<double> boundary;
    double sojourn = 0.0;
    double boundary_weight = 0.0;
    /// L(lambda + alpha)(x, pair); equals 1 - boundary_weight.
    double rate_plus_discount = 0.0;
    double error = 0.0;
    bool uncertified_tail = false;
};

RowValues evaluate_row(const PdmpModel& model, const Point& x, ActionPair pair, const QuadratureConfig& quad = {});
RowValues evaluate_row(const PdmpModel& model, const RateProfile& profile, ActionId boundary_action,
                       const QuadratureConfig& quad);

/// Evaluates every (state, pair) of the model into a FiniteInstance. Rows are
/// computed in parallel (see thread_budget()); the result does not depend on the
/// thread count.
FiniteInstance tabulate(const PdmpModel& model, const QuadratureConfig& quad = {});

/// Worker threads allowed: hardware concurrency capped by PDMP_LP_THREADS.
unsigned thread_budget();

}  // namespace pdmp
