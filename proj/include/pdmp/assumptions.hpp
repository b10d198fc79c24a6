#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/lp.hpp"
#include "pdmp/model.hpp"
#include "pdmp/operators.hpp"

namespace pdmp {

/// A point on the flow from state `state` under interior action `action`, at time `t`.
struct Probe {
    StateId state = 0;
    ActionId action = 0;
    double t = 0.0;
    /// True for the boundary point phi(z, t*(z)).
    bool boundary = false;
};

struct ProbeOptions {
    /// Chebyshev points per flow segment.
    std::size_t chebyshev_points = 33;
    QuadratureConfig quad;
};

/// Chebyshev-spaced times on [0, horizon] for every (state, interior action), plus
/// breakpoints, both endpoints and one boundary probe per finite exit.
std::vector<Probe> make_probes(const PdmpModel& model, const ProbeOptions& options = {});

/// Smallest margin of one inequality and where it occurs.
struct MarginReport {
    std::string name;
    double min_margin = std::numeric_limits<double>::infinity();
    std::optional<Probe> argmin;
    std::optional<ActionId> argmin_boundary_action;
    std::size_t evaluated = 0;
    bool pass = true;
};

struct RateBoundReport {
    /// The declared floor itself, which must be positive where t* is infinite.
    MarginReport positivity;
    MarginReport lower;
    MarginReport upper;
    /// sup over probed states of int_0^{t*} exp(-int lambda_lower) dt.
    double k_lambda = 0.0;
    /// Same, restricted to states with a finite exit time.
    double k_lambda_finite = 0.0;
    std::optional<double> declared_k_lambda;
    bool pass = true;
};

RateBoundReport check_rate_bounds(const PdmpModel& model, const std::vector<Probe>& probes,
                                  const QuadratureConfig& quad = {});

/// v, b, c of the expected growth condition.
struct GrowthCertificate {
    std::function<double(const Point&)> v;
    /// b(x, mode).
    std::function<double(const Point&, ModeId)> b;
    double c = 0.0;
    /// Derivative of v along the flow; central differences are used when absent.
    std::function<double(const Point&)> flow_derivative;
    std::string description;
};

inline constexpr double kMarginTolerance = -1e-8;

struct GrowthReport {
    /// (i) Xv + cv - lambda [v - Qv] <= b.
    MarginReport drift;
    /// (ii) lambda + b / (c + alpha) <= v.
    MarginReport rate_domination;
    /// (iii) v(phi(x, t*)) >= Qv(., a_d) + c + alpha.
    MarginReport boundary;
    bool certificate_valid = true;
    bool pass = true;
};

/// Evaluates the three inequalities at every probe. Qv uses the raw landing points
/// reported by the model, before projection onto the enumerated states.
GrowthReport check_growth(const PdmpModel& model, const GrowthCertificate& cert, const std::vector<Probe>& probes,
                          double fd_step = 1e-5);

/// Directional derivative of v along the flow at phi(x, t) by central differences
/// with step h (1 + |t|); one-sided near t = 0.
double flow_derivative_fd(const PdmpModel& model, const std::function<double(const Point&)>& v, const Point& x,
                          double t, double h = 1e-5);

struct MassBoundReport {
    double mass = 0.0;
    double bound = 0.0;
    bool pass = true;
};

/// total mass <= nu0(v) / (c + alpha) + 1 (+ 1e-7).
MassBoundReport mass_bound(const PdmpModel& model, const GrowthCertificate& cert, double total_mass);
MassBoundReport mass_bound(const GrowthCertificate& cert, const FiniteInstance& inst,
                           const std::vector<Point>& state_points, const OccupationMeasure& mu);

struct PositivityReport {
    double min_w = 0.0;
    double min_w0 = 0.0;
    bool pass = true;
};

/// w = c0 + Lf_0 + Hr_0 and w0 = min over feasible pairs of w, both at every state.
PositivityReport check_w_positivity(const FiniteInstance& inst, double c0 = 1.0);

}  // namespace pdmp
