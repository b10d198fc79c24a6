#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include <Eigen/Core>

namespace pdmp {

struct QuadratureConfig {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    std::size_t max_subdivisions = 4000;
    /// Truncation threshold for flows that never reach the boundary.
    double tail_epsilon = 1e-12;

    /// Throws std::invalid_argument on out-of-range settings.
    void validate() const;
    /// Same configuration with both tolerances scaled by `factor`.
    QuadratureConfig scaled(double factor) const;
};

struct QuadratureResult {
    Eigen::VectorXd value;
    /// Summed error estimate per component.
    Eigen::VectorXd error;
    std::size_t subdivisions = 0;
};

/// Vector-valued integrand: writes f(t) into `out` (already sized).
using VectorIntegrand = std::function<void(double t, Eigen::Ref<Eigen::VectorXd> out)>;

/// Globally adaptive Gauss-Kronrod (7/15) quadrature over the panels delimited by
/// `cuts` (strictly increasing, at least two points). Panels are never merged, so
/// discontinuities placed on a cut do not slow convergence.
///
/// Stops when every component satisfies error <= max(abs_tol, rel_tol * |value|).
/// Throws QuadratureFailure when the subdivision budget runs out first.
QuadratureResult integrate(const VectorIntegrand& f, std::size_t dim, std::span<const double> cuts,
                           const QuadratureConfig& config);

/// Scalar convenience wrapper.
double integrate_scalar(const std::function<double(double)>& f, std::span<const double> cuts,
                        const QuadratureConfig& config, double* error = nullptr);

/// Single 15-point Kronrod panel of a vector integrand on [a, b]. `error` receives
/// |K15 - G7| per component with a roundoff floor.
void kronrod_panel(const VectorIntegrand& f, double a, double b, Eigen::Ref<Eigen::VectorXd> value,
                   Eigen::Ref<Eigen::VectorXd> error);

/// Single 15-point Kronrod panel on [a, b]; also returns |K15 - G7|.
double kronrod_panel(const std::function<double(double)>& f, double a, double b, double* error = nullptr);

}  // namespace pdmp
