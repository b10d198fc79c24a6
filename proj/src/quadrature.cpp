#include "pdmp/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

// Kronrod abscissae (descending) and weights; odd indices are the Gauss-7 nodes.
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Panel {
    double a = 0.0;
    double b = 0.0;
    Eigen::VectorXd value;
    Eigen::VectorXd error;
    double priority = 0.0;
};

struct PanelOrder {
    bool operator()(const Panel& x, const Panel& y) const {
        if (x.priority != y.priority) return x.priority < y.priority;
        return x.a > y.a;
    }
};

void evaluate_panel(const VectorIntegrand& f, Panel& p, std::size_t dim, Eigen::VectorXd& scratch) {
    const double center = 0.5 * (p.a + p.b);
    const double half = 0.5 * (p.b - p.a);
    Eigen::VectorXd kron = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd gauss = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd absolute = Eigen::VectorXd::Zero(dim);

    f(center, scratch);
    kron += kWgk[7] * scratch;
    gauss += kWg[3] * scratch;
    absolute += kWgk[7] * scratch.cwiseAbs();
    for (int i = 0; i < 7; ++i) {
        const double dx = half * kXgk[i];
        for (double t : {center - dx, center + dx}) {
            f(t, scratch);
            kron += kWgk[i] * scratch;
            absolute += kWgk[i] * scratch.cwiseAbs();
            if (i % 2 == 1) gauss += kWg[i / 2] * scratch;
        }
    }
    p.value = kron * half;
    p.error = ((kron - gauss) * half).cwiseAbs();
    // Roundoff floor, as in QUADPACK.
    p.error = p.error.cwiseMax(50.0 * kEps * std::abs(half) * absolute);
}

}  // namespace

void QuadratureConfig::validate() const {
    if (!(abs_tol >= 1e-13) || !(rel_tol >= 1e-13))
        throw std::invalid_argument("quadrature tolerances must be at least 1e-13");
    if (max_subdivisions == 0) throw std::invalid_argument("max_subdivisions must be positive");
    if (!(tail_epsilon > 0.0 && tail_epsilon < 1.0)) throw std::invalid_argument("tail_epsilon must lie in (0, 1)");
}

QuadratureConfig QuadratureConfig::scaled(double factor) const {
    QuadratureConfig c = *this;
    c.abs_tol *= factor;
    c.rel_tol *= factor;
    return c;
}

QuadratureResult integrate(const VectorIntegrand& f, std::size_t dim, std::span<const double> cuts,
                           const QuadratureConfig& config) {
    if (cuts.size() < 2) throw std::invalid_argument("integrate: need at least two cut points");
    for (std::size_t i = 1; i < cuts.size(); ++i)
        if (!(cuts[i] > cuts[i - 1]) || !std::isfinite(cuts[i]))
            throw std::invalid_argument("integrate: cut points must be finite and strictly increasing");

    Eigen::VectorXd scratch(dim);
    std::vector<Panel> initial;
    initial.reserve(cuts.size() - 1);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd total_error = Eigen::VectorXd::Zero(dim);
    for (std::size_t i = 1; i < cuts.size(); ++i) {
        Panel p{cuts[i - 1], cuts[i], {}, {}, 0.0};
        evaluate_panel(f, p, dim, scratch);
        total += p.value;
        total_error += p.error;
        initial.push_back(std::move(p));
    }

    auto tolerance = [&](const Eigen::VectorXd& value) {
        return (config.rel_tol * value.cwiseAbs()).cwiseMax(config.abs_tol);
    };
    auto converged = [&]() { return (total_error.array() <= tolerance(total).array()).all(); };

    QuadratureResult result;
    if (converged()) {
        result.value = total;
        result.error = total_error;
        return result;
    }

    // Priorities use the tolerance at the start; each panel is ranked by its worst
    // component relative to that scale.
    const Eigen::VectorXd scale = tolerance(total);
    auto priority = [&](const Panel& p) { return (p.error.array() / scale.array()).maxCoeff(); };
    std::priority_queue<Panel, std::vector<Panel>, PanelOrder> heap;
    for (auto& p : initial) {
        p.priority = priority(p);
        heap.push(std::move(p));
    }

    std::size_t splits = 0;
    while (!converged()) {
        if (splits >= config.max_subdivisions)
            throw QuadratureFailure("quadrature did not reach tolerance within " +
                                    std::to_string(config.max_subdivisions) + " subdivisions (error " +
                                    std::to_string(total_error.maxCoeff()) + ")");
        Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            throw QuadratureFailure("quadrature panel collapsed near t = " + std::to_string(worst.a));
        }
        Panel left{worst.a, mid, {}, {}, 0.0};
        Panel right{mid, worst.b, {}, {}, 0.0};
        evaluate_panel(f, left, dim, scratch);
        evaluate_panel(f, right, dim, scratch);
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        total_error = total_error.cwiseMax(0.0);
        left.priority = priority(left);
        right.priority = priority(right);
        heap.push(std::move(left));
        heap.push(std::move(right));
        ++splits;
    }

    // Resum from the panels to drop the drift of the running updates.
    result.value = Eigen::VectorXd::Zero(dim);
    result.error = Eigen::VectorXd::Zero(dim);
    std::vector<Panel> panels;
    panels.reserve(heap.size());
    while (!heap.empty()) {
        panels.push_back(heap.top());
        heap.pop();
    }
    std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
    for (const auto& p : panels) {
        result.value += p.value;
        result.error += p.error;
    }
    result.subdivisions = splits;
    return result;
}

void kronrod_panel(const VectorIntegrand& f, double a, double b, Eigen::Ref<Eigen::VectorXd> value,
                   Eigen::Ref<Eigen::VectorXd> error) {
    const auto dim = static_cast<std::size_t>(value.size());
    Panel p{a, b, {}, {}, 0.0};
    Eigen::VectorXd scratch(dim);
    evaluate_panel(f, p, dim, scratch);
    value = p.value;
    error = p.error;
}

double integrate_scalar(const std::function<double(double)>& f, std::span<const double> cuts,
                        const QuadratureConfig& config, double* error) {
    VectorIntegrand g = [&f](double t, Eigen::Ref<Eigen::VectorXd> out) { out[0] = f(t); };
    auto r = integrate(g, 1, cuts, config);
    if (error) *error = r.error[0];
    return r.value[0];
}

double kronrod_panel(const std::function<double(double)>& f, double a, double b, double* error) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kron = kWgk[7] * fc;
    double gauss = kWg[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double dx = half * kXgk[i];
        const double s = f(center - dx) + f(center + dx);
        kron += kWgk[i] * s;
        if (i % 2 == 1) gauss += kWg[i / 2] * s;
    }
    if (error) *error = std::abs((kron - gauss) * half);
    return kron * half;
}

}  // namespace pdmp
