#include <cmath>
#include <vector>

#include <doctest.h>

#include "pdmp/errors.hpp"
#include "pdmp/quadrature.hpp"

using namespace pdmp;

TEST_SUITE("quadrature") {
    TEST_CASE("single panel integrates polynomials up to degree 22 exactly") {
        for (int degree = 0; degree <= 22; ++degree) {
            auto f = [degree](double t) { return (degree + 1) * std::pow(t, degree); };
            // int_0^2 (d+1) t^d dt = 2^(d+1)
            CHECK(kronrod_panel(f, 0.0, 2.0) == doctest::Approx(std::pow(2.0, degree + 1)).epsilon(1e-13));
        }
    }

    TEST_CASE("embedded Gauss estimate vanishes for low degree") {
        double error = 1.0;
        kronrod_panel([](double t) { return t * t * t; }, -1.0, 3.0, &error);
        CHECK(error < 1e-12);
    }

    TEST_CASE("adaptive integration reaches the requested tolerance") {
        QuadratureConfig q;
        q.abs_tol = 1e-12;
        q.rel_tol = 1e-12;
        const std::vector<double> cuts{0.0, 10.0};
        double err = 0.0;
        const double v = integrate_scalar([](double t) { return std::sin(t) * std::exp(-0.1 * t); }, cuts, q, &err);
        // int_0^10 e^{-t/10} sin t dt = (1 - e^{-1}(cos 10 + 0.1 sin 10)) / 1.01
        const double exact = (1.0 - std::exp(-1.0) * (std::cos(10.0) + 0.1 * std::sin(10.0))) / 1.01;
        CHECK(std::abs(v - exact) < 1e-11);
        CHECK(err <= 1e-11);
    }

    TEST_CASE("cuts at a jump keep the panels smooth") {
        QuadratureConfig q;
        const std::vector<double> cuts{0.0, 0.3, 1.0};
        const double v = integrate_scalar([](double t) { return t < 0.3 ? 1.0 : 5.0; }, cuts, q);
        CHECK(v == doctest::Approx(0.3 + 5.0 * 0.7).epsilon(1e-14));
    }

    TEST_CASE("vector integrand components share panels") {
        QuadratureConfig q;
        const std::vector<double> cuts{0.0, 1.0};
        const auto r = integrate(
            [](double t, Eigen::Ref<Eigen::VectorXd> out) {
                out[0] = std::exp(t);
                out[1] = 1.0 / (1.0 + t * t);
            },
            2, cuts, q);
        CHECK(r.value[0] == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));
        CHECK(r.value[1] == doctest::Approx(std::atan(1.0)).epsilon(1e-12));
    }

    TEST_CASE("exhausted budget raises") {
        QuadratureConfig q;
        q.abs_tol = 1e-14;
        q.rel_tol = 1e-14;
        q.max_subdivisions = 3;
        const std::vector<double> cuts{0.0, 1.0};
        CHECK_THROWS_AS(integrate_scalar([](double t) { return std::sqrt(t) * std::sin(50.0 * t); }, cuts, q),
                        QuadratureFailure);
    }

    TEST_CASE("invalid settings are rejected") {
        QuadratureConfig q;
        q.abs_tol = -1.0;
        CHECK_THROWS(q.validate());
    }
}
