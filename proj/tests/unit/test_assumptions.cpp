#include <cmath>

#include <doctest.h>

#include "pdmp/assumptions.hpp"
#include "pdmp/capacity.hpp"
#include "pdmp/lp.hpp"
#include "support.hpp"

using namespace pdmp;

namespace {

CapacityParams small_capacity() {
    auto p = testing::capacity_fixture();
    p.demand_cap = 2;
    return p;
}

}  // namespace

TEST_SUITE("assumptions") {
    TEST_CASE("probes cover every flow segment and boundary") {
        const CapacityModel cap(small_capacity());
        ProbeOptions po;
        po.chebyshev_points = 5;
        const auto probes = make_probes(cap, po);
        std::size_t boundary = 0;
        for (const auto& p : probes) {
            if (p.boundary) {
                ++boundary;
                CHECK(p.t == cap.exit_time(cap.state_point(p.state)));
            }
        }
        CHECK(boundary > 0);
        CHECK(probes.size() > boundary);
    }

    TEST_CASE("rate bounds on the capacity model") {
        const CapacityModel cap(small_capacity());
        const auto r = check_rate_bounds(cap, make_probes(cap));
        CHECK(r.pass);
        CHECK(r.k_lambda_finite == doctest::Approx(capacity_k_lambda(cap.params())).epsilon(1e-8));
    }

    TEST_CASE("exponential certificate passes above the root of g") {
        const CapacityModel cap(small_capacity());
        const auto probes = make_probes(cap);
        const double ap = alpha_prime(cap.params());
        const double root = minimal_growth_rho(ap);
        CHECK(check_growth(cap, capacity_certificate(cap.params(), root + 0.05), probes).pass);
        const auto bad = check_growth(cap, capacity_certificate(cap.params(), root - 0.05), probes);
        CHECK_FALSE(bad.pass);
        CHECK(bad.boundary.min_margin < 0.0);
        REQUIRE(bad.boundary.argmin);
        // The violation sits at zero demand, where completion cannot lower m.
        CHECK(cap.state_point(bad.boundary.argmin->state)[1] == 0.0);
    }

    TEST_CASE("boundary margin at zero demand equals alpha g(rho) / (1 + alpha' rho)") {
        const CapacityModel cap(small_capacity());
        const auto& p = cap.params();
        const double ap = alpha_prime(p);
        for (double rho : {0.3, 0.5, 0.9}) {
            const auto r = check_growth(cap, capacity_certificate(p, rho), make_probes(cap));
            const double expected = p.alpha * growth_polynomial(ap, rho) / (1.0 + ap * rho);
            CHECK(r.boundary.min_margin == doctest::Approx(std::min(expected, r.boundary.min_margin)));
            if (expected < 0.0) CHECK(r.boundary.min_margin == doctest::Approx(expected).epsilon(1e-9));
        }
    }

    TEST_CASE("finite-difference flow derivative on the ramp") {
        testing::RampModel ramp;
        auto v = [](const Point& x) { return x[0] * x[0]; };
        for (double t : {0.0, 0.3, 2.0}) {
            const Point x = ramp.state_point(1);
            CHECK(flow_derivative_fd(ramp, v, x, t) == doctest::Approx(2.0 * (x[0] + t)).epsilon(1e-6));
        }
    }

    TEST_CASE("mass bound for the cycle under a constant certificate") {
        const auto inst = testing::two_state_cycle();
        const auto sol = solve_constrained_pdmp(inst);
        GrowthCertificate cert;
        cert.v = [](const Point&) { return 1.0; };
        cert.b = [](const Point&, ModeId) { return 0.0; };
        cert.c = 0.0;
        Point p(1);
        p[0] = 0.0;
        const auto m = mass_bound(cert, inst, {p, p}, sol.measure);
        CHECK(m.mass == doctest::Approx(2.0));
        CHECK(m.bound == doctest::Approx(2.0));
        CHECK(m.pass);
    }

    TEST_CASE("w positivity") {
        const auto r = check_w_positivity(testing::two_state_cycle());
        CHECK(r.min_w == doctest::Approx(1.5));
        CHECK(r.min_w0 == doctest::Approx(1.5));
        CHECK(r.pass);
    }
}
