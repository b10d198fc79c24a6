#include <algorithm>
#include <cmath>

#include <doctest.h>

#include "pdmp/capacity.hpp"
#include "pdmp/operators.hpp"
#include "support.hpp"

using namespace pdmp;

TEST_SUITE("capacity") {
    TEST_CASE("investment grid is the closure of zero") {
        const auto grid = investment_grid(testing::capacity_fixture());
        const std::vector<double> expected{0.0, 0.25, 0.4375, 0.5, 0.625, 0.75, 0.8125, 0.875, 0.9375};
        REQUIRE(grid.size() == expected.size());
        for (std::size_t k = 0; k < grid.size(); ++k) CHECK(grid[k] == doctest::Approx(expected[k]));
    }

    TEST_CASE("growth polynomial and its root") {
        CHECK(growth_polynomial(1.0, 0.5) == doctest::Approx(-0.25));
        const double root = minimal_growth_rho(1.0);
        CHECK(root == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0));
        for (double ap : {0.3, 1.0, 2.5}) CHECK(std::abs(growth_polynomial(ap, minimal_growth_rho(ap))) < 1e-12);
    }

    TEST_CASE("state space and action sets") {
        const CapacityModel cap(testing::capacity_fixture());
        CHECK(cap.state_count() == 9 * 6 * 3);
        for (StateId j = 0; j < cap.state_count(); ++j) {
            const Point x = cap.state_point(j);
            const int mode = static_cast<int>(x[2]);
            const auto& acts = cap.actions(j);
            CHECK(std::is_sorted(acts.interior.begin(), acts.interior.end()));
            if (mode == 0) {
                CHECK(std::isinf(cap.exit_time(x)));
            } else {
                CHECK(cap.exit_time(x) == doctest::Approx((1.0 - x[0]) / cap.params().gamma[mode - 1]));
                for (ActionId a : acts.interior) CHECK(cap.action_mode(a) != static_cast<ModeId>(mode));
            }
        }
        CHECK(cap.state_id(cap.grid_index(0.5), 3, 1) < cap.state_count());
    }

    TEST_CASE("snapping picks the nearest grid point") {
        const CapacityModel cap(testing::capacity_fixture());
        CHECK(cap.grid()[cap.snap(0.3)] == 0.25);
        CHECK(cap.grid()[cap.snap(0.49)] == 0.5);
        CHECK(cap.grid()[cap.snap(0.99)] == 0.9375);
        CHECK(cap.max_snap_distance() <= 0.125 + 1e-12);
    }

    TEST_CASE("completion resets the project and lowers demand") {
        const CapacityModel cap(testing::capacity_fixture());
        const StateId j = cap.state_id(2, 3, 1);
        const Point z = cap.flow(cap.state_point(j), cap.exit_time(cap.state_point(j)));
        CHECK(z[0] == doctest::Approx(1.0));
        for (ActionId b : cap.actions(j).boundary) {
            const auto out = cap.boundary_jump(z, b);
            REQUIRE(out.size() == 1);
            const Point y = cap.state_point(out[0].state);
            CHECK(y[0] == 0.0);
            CHECK(y[1] == 2.0);
        }
    }

    TEST_CASE("quadrature rows agree with the closed form") {
        const CapacityModel cap(testing::capacity_fixture());
        for (StateId j = 0; j < cap.state_count(); j += 11) {
            const auto& acts = cap.actions(j);
            const ActionPair pair{acts.interior.back(), acts.boundary.back()};
            const auto q = evaluate_row(cap, cap.state_point(j), pair);
            const auto c = closed_form_G(cap, j, pair);
            for (const auto& e : c.kernel) CHECK(std::abs(mass_at(q.kernel, e.state) - e.probability) < 1e-9);
            CHECK(std::abs(q.sojourn - c.sojourn) < 1e-9);
            CHECK(std::abs(q.running[0] - c.running[0]) < 1e-9);
        }
    }

    TEST_CASE("invalid parameters are rejected") {
        auto p = testing::capacity_fixture();
        p.gamma = {1.0, -2.0};
        CHECK_THROWS(p.validate());
        p = testing::capacity_fixture();
        p.initial_s = 0.3;
        CHECK_THROWS(CapacityModel{p});
        p = testing::capacity_fixture();
        p.limits.push_back(1.0);
        CHECK_THROWS(p.validate());
    }
}
