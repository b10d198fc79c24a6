#include <cmath>
#include <sstream>

#include <doctest.h>

#include "pdmp/capacity.hpp"
#include "pdmp/policy.hpp"
#include "pdmp/realization.hpp"
#include "pdmp/simulator.hpp"
#include "support.hpp"

using namespace pdmp;

TEST_SUITE("simulator") {
    TEST_CASE("streams depend only on seed and index") {
        TrajectoryRng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
        bool differs_c = false, differs_d = false;
        for (int k = 0; k < 100; ++k) {
            const double x = a.uniform();
            CHECK(x == b.uniform());
            CHECK(x > 0.0);
            CHECK(x < 1.0);
            differs_c = differs_c || x != c.uniform();
            differs_d = differs_d || x != d.uniform();
        }
        CHECK(differs_c);
        CHECK(differs_d);
    }

    TEST_CASE("interjump times on the constant-rate cycle are exponential with rate one") {
        const auto inst = testing::two_state_cycle();
        const ConstantRateModel model(inst);
        TrajectoryRng rng(1, 0);
        const int n = 20000;
        double sum = 0.0;
        for (int k = 0; k < n; ++k) {
            const auto s = sample_interjump(model, model.state_point(0), 0, rng);
            CHECK_FALSE(s.boundary);
            sum += s.time;
        }
        CHECK(std::abs(sum / n - 1.0) < 4.0 / std::sqrt(n));
    }

    TEST_CASE("boundary hits happen exactly at the exit time") {
        const CapacityModel cap(testing::capacity_fixture());
        const StateId j = cap.state_id(0, 0, 2);
        const Point x = cap.state_point(j);
        const double t_star = cap.exit_time(x);
        TrajectoryRng rng(2, 0);
        int hits = 0;
        const int n = 20000;
        for (int k = 0; k < n; ++k) {
            const auto s = sample_interjump(cap, x, cap.actions(j).interior.front(), rng);
            CHECK(s.time <= t_star);
            if (s.boundary) {
                ++hits;
                CHECK(s.time == t_star);
            }
        }
        const double p = std::exp(-cap.params().lambda * t_star);
        CHECK(std::abs(hits / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
    }

    TEST_CASE("cycle estimates agree with the exact values") {
        const auto inst = testing::two_state_cycle();
        const ConstantRateModel model(inst);
        const auto phi = deterministic_policy(inst, {{0, 0}, {0, 0}});
        SimulationBudget budget;
        budget.trajectories = 20000;
        budget.seed = 5;
        const auto est = Simulator(model, phi, &inst).estimate(budget);
        // f = 1 makes the discounted cost deterministic up to truncation.
        REQUIRE(est.costs[0].truncation_bias);
        CHECK(std::abs(est.costs[0].mean - 1.0) <= *est.costs[0].truncation_bias + 4.0 * est.costs[0].standard_error);
        CHECK(std::abs(est.total_mass.mean - 2.0) < 4.0 * est.total_mass.standard_error);
        CHECK(std::abs(est.occupation[0].mean - 4.0 / 3.0) < 4.0 * est.occupation[0].standard_error);
        for (const auto& r : est.balance_residual) CHECK(std::abs(r.mean) <= 4.0 * r.standard_error + 1e-12);
        REQUIRE(est.costs[0].truncation_bias);
        CHECK(*est.costs[0].truncation_bias < 1e-7);
    }

    TEST_CASE("estimates are reproducible") {
        const auto inst = testing::two_state_cycle();
        const ConstantRateModel model(inst);
        const auto phi = deterministic_policy(inst, {{0, 0}, {0, 0}});
        SimulationBudget budget;
        budget.trajectories = 3000;
        const auto a = Simulator(model, phi, &inst).estimate(budget);
        const auto b = Simulator(model, phi, &inst).estimate(budget);
        CHECK(a.costs[0].mean == b.costs[0].mean);
        CHECK(a.costs[0].standard_error == b.costs[0].standard_error);
        CHECK(a.total_mass.mean == b.total_mass.mean);
    }

    TEST_CASE("recorded trajectories alternate on the cycle") {
        const auto inst = testing::two_state_cycle();
        const ConstantRateModel model(inst);
        const auto phi = deterministic_policy(inst, {{0, 0}, {0, 0}});
        const Simulator sim(model, phi, &inst);
        const auto s = sim.run(0, 0, 1e-8, 1000, true);
        REQUIRE(s.steps.size() > 2);
        for (std::size_t k = 0; k < s.steps.size(); ++k) {
            CHECK(s.steps[k].state == k % 2);
            if (k > 0) CHECK(s.steps[k].time > s.steps[k - 1].time);
        }
        CHECK(s.residual_discount < 1e-8);

        std::ostringstream csv;
        write_trajectories_csv(csv, sim, 0, 2, 1e-3);
        CHECK(csv.str().rfind("traj_id,k,T_k,Z_k,theta_k,theta_partial_k,boundary_hit\n", 0) == 0);
    }
}
