#include <random>

#include <doctest.h>

#include "pdmp/lp.hpp"
#include "pdmp/mdp.hpp"
#include "support.hpp"

using namespace pdmp;

TEST_SUITE("mdp") {
    TEST_CASE("augmentation produces a stochastic MDP with a cemetery") {
        std::mt19937_64 rng(21);
        for (int k = 0; k < 10; ++k) {
            const auto inst = testing::random_instance(rng, {});
            const auto mdp = augment_delta(inst);
            CHECK(validate_mdp(mdp).empty());
            REQUIRE(mdp.cemetery);
            CHECK(*mdp.cemetery == inst.state_count);
            CHECK(mdp.state_count == inst.state_count + 1);
            CHECK(mdp.limits.size() == inst.limits.size() + 1);
            CHECK(mdp.limits.back() == 0.0);
            for (const auto& row : mdp.rows) CHECK(total_mass(row.transition) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    TEST_CASE("cemetery carries no mass at the optimum") {
        std::mt19937_64 rng(22);
        const auto inst = testing::random_instance(rng, {});
        const auto mdp = augment_delta(inst);
        const auto sol = solve_total_cost_lp(mdp);
        REQUIRE(sol.lp.status == LpStatus::Optimal);
        for (std::size_t r = 0; r < mdp.rows.size(); ++r)
            if (mdp.rows[r].state == *mdp.cemetery) CHECK(sol.occupation[r] == doctest::Approx(0.0));
        CHECK(sol.lp.objective == doctest::Approx(solve_constrained_pdmp(inst).lp.objective).epsilon(1e-9));
    }

    TEST_CASE("non-stochastic rows are reported") {
        auto mdp = augment_delta(testing::two_state_cycle());
        mdp.rows[0].transition[0].probability = 0.9;
        CHECK_FALSE(validate_mdp(mdp).empty());
    }
}
