#include <random>
#include <sstream>

#include <doctest.h>

#include "pdmp/errors.hpp"
#include "pdmp/io.hpp"
#include "pdmp/lp.hpp"
#include "support.hpp"

using namespace pdmp;

TEST_SUITE("io") {
    TEST_CASE("tabulated instances round-trip exactly") {
        std::mt19937_64 rng(41);
        for (int k = 0; k < 10; ++k) {
            const auto inst = testing::random_instance(rng, {});
            const auto text = dump_json(instance_to_json(inst));
            const auto back = instance_from_json(parse_json(text, "memory"));
            REQUIRE(back.rows.size() == inst.rows.size());
            CHECK(back.nu0 == inst.nu0);
            CHECK(back.limits == inst.limits);
            CHECK(back.alpha == inst.alpha);
            for (std::size_t r = 0; r < inst.rows.size(); ++r) {
                CHECK(back.rows[r].kernel == inst.rows[r].kernel);
                CHECK(back.rows[r].running == inst.rows[r].running);
                CHECK(back.rows[r].sojourn == inst.rows[r].sojourn);
            }
            CHECK(dump_json(instance_to_json(back)) == text);
        }
    }

    TEST_CASE("capacity parameters round-trip") {
        const auto p = testing::capacity_fixture();
        const auto back = capacity_from_json(capacity_to_json(p));
        CHECK(back.gamma == p.gamma);
        CHECK(back.limits == p.limits);
        CHECK(back.costs.size() == p.costs.size());
        CHECK(back.costs[1].rate == p.costs[1].rate);
    }

    TEST_CASE("policies round-trip") {
        std::mt19937_64 rng(42);
        const auto inst = testing::random_instance(rng, {});
        const auto sol = solve_constrained_pdmp(inst);
        const auto phi = disintegrate(sol.measure, inst);
        const auto back = policy_from_json(policy_to_json(phi));
        REQUIRE(back.state_count() == phi.state_count());
        for (std::size_t j = 0; j < phi.state_count(); ++j) {
            CHECK(back.provenance[j] == phi.provenance[j]);
            for (const auto& c : phi.choices[j]) CHECK(back.probability(j, c.pair) == c.probability);
        }
    }

    TEST_CASE("syntax errors carry a location") {
        try {
            parse_json("{\n  \"a\": [1,\n  }", "broken.json");
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("broken.json:3:") != std::string::npos);
        }
    }

    TEST_CASE("unknown kinds and missing keys are parse errors") {
        CHECK_THROWS_AS(load_instance(parse_json(R"({"kind": "other"})", "x")), ParseError);
        CHECK_THROWS_AS(load_instance(parse_json(R"({"kind": "tabulated", "alpha": 1})", "x")), ParseError);
    }

    TEST_CASE("digest follows content, not formatting") {
        const auto a = parse_json(R"({"x": 1.5, "y": [1, 2]})", "a");
        const auto b = parse_json("{\n \"x\" : 1.5,\n \"y\":[1,2]\n}", "b");
        const auto c = parse_json(R"({"x": 1.5, "y": [1, 3]})", "c");
        CHECK(digest(a) == digest(b));
        CHECK(digest(a) != digest(c));
        CHECK(digest(a).size() == 16);
    }

    TEST_CASE("number formatting round-trips") {
        for (double x : {0.1, 1.0 / 3.0, 1e-300, 123456789.125}) CHECK(std::stod(format_number(x)) == x);
    }

    TEST_CASE("fixtures load with their models") {
        const auto cycle = load_instance_file(PDMP_FIXTURE_DIR "/two_state_cycle.json");
        CHECK(cycle.kind == InstanceKind::Tabulated);
        CHECK(cycle.model != nullptr);
        CHECK(validate_instance(cycle.instance).empty());

        std::ostringstream csv;
        const auto sol = solve_constrained_pdmp(cycle.instance);
        write_measure_csv(csv, cycle.instance, sol.measure);
        CHECK(csv.str().rfind("state,interior_action,boundary_action,mu\n", 0) == 0);
    }

    TEST_CASE("instances with boundary rows load without a simulation model") {
        std::mt19937_64 rng(43);
        const auto inst = testing::random_instance(rng, {});
        const auto loaded = load_instance(instance_to_json(inst));
        CHECK(loaded.model == nullptr);
        CHECK_FALSE(loaded.model_note.empty());
    }
}
