#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "tensorbundle/verify.hpp"

using namespace tbundle;

TEST_CASE("config text parses into a scenario with overrides applied") {
    const std::string text =
        "# comment line\n"
        "name = widened sphere   # trailing comment\n"
        "base.preset = sphere\n"
        "base.radius = 2\n"
        "f.expr = exp(x1/5)\n"
        "bundle.p = 0\n"
        "bundle.q = 2\n"
        "box.2.min = -1.5\n"
        "box.2.max = 1.5\n"
        "tol.lc.metricity = 1e-7\n"
        "seed = 99\n"
        "samples = 12\n";
    const Scenario sc = parse_scenario(text);
    CHECK(sc.name == "widened sphere");
    CHECK(sc.preset == "sphere");
    CHECK(sc.radius == 2.0);
    CHECK(sc.p == 0);
    CHECK(sc.q == 2);
    CHECK(sc.seed == 99);
    CHECK(sc.samples == 12);
    REQUIRE(sc.tol.count("lc.metricity") == 1);
    CHECK(sc.tol.at("lc.metricity") == 1e-7);

    const ManifoldChart chart = scenario_chart(sc);
    CHECK(chart.box[1].first == -1.5);
    CHECK(chart.box[1].second == 1.5);
    CHECK(scenario_type(sc).fiber_dim(chart.n) == 4);

    SECTION("missing name synthesizes a label") {
        const Scenario bare = parse_scenario("base.preset = euclidean\n");
        CHECK(bare.name == "euclidean f=1 p=1 q=1");
    }

    SECTION("custom metric entries mirror to the lower triangle") {
        const Scenario cs = parse_scenario(
            "base.preset = custom\n"
            "base.n = 2\n"
            "base.g.1.1 = 1 + x2^2\n"
            "base.g.1.2 = x1*x2/2\n"
            "base.g.2.2 = 1 + x1^2\n");
        const ManifoldChart ch = scenario_chart(cs);
        const BaseGeometry geo = geometry_at(ch, {0.3, -0.4}, 1);
        CHECK(geo.g[0][1] == geo.g[1][0]);
        CHECK(geo.g[0][0] == Catch::Approx(1.16).margin(1e-15));
        CHECK(geo.g[0][1] == Catch::Approx(-0.06).margin(1e-15));
    }
}

TEST_CASE("config errors carry the field path") {
    CHECK_THROWS_AS(parse_scenario("base.preset = torus\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("base.preset = sphere\nbase.n = four\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("base.preset = sphere\ntol.geo.energy = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("flavor = up\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario("base.preset = sphere\nno equals sign here\n"), ConfigError);
    CHECK_THROWS_AS(parse_scenario(""), ConfigError); // preset is required

    // Errors raised while building, not parsing, are still config errors.
    CHECK_THROWS_AS(scenario_chart(parse_scenario("base.preset = custom\nbase.n = 2\n")),
                    ConfigError);
    CHECK_THROWS_AS(
        scenario_chart(parse_scenario("base.preset = sphere\nbox.1.min = 3\nbox.1.max = 1\n")),
        ConfigError);
    CHECK_THROWS_AS(scenario_rescale(parse_scenario("base.preset = sphere\nf.expr = exp(-x1)\n")),
                    ConfigError);

    // Fiber dimension guard: 4^5 = 1024 > 256.
    Scenario big = parse_scenario("base.preset = euclidean\nbase.n = 4\nbundle.p = 5\n");
    CHECK_THROWS_AS(scenario_type(big), ConfigError);

    // Unknown tolerance ids surface when the registry is consulted.
    Scenario sc = parse_scenario("base.preset = euclidean\ntol.not.a.check = 1e-3\n");
    CHECK_THROWS_AS(run_verification(sc), ConfigError);
}

TEST_CASE("check filters expand groups and reject unknown ids") {
    const auto geo = expand_check_filters({"geo"});
    CHECK(geo.size() == 6);
    for (const auto& id : geo) CHECK(id.rfind("geo.", 0) == 0);

    const auto mixed = expand_check_filters({"mconn.metricity", "base"});
    CHECK(mixed.size() == 4);
    CHECK(std::find(mixed.begin(), mixed.end(), "mconn.metricity") != mixed.end());

    CHECK_THROWS_AS(expand_check_filters({"bogus"}), ConfigError);
    CHECK_THROWS_AS(expand_check_filters({"geo.warp"}), ConfigError);
}

TEST_CASE("verification reports are deterministic and scenario-shaped") {
    const Scenario sc = parse_scenario(builtin_scenarios()[2].second); // flat-unit
    const std::vector<std::string> subset =
        expand_check_filters({"base", "structures.parakahler", "geo.energy"});

    std::ostringstream a, b;
    write_report(a, run_verification(sc, subset));
    write_report(b, run_verification(sc, subset));
    CHECK(a.str() == b.str());
    CHECK(a.str().find("\"pass\":false") == std::string::npos);

    // Flat base: the para obstruction is expected-zero, and measures zero.
    const VerificationReport rep = run_verification(sc, subset);
    bool saw_para = false;
    for (const auto& r : rep.results)
        if (r.id == "structures.parakahler") {
            saw_para = true;
            CHECK_FALSE(r.live);
            CHECK(r.value == 0.0);
        }
    CHECK(saw_para);

    // Curved base: the same check flips to expected-live and measures big.
    const Scenario curved = parse_scenario(builtin_scenarios()[0].second); // sphere-exp
    const VerificationReport rep2 = run_verification(curved, {"structures.parakahler"});
    REQUIRE(rep2.results.size() == 1);
    CHECK(rep2.results[0].live);
    CHECK(rep2.results[0].value > 1e-2);
    CHECK(rep2.results[0].pass);
}

TEST_CASE("tolerance overrides are honored and can fail a check") {
    Scenario sc = parse_scenario(builtin_scenarios()[0].second); // sphere-exp
    sc.tol["lc.metricity"] = 1e-12; // far below the finite-difference floor
    const VerificationReport rep = run_verification(sc, {"lc.metricity"});
    REQUIRE(rep.results.size() == 1);
    CHECK(rep.results[0].tol == 1e-12);
    CHECK_FALSE(rep.results[0].pass);
    CHECK(rep.failed() == 1);

    std::ostringstream os;
    write_report(os, rep);
    CHECK(os.str().find("\"pass\":false") != std::string::npos);
    CHECK(os.str().find("\"failed\":1") != std::string::npos);
}

TEST_CASE("the built-in scenario set verifies clean") {
    for (const auto& [name, text] : builtin_scenarios()) {
        INFO(name);
        const VerificationReport rep = run_verification(parse_scenario(text));
        CHECK(rep.failed() == 0);
        CHECK(rep.results.size() >= 30);
    }
}
