#include <doctest.h>

#include "rareforce/config.hpp"

using namespace rareforce;
using nlohmann::json;

TEST_SUITE("config") {
  TEST_CASE("empty document gives the defaults") {
    const RunConfig c = config_from_json(json::object());
    CHECK(c.potential.kind == "skew_double_well");
    CHECK(c.potential.tilt == 0.25);
    CHECK(c.sigma == 1.0);
    CHECK(c.set_lo == -1.1);
    CHECK(c.set_hi == -1.0);
    CHECK(c.domain_lo == -1.5);
    CHECK(c.domain_hi == 2.0);
    CHECK_FALSE(c.x0.has_value());
    CHECK(c.sim.epsilon == 0.5);
    CHECK(c.sim.h == 1e-3);
    CHECK(c.ansatz.m == 10);
    CHECK(c.ansatz.width == 0.1);
    CHECK(c.ansatz.stddev() == doctest::Approx(std::sqrt(0.1)));
    CHECK(c.descent.grad_tol == 0.05);
    CHECK(c.descent.wolfe_c1 == 1e-4);
    CHECK(c.descent.wolfe_c2 == 0.9);
    CHECK(c.ladder.shells == 1);
    CHECK(c.estimate.paths == 2000);
    CHECK(c.compare.discretization_allowance == 0.0);
  }

  TEST_CASE("round trip through json") {
    json j = json::object();
    apply_override(j, "ansatz.m=12");
    apply_override(j, "x0=0.5");
    apply_override(j, "descent.reseed_policy=fixed");
    apply_override(j, "ladder.thresholds=[0.0, 1.0]");
    const RunConfig c = config_from_json(j);
    const RunConfig back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.ansatz.m == 12);
    CHECK(*back.x0 == 0.5);
    CHECK(back.descent.reseed_policy == ReseedPolicy::fixed);
    CHECK(back.ladder.thresholds == std::vector<double>{0.0, 1.0});
  }

  TEST_CASE("unknown keys are listed") {
    const json j = json::parse(R"({"sigmaa": 1, "descent": {"grad_tol": 0.1, "tolerance": 2}})");
    const auto keys = unknown_keys(j, to_json(RunConfig{}));
    CHECK(keys == std::vector<std::string>{"descent.tolerance", "sigmaa"});
    try {
      config_from_json(j);
      FAIL("unknown keys accepted");
    } catch (const std::invalid_argument& e) {
      const std::string what = e.what();
      CHECK(what.find("sigmaa") != std::string::npos);
      CHECK(what.find("descent.tolerance") != std::string::npos);
    }
  }

  TEST_CASE("type errors name the key") {
    try {
      config_from_json(json::parse(R"({"descent": {"grad_tol": "small"}})"));
      FAIL("type error accepted");
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find("descent.grad_tol") != std::string::npos);
    }
    CHECK_THROWS(config_from_json(json::parse(R"({"x0": "left"})")));
    CHECK_THROWS(config_from_json(json::array()));
  }

  TEST_CASE("overrides") {
    json j = json::object();
    apply_override(j, "h=0.002");
    apply_override(j, "potential.kind=harmonic");
    apply_override(j, "estimate.control=none");
    CHECK(j["h"] == 0.002);
    CHECK(j["potential"]["kind"] == "harmonic");
    const RunConfig c = config_from_json(j);
    CHECK(c.sim.h == 0.002);
    CHECK(c.potential.kind == "harmonic");
    CHECK_THROWS(apply_override(j, "novalue"));
    CHECK_THROWS(apply_override(j, "=3"));
    CHECK_THROWS(apply_override(j, "a..b=3"));
  }

  TEST_CASE("hash ignores settings that cannot change results") {
    RunConfig a;
    RunConfig b = a;
    b.sim.workers = 8;
    b.output_dir = "elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.sim.seed += 1;
    CHECK(config_hash(a) != config_hash(b));
  }

  TEST_CASE("invalid values") {
    for (const char* bad : {R"({"observable": {"sigma": -1}})", R"({"stopping_set": {"lo": -1, "hi": -1.1}})",
                            R"({"x0": -1.05})", R"({"h": 0})", R"({"ansatz": {"width_kind": "fwhm"}})",
                            R"({"ansatz": {"m": 0}})", R"({"descent": {"wolfe_c1": 0.95}})",
                            R"({"descent": {"reseed_policy": "sometimes"}})", R"({"domain": {"boundary": "wrap"}})",
                            R"({"estimate": {"paths": 1}})", R"({"potential": {"kind": "quartic"}})"}) {
      CAPTURE(bad);
      CHECK_THROWS_AS(config_from_json(json::parse(bad)), std::invalid_argument);
    }
  }
}
