#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "levyx/errors.hpp"
#include "levyx/scenario.hpp"

using namespace levyx;

TEST_CASE("builtin fixtures load and validate") {
  const auto names = builtin_scenario_names();
  REQUIRE(names.size() == 5);
  for (const auto& name : names) {
    const Scenario sc = builtin_scenario(name);
    CHECK(sc.name == name);
    CHECK(sc.dimension == 1);
    sc.switching.validate();
    sc.impulse.validate();
    CHECK(sc.seed != 0);
  }
  CHECK(is_builtin_scenario("alt2"));
  CHECK_FALSE(is_builtin_scenario("nope"));
}

TEST_CASE("parse -> canonical -> parse is the identity") {
  for (const auto& name : builtin_scenario_names()) {
    const Scenario sc = builtin_scenario(name);
    const nlohmann::json j = nlohmann::json::parse(sc.canonical());
    const Scenario back = Scenario::from_json(j, sc.name);
    INFO("fixture ", name);
    CHECK(back.canonical() == sc.canonical());
    CHECK(back.hash() == sc.hash());
  }
}

TEST_CASE("hash is stable under key reordering") {
  const Scenario sc = builtin_scenario("iid2");
  nlohmann::json j = sc.to_json();
  // round-trip through a reordered textual form
  std::string text = "{\"seed\": " + std::to_string(sc.seed) + ",";
  text += "\"dimension\": 1";
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "seed" || it.key() == "dimension") continue;
    text += ",\"" + it.key() + "\": " + it.value().dump();
  }
  text += "}";
  const Scenario re = Scenario::from_json(nlohmann::json::parse(text), "iid2");
  CHECK(re.hash() == sc.hash());
}

TEST_CASE("schema errors carry JSON-pointer locations") {
  nlohmann::json j = builtin_scenario_json("alt2");
  j["switching"]["P"][0] = {0.0, 0.9};  // row sums to 0.9
  try {
    Scenario::from_json(j, "broken");
    FAIL("expected schema-error");
  } catch (const Error& e) {
    CHECK(e.code() == "schema-error");
    CHECK(std::string(e.what()).find("/switching/P/0") != std::string::npos);
  }

  nlohmann::json missing = builtin_scenario_json("alt2");
  missing.erase("seed");
  try {
    Scenario::from_json(missing, "broken");
    FAIL("expected schema-error");
  } catch (const Error& e) {
    CHECK(e.code() == "schema-error");
    CHECK(std::string(e.what()).find("/seed") != std::string::npos);
  }
}

TEST_CASE("load accepts files and builtin names, rejects garbage") {
  const Scenario builtin = Scenario::load("m2q");
  const std::string path = "/tmp/levyx_test_scenario.json";
  {
    std::ofstream out(path);
    out << builtin_scenario_json("m2q").dump(2);
  }
  const Scenario from_file = Scenario::load(path);
  CHECK(from_file.hash() == builtin.hash());

  CHECK_THROWS_AS(Scenario::load("/tmp/levyx_no_such_file.json"), Error);
  {
    std::ofstream out(path);
    out << "{not json";
  }
  CHECK_THROWS_WITH_AS(Scenario::load(path), doctest::Contains("parse-error"),
                       Error);
}

TEST_CASE("default u grid spans the guard box") {
  const Scenario sc = builtin_scenario("alt2");
  const auto grid = sc.default_u_grid();
  REQUIRE(grid.size() == 5);
  CHECK(grid.front()(0) == doctest::Approx(sc.guards.u_box_lo));
  CHECK(grid.back()(0) == doctest::Approx(sc.guards.u_box_hi));
}
