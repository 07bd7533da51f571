#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "dlap/config.hpp"

using namespace dlap;

namespace {

const char* kBase = R"(
# comment line
[model]
kind = delta1d   # trailing comment
nx = 129
absorption = const 1

[lap]
I = 1 2
delta = 0.75
mu_max = 0.1
mu_min = 0.001
mu_count = 3
tau_count = 5

[mourre]
J = 0.5 1.5; 2 3 ; [4, 5]

[run]
seed = 0x10
)";

std::string error_of(const std::string& text) {
  try {
    (void)RunConfig::from_file(KeyValueFile::parse(text, "t.cfg"));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("sections, comments and lists parse") {
  const RunConfig c = RunConfig::from_file(KeyValueFile::parse(kBase));
  CHECK(c.model.at("kind") == "delta1d");
  CHECK(c.model.at("nx") == "129");
  CHECK(c.lap_delta == 0.75);
  CHECK(c.seed == 16);
  REQUIRE(c.mourre_J.size() == 3);
  CHECK(c.mourre_J[2].lo == 4.0);
  CHECK(c.mourre_J[2].hi == 5.0);
}

TEST_CASE("grids follow the configured counts") {
  const RunConfig c = RunConfig::from_file(KeyValueFile::parse(kBase));
  const auto mu = c.mu_grid();
  REQUIRE(mu.size() == 3);
  CHECK(mu[0] == 0.1);
  CHECK(mu[1] == doctest::Approx(0.01));
  CHECK(mu[2] == 0.001);
  const auto tau = c.tau_grid();
  REQUIRE(tau.size() == 5);
  CHECK(tau.front() == 1.0);
  CHECK(tau.back() == 2.0);
}

TEST_CASE("duplicate keys are rejected with their line") {
  const std::string what = [] {
    try {
      (void)KeyValueFile::parse("[a]\nx = 1\nx = 2\n", "d.cfg");
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  }();
  CHECK(what.find("a.x") != std::string::npos);
  CHECK(what.find("d.cfg:3") != std::string::npos);
}

TEST_CASE("malformed lines and unknown keys name the culprit") {
  CHECK(error_of(std::string(kBase) + "\n[lap]\n").find("duplicate") == std::string::npos);
  CHECK(error_of(std::string(kBase) + "bogus line\n").find("bogus line") != std::string::npos);
  CHECK(error_of(std::string(kBase) + "[evolution]\nfoo = 1\n").find("evolution.foo") !=
        std::string::npos);
}

TEST_CASE("LAP weight at or below one half is rejected") {
  std::string text = kBase;
  text.replace(text.find("delta = 0.75"), 12, "delta = 0.2 ");
  CHECK(error_of(text).find("lap.delta") != std::string::npos);
  text.replace(text.find("delta = 0.2 "), 12, "delta = 0.5 ");
  CHECK(error_of(text).find("lap.delta") != std::string::npos);
}

TEST_CASE("bad values are rejected") {
  auto with = [](const std::string& from, const std::string& to) {
    std::string text = kBase;
    text.replace(text.find(from), from.size(), to);
    return error_of(text);
  };
  CHECK(with("I = 1 2", "I = 2 1").find("lap.I") != std::string::npos);
  CHECK(with("mu_count = 3", "mu_count = 2.5").find("lap.mu_count") != std::string::npos);
  CHECK(with("seed = 0x10", "seed = zz").find("run.seed") != std::string::npos);
  CHECK(with("mu_min = 0.001", "mu_min = 1").find("lap.mu") != std::string::npos);
  CHECK_FALSE(error_of("[lap]\ndelta = 1\n").empty());
}

TEST_CASE("typed getters with fallbacks") {
  const auto kv = KeyValueFile::parse("a = 1.5\nb = 3\nc = 1, 2,3\n");
  CHECK(kv.get_double("a") == 1.5);
  CHECK(kv.get_int("b") == 3);
  CHECK(kv.get_int("missing", 7) == 7);
  CHECK(kv.get_doubles("c") == std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS((void)kv.get_int("a"), Error);
  CHECK_THROWS_AS((void)kv.get("missing"), Error);
}
