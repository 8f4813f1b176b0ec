#include <gtest/gtest.h>

#include "pqla/config.hpp"
#include "pqla/error.hpp"

using namespace pqla;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_config(text, "run.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsResolve) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c.experiment.reps, 500u);
  EXPECT_EQ(c.experiment.horizon, 200.0);
  EXPECT_EQ(c.output.dir, "out");
  const auto j = to_json(c);
  EXPECT_EQ(j.at("model").at("kind"), "regression");
  EXPECT_FALSE(j.at("experiment").contains("jobs"));
  // The echo parses back to the same configuration.
  EXPECT_EQ(to_json(parse_config(j.dump())), j);
}

TEST(Config, VolatilityDefaultsHorizonToOne) {
  const auto c = parse_config(R"({"model": {"kind": "volatility"}})");
  EXPECT_EQ(c.experiment.horizon, 1.0);
  EXPECT_EQ(c.experiment.model.kind, ModelKind::kVolatility);
}

TEST(Config, ReadsValues) {
  const auto c = parse_config(R"({
    "model": {"kind": "regression", "dim": 2},
    "grid": {"horizon": 50, "step": 0.01, "refine": 5},
    "estimators": {"kinds": ["M"]},
    "experiment": {"reps": 7, "seed": 99, "conditioning": "fixed-environment", "jobs": 2,
                   "psi": {"enabled": true, "r_star": 6}},
    "output": {"dir": "x", "svg": false}
  })");
  EXPECT_EQ(c.experiment.model.dim, 2u);
  EXPECT_EQ(c.experiment.horizon, 50.0);
  EXPECT_EQ(c.experiment.estimators.size(), 1u);
  EXPECT_EQ(c.experiment.seed, 99u);
  EXPECT_EQ(c.experiment.jobs, 2u);
  EXPECT_EQ(c.experiment.conditioning, Conditioning::kFixedEnvironment);
  EXPECT_TRUE(c.experiment.compute_psi);
  EXPECT_EQ(c.experiment.psi.r_star, 6.0);
  EXPECT_FALSE(c.output.svg);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_NE(message_of(R"({"grid": {"horizn": 3}})").find("grid.horizn: unknown key"), std::string::npos);
  EXPECT_NE(message_of(R"({"extra": {}})").find("unknown section"), std::string::npos);
  EXPECT_NE(message_of(R"({"experiment": {"psi": {"x": 1}}})").find("experiment.psi.x"), std::string::npos);
}

TEST(Config, SyntaxErrorsCarryLineAndColumn) {
  const auto m = message_of("{\n  \"grid\": {\"horizon\": 3,,}\n}");
  EXPECT_EQ(m.rfind("run.json:2:", 0), 0u) << m;
}

TEST(Config, TypeAndValueErrors) {
  EXPECT_NE(message_of(R"({"experiment": {"reps": "many"}})").find("experiment.reps"), std::string::npos);
  EXPECT_NE(message_of(R"({"experiment": {"reps": -3}})").find("experiment.reps"), std::string::npos);
  EXPECT_NE(message_of(R"({"model": {"kind": "garch"}})").find("model.kind"), std::string::npos);
  EXPECT_FALSE(message_of(R"({"grid": {"horizon": -1}})").empty());
  EXPECT_FALSE(message_of(R"({"model": {"kind": "volatility"}, "experiment": {"studentize": "limit"}})").empty());
  EXPECT_FALSE(message_of("[1, 2]").empty());
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/pqla.json"), ConfigError); }
