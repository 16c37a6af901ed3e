#include <gtest/gtest.h>

#include <filesystem>

#include "hjbk/config.hpp"
#include "hjbk/errors.hpp"

using namespace hjbk;
using nlohmann::json;

TEST(Config, BuiltinsRoundTrip) {
  for (const auto& name : builtin_experiment_names()) {
    const ExperimentConfig c = builtin_experiment(name);
    EXPECT_EQ(c.name, name);
    EXPECT_EQ(parse_config(serialize_config(c)), c) << name;
    EXPECT_EQ(serialize_config(parse_config(serialize_config(c))), serialize_config(c)) << name;
  }
  EXPECT_THROW(builtin_experiment("nope"), InputError);
}

TEST(Config, ShippedFilesMatchBuiltins) {
  for (const auto& name : builtin_experiment_names()) {
    const std::string path = std::string(HJBK_SOURCE_DIR) + "/configs/" + name + ".json";
    ASSERT_TRUE(std::filesystem::exists(path)) << path;
    EXPECT_EQ(load_config(path), builtin_experiment(name)) << name;
  }
}

TEST(Config, ExperimentSettings) {
  const auto p = builtin_experiment("poly1d");
  EXPECT_EQ(p.kernel, KernelSpec::polynomial(1, 4, 1.0));
  EXPECT_EQ(p.centers.counts, std::vector<int>{25});
  EXPECT_EQ(p.initial_conditions.points.size(), 6u);

  const auto v = builtin_experiment("vanderpol");
  EXPECT_DOUBLE_EQ(v.hessian_relaxation, 0.5);
  EXPECT_DOUBLE_EQ(v.solver_tolerance, 1e-4);
  EXPECT_DOUBLE_EQ(v.sim_horizon, 20.0);
  EXPECT_EQ(v.initial_conditions.type, "circle");
  EXPECT_DOUBLE_EQ(v.initial_conditions.radius, 1.5);
  EXPECT_EQ(v.initial_conditions.count, 8);
}

TEST(Config, UnknownFieldsRejected) {
  json j = serialize_config(builtin_experiment("poly1d"));
  j["colour"] = "red";
  EXPECT_THROW(parse_config(j), InputError);

  j = serialize_config(builtin_experiment("poly1d"));
  j["kernel"]["sigma"] = 1.0;
  EXPECT_THROW(parse_config(j), InputError);

  j = serialize_config(builtin_experiment("poly1d"));
  j["simulation"]["initial_conditions"]["angle"] = 3;
  EXPECT_THROW(parse_config(j), InputError);

  j = serialize_config(builtin_experiment("poly1d"));
  j["gates"]["speed"] = 3;
  EXPECT_THROW(parse_config(j), InputError);
}

TEST(Config, TypeAndValueErrors) {
  json j = serialize_config(builtin_experiment("poly1d"));
  j["kernel"]["degree"] = 1;
  EXPECT_THROW(parse_config(j), InputError);

  j = serialize_config(builtin_experiment("poly1d"));
  j["kernel"]["degree"] = "four";
  EXPECT_THROW(parse_config(j), InputError);

  j = serialize_config(builtin_experiment("poly1d"));
  j["simulation"]["initial_conditions"]["points"] = json::array();
  EXPECT_THROW(parse_config(j), InputError);

  j = serialize_config(builtin_experiment("poly1d"));
  j["simulation"]["horizon"] = -3.0;
  EXPECT_THROW(parse_config(j), InputError);

  j = serialize_config(builtin_experiment("poly1d"));
  j["system"]["name"] = "lorenz";
  EXPECT_THROW(parse_config(j), InputError);
}

TEST(Config, ControlWeightAlias) {
  json j = serialize_config(builtin_experiment("vanderpol"));
  j.erase("D");
  j["R"] = json::array({json::array({2.0})});
  const ExperimentConfig c = parse_config(j);
  ASSERT_TRUE(c.D.has_value());
  EXPECT_DOUBLE_EQ((*c.D)[0][0], 2.0);
}

TEST(Config, MissingFile) {
  try {
    load_config("/nonexistent/cfg.json");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("config not found: /nonexistent/cfg.json"), std::string::npos);
  }
}

TEST(Config, DerivedSettings) {
  const auto c = builtin_experiment("vanderpol");
  EXPECT_DOUBLE_EQ(solver_settings(c).tolerance, 1e-4);
  const SimulationConfig s = simulation_config(c);
  EXPECT_DOUBLE_EQ(s.horizon, 20.0);
  EXPECT_EQ(s.initial.expand(2).size(), 8u);
  EXPECT_EQ(c.dim(), 2);
  EXPECT_EQ(builtin_experiment("poly1d").dim(), 1);
}
