// Copyright 2026 The brflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>

#include "brflow/error.hpp"
#include "brflow/flow.hpp"
#include "brflow/io.hpp"
#include "brflow/mdp.hpp"
#include "brflow/objectives.hpp"
#include "test_support.hpp"

namespace brflow {
namespace {

namespace fs = std::filesystem;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("brflow_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

// Returns the Validation message raised by `fn`, or "" if nothing was thrown.
template <class Fn>
std::string validation_message(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation) << e.what();
    return e.what();
  }
  return "";
}

Json bandit_json() {
  return Json::parse(R"({"cost": [0, 1], "eta": [0.5, 0.5], "tau": 0.1,
                         "features": {"activation": "tanh", "phi": [[1], [-1]]}})");
}

Json mdp_json() {
  return Json::parse(R"({"nS": 2, "nA": 2,
    "P": [[[0.5, 0.5], [1, 0]], [[0, 1], [0.25, 0.75]]],
    "c": [[1, -1], [0.5, 0]], "delta": 0.5, "tau": 0.1,
    "features": {"activation": "tanh", "phi": [[1], [-1], [0.5], [-0.5]]}})");
}

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, double(i % 40) - 20.0);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.5), "0.5");
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(JsonParse, GridAndReference) {
  auto g = grid_from_json(Json::parse(R"({"x_min": -2, "x_max": 2, "n": 5})"), "grid");
  EXPECT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g.dx(), 1.0);
  EXPECT_EQ(to_json(g)["n"], 5);

  auto ref = reference_from_json(Json::parse(R"({"name": "laplace", "scale": 2})"), "reference");
  EXPECT_EQ(ref.grid().size(), Grid::standard().size());
  // Laplace(0, b) truncated to [-L, L]: E|x| = b (1 - e^{-L/b}(1 + L/b)) / (1 - e^{-L/b}).
  const double b = 2.0, r = std::exp(-10.0 / b);
  EXPECT_NEAR(ref.first_moment(), b * (1.0 - r * (1.0 + 10.0 / b)) / (1.0 - r), 1e-4);

  auto msg = validation_message(
      [] { reference_from_json(Json::parse(R"({"name": "cauchy"})"), "reference"); });
  EXPECT_NE(msg.find("reference.name"), std::string::npos) << msg;
  msg = validation_message(
      [] { grid_from_json(Json::parse(R"({"x_min": 1, "x_max": 0, "n": 3})"), "grid"); });
  EXPECT_NE(msg.find("grid.x_min"), std::string::npos) << msg;
}

TEST(JsonParse, BanditRoundTrip) {
  auto spec = bandit_spec_from_json(bandit_json(), "problem");
  EXPECT_EQ(spec.cost, (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(spec.tau, 0.1);
  auto again = bandit_spec_from_json(to_json(spec), "problem");
  EXPECT_EQ(to_json(again), to_json(spec));
  auto k = declared_constants(again);
  EXPECT_DOUBLE_EQ(k.c_f, 2.4);
  EXPECT_DOUBLE_EQ(k.l_f, 6.4);
}

TEST(JsonParse, BanditErrorsNameTheField) {
  struct Case {
    const char* patch;
    const char* field;
  };
  const Case cases[] = {
      {R"({"tau": -1})", "problem.tau"},
      {R"({"tau": "big"})", "problem.tau"},
      {R"({"eta": [0.5, -1]})", "eta[1]"},
      {R"({"eta": [0.5]})", "problem.eta"},
      {R"({"cost": [0, "x"]})", "problem.cost[1]"},
      {R"({"features": {"activation": "cosh", "phi": [[1], [-1]]}})", "problem.features"},
      {R"({"features": {"activation": "tanh", "phi": [[1]]}})", "problem.features.phi"},
  };
  for (const auto& c : cases) {
    Json j = bandit_json();
    j.merge_patch(Json::parse(c.patch));
    auto msg = validation_message([&] { bandit_spec_from_json(j, "problem"); });
    EXPECT_NE(msg.find(c.field), std::string::npos) << c.patch << " -> " << msg;
  }
  Json j = bandit_json();
  j.erase("tau");
  EXPECT_NE(validation_message([&] { bandit_spec_from_json(j, "problem"); }).find("problem.tau"),
            std::string::npos);
}

TEST(JsonParse, ConstantOverrides) {
  Json j = bandit_json();
  j["constants"] = {{"C_F", 3.0}, {"L_F", 7.5}};
  auto spec = bandit_spec_from_json(j, "problem");
  auto k = declared_constants(spec);
  EXPECT_EQ(k.c_f, 3.0);
  EXPECT_EQ(k.l_f, 7.5);
  EXPECT_EQ(to_json(spec)["constants"]["C_F"], 3.0);
}

TEST(JsonParse, MdpRoundTripAndConstants) {
  auto spec = mdp_spec_from_json(mdp_json(), "problem");
  EXPECT_EQ(spec.transition[(1 * 2 + 1) * 2 + 1], 0.75);
  EXPECT_EQ(spec.cost[1 * 2 + 0], 0.5);
  auto again = mdp_spec_from_json(to_json(spec), "problem");
  EXPECT_EQ(to_json(again), to_json(spec));
  auto k = mdp_constants(spec);
  EXPECT_DOUBLE_EQ(k.c_f, 9.6);
  EXPECT_DOUBLE_EQ(k.l_f, 48.4);

  Json bad = mdp_json();
  bad["P"][1][0] = {0.5, 0.6};
  auto msg = validation_message([&] { mdp_spec_from_json(bad, "problem"); });
  EXPECT_NE(msg.find("P[1][0]"), std::string::npos) << msg;
  bad = mdp_json();
  bad["P"][0] = {{0.5, 0.5}};
  msg = validation_message([&] { mdp_spec_from_json(bad, "problem"); });
  EXPECT_NE(msg.find("problem.P[0]"), std::string::npos) << msg;
}

TEST(JsonParse, RandomFeatures) {
  Json j = {{"activation", "sigmoid"}, {"dim", 2}, {"seed", 7}, {"scale", 0.5}};
  auto a = feature_map_from_json(j, 3, "features");
  auto b = feature_map_from_json(j, 3, "features");
  EXPECT_EQ(a.dim(), 2u);
  EXPECT_EQ(to_json(a), to_json(b));
  j["seed"] = -1;
  EXPECT_NE(validation_message([&] { feature_map_from_json(j, 3, "features"); }).find("features.seed"),
            std::string::npos);
}

TEST(JsonParse, MarkovGameSingleStateDefaults) {
  auto j = Json::parse(R"({"nS": 1, "nA": 2, "nB": 2, "c": [[[1, -1], [-1, 1]]], "tau_a": 0.1,
    "tau_b": 0.1, "features_a": {"activation": "tanh", "phi": [[1], [-1]]},
    "features_b": {"activation": "tanh", "phi": [[1], [-1]]}})");
  auto spec = markov_game_spec_from_json(j, "problem");
  EXPECT_EQ(spec.transition, (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(spec.discount, 0.0);
  auto again = markov_game_spec_from_json(to_json(spec), "problem");
  EXPECT_EQ(to_json(again), to_json(spec));
  j["tau_b"] = -0.1;
  EXPECT_NE(validation_message([&] { markov_game_spec_from_json(j, "problem"); }).find("problem.tau_b"),
            std::string::npos);
}

TEST_F(TempDir, JsonFileRoundTripIsExact) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1e3);
  Json j = Json::array();
  for (int i = 0; i < 200; ++i) j.push_back(n(rng) / 7.0);
  write_json(dir_ / "a.json", j);
  EXPECT_EQ(read_json(dir_ / "a.json"), j);
  write_text(dir_ / "bad.json", "{ nope");
  EXPECT_NE(validation_message([&] { read_json(dir_ / "bad.json"); }).find("bad.json"), std::string::npos);
}

TEST_F(TempDir, DensityCsvRoundTripIsExact) {
  std::mt19937_64 rng(3);
  auto p = testing::random_density(Grid(-3.0, 4.0, 71), rng);
  write_density_csv(dir_ / "d.csv", p);
  auto q = read_density_csv(dir_ / "d.csv");
  ASSERT_EQ(q.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(q[i], p[i]);
  EXPECT_DOUBLE_EQ(q.grid().dx(), p.grid().dx());
}

TEST_F(TempDir, EnsembleCsvRoundTripIsExact) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  std::vector<double> pos(3 * 50);
  for (double& v : pos) v = n(rng);
  ParticleEnsemble e(3, pos);
  write_ensemble_csv(dir_ / "e.csv", e);
  auto f = read_ensemble_csv(dir_ / "e.csv");
  EXPECT_EQ(f.dim(), 3u);
  ASSERT_EQ(f.size(), 50u);
  for (std::size_t i = 0; i < pos.size(); ++i) EXPECT_EQ(f.positions()[i], pos[i]);
}

TEST_F(TempDir, TraceCsvLeavesMissingKlEmpty) {
  FlowTrace t;
  t.steps = {0, 5, 10};
  t.times = {0.0, 0.25, 0.5};
  t.w1 = {1.0, 0.5, 0.25};
  t.kl = {std::numeric_limits<double>::quiet_NaN(), 0.125, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_EQ(trace_csv(t), "step,time,w1,kl\n0,0,1,\n5,0.25,0.5,0.125\n10,0.5,0.25,\n");
  write_trace_csv(dir_ / "t.csv", t);
  auto r = read_trace_csv(dir_ / "t.csv");
  EXPECT_EQ(r.steps, t.steps);
  EXPECT_EQ(r.w1, t.w1);
  EXPECT_TRUE(std::isnan(r.kl[0]));
  EXPECT_EQ(r.kl[1], 0.125);
  EXPECT_TRUE(std::isnan(r.kl[2]));
}

TEST_F(TempDir, MalformedCsvIsAnIoError) {
  write_text(dir_ / "d.csv", "x,density\n0,1\n1,abc\n");
  try {
    read_density_csv(dir_ / "d.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
    EXPECT_NE(std::string(e.what()).find("abc"), std::string::npos);
  }
  try {
    read_trace_csv(dir_ / "missing.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

TEST(ReportJson, NonContractiveRateIsNull) {
  auto r = contraction_report(1.0, 1.0, 1.0, 1.0, 1.0);
  ASSERT_FALSE(r.contractive);
  auto j = to_json(r);
  EXPECT_TRUE(j["rate"].is_null());
  EXPECT_EQ(j["contractive"], false);
}

}  // namespace
}  // namespace brflow
