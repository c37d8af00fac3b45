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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>

#include "brflow/best_response.hpp"
#include "brflow/io.hpp"
#include "brflow/measures.hpp"
#include "cli.hpp"

namespace brflow {
namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("brflow_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Writes `cfg` and runs `mode` on it with output in dir_/name.
  int run(const std::string& mode, const Json& cfg, const std::string& name,
          std::optional<std::uint64_t> seed = std::nullopt) {
    const fs::path config = dir_ / (name + ".json");
    write_json(config, cfg);
    cli::RunOptions opts{config, dir_ / name, seed, true};
    out_.str("");
    err_.str("");
    return cli::run(mode, opts, out_, err_);
  }

  Json report(const std::string& name) const { return read_json(dir_ / name / "report.json"); }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

Json bandit_problem() {
  return Json::parse(R"({"type": "bandit", "cost": [0, 1], "eta": [0.5, 0.5], "tau": 0.1,
                         "features": {"activation": "tanh", "phi": [[1], [-1]]}})");
}

Json bandit_config(double sigma_factor, double h, std::size_t steps) {
  return {{"problem", bandit_problem()},
          {"reference", {{"name", "gaussian"}, {"scale", 1.0}}},
          {"flow",
           {{"sigma_factor", sigma_factor},
            {"alpha", 1.0},
            {"h_out", h},
            {"steps", steps},
            {"tol", 1e-13},
            {"init", {{"name", "gaussian"}, {"mean", 3.0}, {"scale", 0.5}}}}}};
}

Json particle_config(std::size_t particles, std::size_t inner, double h_in, std::size_t steps, double h) {
  Json cfg = bandit_config(1.1, h, steps);
  cfg["flow"].update({{"particles", particles}, {"inner_steps", inner}, {"h_in", h_in}});
  cfg["seed"] = 11;
  return cfg;
}

Json worked_mdp() {
  return Json::parse(R"({"type": "mdp", "nS": 2, "nA": 2,
    "P": [[[1, 0], [0, 1]], [[0, 1], [1, 0]]], "c": [[1, -0.5], [0.25, 0]],
    "delta": 0.5, "tau": 0.1, "eta": [0.5, 0.5],
    "features": {"activation": "tanh", "phi": [[1], [-1], [0.5], [0]]}})");
}

TEST_F(Cli, CheckSigmaOnWorkedMdp) {
  Json cfg = {{"problem", worked_mdp()}};
  ASSERT_EQ(run("check-sigma", cfg, "check"), 0) << err_.str();
  auto r = report("check");
  EXPECT_NEAR(r["constants"]["C_F"].get<double>(), 9.6, 1e-12);
  EXPECT_NEAR(r["constants"]["L_F"].get<double>(), 48.4, 1e-12);
  const double m1 = ReferenceMeasure::gaussian(1.0).first_moment();
  EXPECT_EQ(r["sigma_min"].get<double>(), sigma_threshold(r["constants"]["C_F"], r["constants"]["L_F"], m1));
  EXPECT_FALSE(r.contains("contraction"));

  cfg["flow"] = {{"sigma", 1000.0}};
  ASSERT_EQ(run("check-sigma", cfg, "check2"), 0);
  auto c = report("check2")["contraction"];
  EXPECT_TRUE(c["contractive"].get<bool>());
  EXPECT_EQ(c["L_psi"].get<double>(), lipschitz_factor(c["C_F"], c["L_F"], 1000.0, m1));
}

TEST_F(Cli, SolveGridWithZeroObjectiveReachesReference) {
  Json cfg = {{"problem", {{"type", "zero"}}},
              {"flow", {{"sigma", 1.0}, {"alpha", 1.0}, {"h_out", 0.5}, {"steps", 60},
                        {"init", {{"name", "gaussian"}, {"mean", 2.0}, {"scale", 0.5}}}}}};
  ASSERT_EQ(run("solve-grid", cfg, "zero"), 0) << err_.str();
  auto r = report("zero");
  EXPECT_LT(r["terminal_w1_to_reference"].get<double>(), 1e-8);
  EXPECT_TRUE(fs::exists(dir_ / "zero" / "trace.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "zero" / "final_density.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "zero" / "fixed_point.csv"));
}

TEST_F(Cli, NegativeTauIsAValidationError) {
  Json cfg = bandit_config(1.1, 0.1, 5);
  cfg["problem"]["tau"] = -0.1;
  EXPECT_EQ(run("solve-grid", cfg, "bad"), 2);
  EXPECT_NE(err_.str().find("tau"), std::string::npos) << err_.str();

  cfg = {{"problem", worked_mdp()}};
  cfg["problem"]["tau"] = -1;
  EXPECT_EQ(run("check-sigma", cfg, "bad2"), 2);
  EXPECT_NE(err_.str().find("problem.tau"), std::string::npos) << err_.str();
}

TEST_F(Cli, ConfigErrorsNameTheField) {
  Json cfg = bandit_config(1.1, 0.1, 5);
  cfg["flow"].erase("sigma_factor");
  EXPECT_EQ(run("solve-grid", cfg, "a"), 2);
  EXPECT_NE(err_.str().find("flow.sigma"), std::string::npos) << err_.str();

  cfg = bandit_config(1.1, 0.6, 5);
  cfg["flow"]["alpha"] = 2.0;
  EXPECT_EQ(run("solve-grid", cfg, "b"), 2);
  EXPECT_NE(err_.str().find("flow"), std::string::npos) << err_.str();

  cfg = bandit_config(1.1, 0.1, 5);
  cfg["mode"] = "game";
  EXPECT_EQ(run("solve-grid", cfg, "c"), 2);
  EXPECT_NE(err_.str().find("mode"), std::string::npos) << err_.str();

  cfg = bandit_config(1.1, 0.1, 5);
  cfg["reference"] = {{"name", "cauchy"}};
  EXPECT_EQ(run("solve-grid", cfg, "d"), 2);
  EXPECT_NE(err_.str().find("reference.name"), std::string::npos) << err_.str();

  cfg = bandit_config(1.1, 0.1, 5);
  cfg["problem"]["type"] = "poker";
  EXPECT_EQ(run("solve-grid", cfg, "e"), 2);
  EXPECT_NE(err_.str().find("problem.type"), std::string::npos) << err_.str();
}

TEST_F(Cli, NoConvergenceExitCode) {
  Json cfg = bandit_config(1.1, 0.1, 5);
  cfg["flow"]["tol"] = 1e-300;
  cfg["flow"]["max_iter"] = 2;
  EXPECT_EQ(run("solve-grid", cfg, "nc"), 3);
  EXPECT_NE(err_.str().find("NoConvergence"), std::string::npos) << err_.str();
}

TEST_F(Cli, RunTakesModeFromConfig) {
  Json cfg = bandit_config(1.1, 0.1, 5);
  EXPECT_EQ(run("run", cfg, "a"), 2);
  cfg["mode"] = "solve-grid";
  EXPECT_EQ(run("run", cfg, "b"), 0) << err_.str();
  EXPECT_EQ(report("b")["mode"], "solve-grid");
}

TEST_F(Cli, ReportEchoesResolvedConfig) {
  Json cfg = bandit_config(1.1, 0.02, 10);
  ASSERT_EQ(run("solve-grid", cfg, "echo", 42), 0);
  auto c = report("echo")["config"];
  EXPECT_EQ(c["seed"], 42);
  EXPECT_EQ(c["mode"], "solve-grid");
  EXPECT_EQ(c["problem"]["tau"], 0.1);
  EXPECT_EQ(c["flow"]["h_out"], 0.02);
  EXPECT_EQ(c["flow"]["steps"], 10);
  EXPECT_EQ(c["reference"]["grid"]["n"], Grid::standard().size());
  const double m1 = c["reference"]["m1"].get<double>();
  EXPECT_EQ(c["flow"]["sigma"].get<double>(), 1.1 * sigma_threshold(2.4, 6.4, m1));
  // The echo is itself a valid config that reproduces the run.
  write_json(dir_ / "echo2.json", c);
  cli::RunOptions opts{dir_ / "echo2.json", dir_ / "echo2", std::nullopt, true};
  ASSERT_EQ(cli::run("run", opts, out_, err_), 0) << err_.str();
  EXPECT_EQ(read_text(dir_ / "echo" / "trace.csv"), read_text(dir_ / "echo2" / "trace.csv"));
}

TEST_F(Cli, ParticleTraceIsByteIdenticalUnderFixedSeed) {
  Json cfg = particle_config(300, 100, 1e-3, 6, 0.3);
  ASSERT_EQ(run("solve-particle", cfg, "a"), 0) << err_.str();
  ASSERT_EQ(run("solve-particle", cfg, "b"), 0);
  const std::string ta = read_text(dir_ / "a" / "trace.csv");
  EXPECT_EQ(ta, read_text(dir_ / "b" / "trace.csv"));
  EXPECT_EQ(read_text(dir_ / "a" / "final_ensemble.csv"), read_text(dir_ / "b" / "final_ensemble.csv"));

  ::setenv("BRFLOW_THREADS", "1", 1);
  ASSERT_EQ(run("solve-particle", cfg, "c"), 0);
  ::unsetenv("BRFLOW_THREADS");
  EXPECT_EQ(ta, read_text(dir_ / "c" / "trace.csv"));

  ASSERT_EQ(run("solve-particle", cfg, "d", 12), 0);
  EXPECT_NE(ta, read_text(dir_ / "d" / "trace.csv"));
}

TEST_F(Cli, GridTraceIsByteIdentical) {
  Json cfg = bandit_config(1.1, 0.05, 50);
  ASSERT_EQ(run("solve-grid", cfg, "a"), 0);
  ASSERT_EQ(run("solve-grid", cfg, "b"), 0);
  EXPECT_EQ(read_text(dir_ / "a" / "trace.csv"), read_text(dir_ / "b" / "trace.csv"));
}

TEST_F(Cli, CompareRunWithItself) {
  ASSERT_EQ(run("solve-grid", bandit_config(1.1, 0.05, 50), "a"), 0);
  cli::CompareOptions opts{dir_ / "a", dir_ / "a", dir_ / "cmp.json", 2.0 / 3.0, true};
  ASSERT_EQ(cli::compare(opts, out_, err_), 0) << err_.str();
  auto j = read_json(dir_ / "cmp.json");
  EXPECT_EQ(j["terminal_w1"], 0.0);
  EXPECT_EQ(j["rate_difference"], 0.0);
  EXPECT_EQ(j["rate_relative_difference"], 0.0);
}

TEST_F(Cli, CompareRatesAtTwoStepSizes) {
  // Far above the threshold Psi is nearly constant and L_psi is small, so
  // the fitted rate of either discretization sits within 10% of alpha (1 - L_psi).
  ASSERT_EQ(run("solve-grid", bandit_config(10.0, 0.02, 400), "fine"), 0);
  ASSERT_EQ(run("solve-grid", bandit_config(10.0, 0.05, 160), "coarse"), 0);
  auto j = cli::compare_runs({dir_ / "fine", dir_ / "coarse", std::nullopt, 2.0 / 3.0, true});
  for (const char* side : {"a", "b"}) {
    const double ratio = j[side]["fitted_over_theory"].get<double>();
    EXPECT_GT(ratio, 0.9) << side;
    EXPECT_LT(ratio, 1.1) << side;
  }
  // Both traces measure W1 to the same fixed point.
  EXPECT_LE(j["terminal_w1"].get<double>(),
            j["a"]["terminal_trace_w1"].get<double>() + j["b"]["terminal_trace_w1"].get<double>() + 1e-12);
}

TEST_F(Cli, CompareParticleWithGrid) {
  Json grid = bandit_config(1.1, 1.0, 3);
  ASSERT_EQ(run("solve-grid", grid, "grid"), 0);
  Json particles = particle_config(10000, 1500, 2e-4, 3, 1.0);
  ASSERT_EQ(run("solve-particle", particles, "particles"), 0) << err_.str();
  auto j = cli::compare_runs({dir_ / "particles", dir_ / "grid", std::nullopt, 2.0 / 3.0, true});
  EXPECT_LT(j["terminal_w1"].get<double>(), 0.05);
}

TEST_F(Cli, CompareRejectsIncompatibleRuns) {
  ASSERT_EQ(run("solve-grid", bandit_config(1.1, 0.05, 5), "grid"), 0);
  cli::CompareOptions opts{dir_ / "grid", dir_ / "missing", std::nullopt, 2.0 / 3.0, true};
  EXPECT_EQ(cli::compare(opts, out_, err_), 4);
  EXPECT_NE(err_.str().find("IncompatibleRuns"), std::string::npos) << err_.str();

  Json other = bandit_config(1.1, 0.05, 5);
  other["reference"]["grid"] = {{"x_min", -5}, {"x_max", 5}, {"n", 501}};
  ASSERT_EQ(run("solve-grid", other, "other"), 0) << err_.str();
  opts.run_b = dir_ / "other";
  EXPECT_EQ(cli::compare(opts, out_, err_), 4);
  EXPECT_NE(err_.str().find("grid"), std::string::npos) << err_.str();
}

TEST_F(Cli, MdpModeReportsConsistentValues) {
  Json cfg = {{"problem", {{"type", "random-mdp"}, {"nS", 3}, {"nA", 2}, {"seed", 5}}},
              {"flow", {{"sigma_factor", 1.5}, {"h_out", 0.5}, {"steps", 20}}}};
  ASSERT_EQ(run("mdp", cfg, "mdp"), 0) << err_.str();
  auto m = report("mdp")["mdp"];
  EXPECT_NEAR(m["value_bellman"].get<double>(), m["value_occupancy"].get<double>(), 1e-10);
  EXPECT_LT(m["bellman_residual"].get<double>(), 1e-10);
  EXPECT_LT(m["occupancy_identity_residual"].get<double>(), 1e-12);
  EXPECT_LT(m["soft_value_iteration"]["optimal_policy_residual"].get<double>(), 1e-8);
  // The soft-optimal tabular policy is at least as good as the feature-constrained one.
  EXPECT_LE(m["soft_value_iteration"]["value"].get<double>(), m["value_bellman"].get<double>() + 1e-12);

  cfg["problem"] = bandit_problem();
  EXPECT_EQ(run("mdp", cfg, "not_mdp"), 2);
}

TEST_F(Cli, GameModeFindsEquilibrium) {
  Json cfg = Json::parse(R"({
    "problem": {"type": "markov-game", "nS": 1, "nA": 2, "nB": 2, "c": [[[0.5, -1], [-0.3, 1]]],
                "tau_a": 0.2, "tau_b": 0.1, "eta_a": [0.3, 0.7], "eta_b": [0.6, 0.4],
                "features_a": {"activation": "tanh", "phi": [[1], [-0.5]]},
                "features_b": {"activation": "tanh", "phi": [[0.8], [-1]]}},
    "game": {"sigma_factor": 1.1, "alpha_nu": 2, "alpha_mu": 1, "h": 0.05, "steps": 200, "tol": 1e-11,
             "init_nu": {"name": "gaussian", "mean": 3, "scale": 0.5}}})");
  ASSERT_EQ(run("game", cfg, "game"), 0) << err_.str();
  auto r = report("game");
  EXPECT_TRUE(r["game_contraction"]["adjusted_thresholds_hold"].get<bool>());
  EXPECT_LT(r["exploitability"]["total"].get<double>(), 1e-10);
  EXPECT_LT(r["mne"]["residual"].get<double>(), 1e-11);
  const double rate = r["game_contraction"]["rate"].get<double>();
  auto t = read_trace_csv(dir_ / "game" / "trace.csv");
  for (std::size_t i = 0; i < t.w1.size(); ++i) EXPECT_LE(t.w1[i], std::exp(-rate * t.times[i]) * t.w1[0] * 1.05);

  ASSERT_EQ(run("check-sigma", cfg, "game_check"), 0);
  EXPECT_EQ(report("game_check")["game_contraction"]["sigma_nu"], r["game_contraction"]["sigma_nu"]);
}

TEST_F(Cli, StabilitySweepHasNoViolations) {
  Json cfg = {{"problem", bandit_problem()}, {"stability", {{"sigma_factors", {1.1, 1.5, 2.0, 4.0}}}}};
  ASSERT_EQ(run("stability-sweep", cfg, "sweep"), 0) << err_.str();
  auto r = report("sweep");
  EXPECT_EQ(r["stability"].size(), 12u);
  EXPECT_EQ(r["violations"], 0);
  EXPECT_TRUE(fs::exists(dir_ / "sweep" / "stability.csv"));
}

int exit_status(const std::string& cmd) {
  const int s = std::system(cmd.c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

TEST_F(Cli, ExecutableExitCodes) {
  const std::string exe = BRFLOW_CLI_PATH;
  write_json(dir_ / "ok.json", Json{{"problem", worked_mdp()}});
  Json bad = bandit_config(1.1, 0.1, 5);
  bad["problem"]["tau"] = -1;
  write_json(dir_ / "bad.json", bad);
  EXPECT_EQ(exit_status(exe + " check-sigma --quiet --config " + (dir_ / "ok.json").string() + " --out " +
                        (dir_ / "ok").string()),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "ok" / "report.json"));
  EXPECT_EQ(exit_status(exe + " solve-grid --config " + (dir_ / "bad.json").string() + " --out " +
                        (dir_ / "bad").string() + " 2> " + (dir_ / "err.txt").string()),
            2);
  EXPECT_NE(read_text(dir_ / "err.txt").find("tau"), std::string::npos);
  EXPECT_EQ(exit_status(exe + " solve-grid > /dev/null 2>&1"), 2);
  EXPECT_EQ(exit_status(exe + " compare " + (dir_ / "ok").string() + " " + (dir_ / "nope").string() +
                        " 2> /dev/null"),
            4);
}

}  // namespace
}  // namespace brflow
