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


#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
  namespace cli = brflow::cli;
  CLI::App app{"Best-response flow solvers for entropy-regularized mean-field problems"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    bool quiet = false;
  };
  Flags flags;
  std::string mode;
  auto add_run = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "Output directory (overrides output_dir)");
    sub->add_option("--seed", flags.seed, "Seed (overrides the config seed)");
    sub->add_flag("--quiet", flags.quiet, "Suppress the summary");
    sub->callback([&mode, name] { mode = name; });
  };
  add_run("run", "Run the mode named in the config");
  add_run("check-sigma", "Report regularity constants and the contraction threshold");
  add_run("solve-grid", "Euler best-response flow on the grid");
  add_run("solve-particle", "Two-loop particle scheme");
  add_run("mdp", "Grid flow plus MDP diagnostics at the fixed point");
  add_run("game", "Mixed Nash equilibrium and coupled flow for a two-player game");
  add_run("stability-sweep", "Distance between fixed points across regularization strengths");

  cli::CompareOptions cmp;
  std::string cmp_out;
  CLI::App* compare = app.add_subcommand("compare", "Compare the terminal states and rates of two runs");
  compare->add_option("run_a", cmp.run_a, "First run directory")->required();
  compare->add_option("run_b", cmp.run_b, "Second run directory")->required();
  compare->add_option("--out", cmp_out, "Write the comparison JSON to this file");
  compare->add_option("--fraction", cmp.fraction, "Trailing fraction of the trace used for rate fits")
      ->check(CLI::Range(0.01, 1.0));
  compare->add_flag("--quiet", cmp.quiet, "Do not print the comparison");
  compare->callback([&mode] { mode = "compare"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (mode == "compare") {
    if (!cmp_out.empty()) cmp.out = cmp_out;
    return cli::compare(cmp, std::cout, std::cerr);
  }
  cli::RunOptions opts;
  opts.config = flags.config;
  if (!flags.out.empty()) opts.out = flags.out;
  for (CLI::App* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) opts.seed = flags.seed;
  }
  opts.quiet = flags.quiet;
  return cli::run(mode, opts, std::cout, std::cerr);
}
