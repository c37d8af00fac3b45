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


#ifndef BRFLOW_TOOLS_CLI_HPP_
#define BRFLOW_TOOLS_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "brflow/error.hpp"
#include "brflow/io.hpp"

namespace brflow::cli {

// Experiment modes; each is also a subcommand.
inline constexpr std::string_view kModes[] = {"check-sigma", "solve-grid", "solve-particle",
                                              "mdp",         "game",       "stability-sweep"};

struct RunOptions {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

// 0 success, 2 invalid input, 3 no convergence, 4 incompatible runs, 1 other.
int exit_code(ErrorCode code);

// Runs the experiment in `opts.config`. `mode` is a subcommand name, or "run"
// to take the mode from the config. Summary lines go to `out` unless quiet;
// errors go to `err`. Returns the exit code.
int run(std::string_view mode, const RunOptions& opts, std::ostream& out, std::ostream& err);

// Resolves a config without running it: the echo written into report.json.
Json resolve_config(std::string_view mode, const RunOptions& opts);

struct CompareOptions {
  std::filesystem::path run_a;
  std::filesystem::path run_b;
  std::optional<std::filesystem::path> out;
  double fraction = 2.0 / 3.0;
  bool quiet = false;
};

// W1 between the terminal states and log-linear rate fits of both traces.
// Throws IncompatibleRuns when the runs cannot be compared.
Json compare_runs(const CompareOptions& opts);

int compare(const CompareOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace brflow::cli

#endif  // BRFLOW_TOOLS_CLI_HPP_
