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


#ifndef BRFLOW_IO_HPP_
#define BRFLOW_IO_HPP_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "brflow/best_response.hpp"
#include "brflow/features.hpp"
#include "brflow/flow.hpp"
#include "brflow/game.hpp"
#include "brflow/mdp.hpp"
#include "brflow/measures.hpp"
#include "brflow/objectives.hpp"

namespace brflow {

using Json = nlohmann::json;

// Parsers take the JSON path of the node ("problem", "reference", ...) so that
// Validation errors name the offending field, e.g. "problem.tau must be >= 0".

Grid grid_from_json(const Json& j, const std::string& path);
Json to_json(const Grid& g);

// {"name": "gaussian" | "laplace" | "quartic", "scale": s, "dim": d, "grid": {...}}
ReferenceMeasure reference_from_json(const Json& j, const std::string& path);

// {"activation": "tanh", "phi": [[...], ...]} or
// {"activation": "tanh", "dim": d, "seed": n, "scale": s} for random embeddings.
FeatureMap feature_map_from_json(const Json& j, std::size_t entries, const std::string& path);
Json to_json(const FeatureMap& f);

// {"cost": [...], "eta": [...], "tau": t, "features": {...}, "constants": {"C_F", "L_F"}}
BanditSpec bandit_spec_from_json(const Json& j, const std::string& path);
Json to_json(const BanditSpec& spec);

// {"nS", "nA", "P": [[[...]]], "c": [[...]], "delta", "tau", "eta", "gamma", "features"}
MDPSpec mdp_spec_from_json(const Json& j, const std::string& path);
Json to_json(const MDPSpec& spec);

// {"nS", "nA", "nB", "P": [s][a][b][s'], "c": [s][a][b], "delta", "tau_a", "tau_b",
//  "eta_a", "eta_b", "gamma", "features_a", "features_b"}
MarkovGameSpec markov_game_spec_from_json(const Json& j, const std::string& path);
Json to_json(const MarkovGameSpec& spec);

Json to_json(const ContractionReport& r);
Json to_json(const GameContractionReport& r);
Json to_json(const RegularityConstants& k);

// Round-trip "%.17g" rendering used by the CSV writers; JSON files use the
// shortest round-trip form produced by the JSON library.
std::string format_double(double v);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

// CSV: x,density
void write_density_csv(const std::filesystem::path& path, const GridDensity& p);
GridDensity read_density_csv(const std::filesystem::path& path);

// CSV: particle_id,coord_0,...,coord_{d-1}
void write_ensemble_csv(const std::filesystem::path& path, const ParticleEnsemble& e);
ParticleEnsemble read_ensemble_csv(const std::filesystem::path& path);

struct TraceTable {
  std::vector<std::size_t> steps;
  std::vector<double> times;
  std::vector<double> w1;
  std::vector<double> kl;  // NaN where absent
};

// CSV: step,time,w1,kl_optional (empty kl cell when unavailable).
std::string trace_csv(const FlowTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const FlowTrace& trace);
TraceTable read_trace_csv(const std::filesystem::path& path);

}  // namespace brflow

#endif  // BRFLOW_IO_HPP_
