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


#ifndef BRFLOW_FLOW_HPP_
#define BRFLOW_FLOW_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "brflow/best_response.hpp"
#include "brflow/measures.hpp"
#include "brflow/objectives.hpp"

namespace brflow {

struct FlowConfig {
  double alpha = 1.0;
  double sigma = 1.0;
  double h_out = 0.1;
  std::size_t steps = 100;
  // Particle mode: inner chains and ensemble size.
  LangevinConfig inner;
  std::size_t particles = 10000;
  // Fixed-point mode.
  double tol = 1e-10;
  std::size_t max_iter = 100000;
  // Trace every trace_stride steps; keep a snapshot every snapshot_stride
  // steps (0 keeps only the terminal state).
  std::size_t trace_stride = 1;
  std::size_t snapshot_stride = 10;

  // NonpositiveSigma for sigma <= 0, ConfigViolation when alpha * h_out > 1
  // or another field is out of range.
  void validate() const;
};

struct FlowTrace {
  std::vector<std::size_t> steps;
  std::vector<double> times;
  // W1 to the target when one is given, else to the previous recorded state.
  std::vector<double> w1;
  // KL to the target (grid runs with a target only; NaN otherwise).
  std::vector<double> kl;
  bool w1_to_target = false;

  std::vector<std::pair<std::size_t, GridDensity>> density_snapshots;
  std::vector<std::pair<std::size_t, ParticleEnsemble>> ensemble_snapshots;
  std::optional<GridDensity> final_density;
  std::optional<ParticleEnsemble> final_ensemble;

  nlohmann::json config_echo;
};

// Explicit Euler for d nu = alpha (Psi[nu] - nu) dt:
//   nu_{k+1} = (1 - alpha h) nu_k + alpha h Psi[nu_k].
FlowTrace euler_flow_grid(const FlatObjective& obj, const ReferenceMeasure& ref,
                          const FlowConfig& cfg, const GridDensity& nu0,
                          const GridDensity* target = nullptr);

struct FixedPointResult {
  GridDensity density;
  std::size_t iterations = 0;
  double residual = 0.0;  // W1(Psi[density], density)
  ContractionReport report;
  std::vector<std::string> warnings;
};

// nu <- Psi[nu] from xi until W1(Psi[nu], nu) < tol. NoConvergence after
// max_iter iterations.
FixedPointResult picard_fixed_point(const FlatObjective& obj, const ReferenceMeasure& ref,
                                    double sigma, double tol, std::size_t max_iter = 100000);

// Two-loop particle scheme. Each outer step freezes nu at the current
// ensemble, and each particle is independently replaced with probability
// alpha * h_out by the end point of its own inner Langevin chain. Chains whose
// particle is not replaced are never used, so they are not run.
FlowTrace particle_flow(const FlatObjective& obj, const ReferenceMeasure& ref,
                        const FlowConfig& cfg, const ParticleEnsemble& ens0,
                        const GridDensity* target = nullptr);

struct StabilityRow {
  double sigma = 0.0;
  double sigma_prime = 0.0;
  double measured = 0.0;  // W1(nu*_sigma, nu*_sigma')
  double bound = 0.0;
  double l_psi = 0.0;
};

// All ordered pairs (sigma, sigma') with distinct list positions.
std::vector<StabilityRow> sigma_stability_experiment(const FlatObjective& obj,
                                                     const ReferenceMeasure& ref,
                                                     std::span<const double> sigmas, double tol,
                                                     std::size_t max_iter = 100000);

// Least-squares slope r of log w1 ~ a - r t over the final `fraction` of the
// trace, ignoring non-positive or non-finite entries.
double fit_exponential_rate(std::span<const double> times, std::span<const double> w1,
                            double fraction = 2.0 / 3.0);

nlohmann::json to_json(const FlowConfig& cfg);

}  // namespace brflow

#endif  // BRFLOW_FLOW_HPP_
