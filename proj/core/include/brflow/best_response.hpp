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


#ifndef BRFLOW_BEST_RESPONSE_HPP_
#define BRFLOW_BEST_RESPONSE_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "brflow/measures.hpp"
#include "brflow/objectives.hpp"

namespace brflow {

// Normalized density proportional to exp(sign * delta(x) / sigma) xi(x) on
// the reference grid. sign = -1 is the minimizing player's best response,
// sign = +1 the maximizing player's.
GridDensity gibbs_grid(const Linearization& lin, const ReferenceMeasure& ref, double sigma,
                       double sign = -1.0);

// Psi_sigma[nu] on the reference grid.
GridDensity br_grid(const FlatObjective& obj, const ReferenceMeasure& ref, double sigma,
                    const GridDensity& nu);

struct LangevinConfig {
  double h_in = 1e-3;
  std::size_t steps = 10000;  // K
  std::uint64_t seed = 0;
  std::size_t threads = 0;    // 0: thread_count()
};

// Runs K unadjusted Langevin steps
//   theta <- theta - h (grad delta(theta) + sigma grad U(theta)) + sqrt(2 h sigma) N(0, I)
// from each listed particle, in place. Particle i draws from its own stream
// derived from (seed, stream, i), so results do not depend on the thread count.
void run_langevin_chains(const Linearization& lin, const ReferenceMeasure& ref, double sigma,
                         const LangevinConfig& cfg, std::uint64_t stream,
                         std::span<double> positions, std::size_t dim,
                         std::span<const std::size_t> indices);

// Inner loop of the particle scheme: nu is frozen at the input ensemble and
// every particle is moved by its own chain. The stream index is the
// ensemble's outer step counter.
ParticleEnsemble br_langevin(const FlatObjective& obj, const ReferenceMeasure& ref, double sigma,
                             const ParticleEnsemble& ensemble, const LangevinConfig& cfg);

struct ContractionReport {
  double c_f = 0.0;
  double l_f = 0.0;
  double m1 = 0.0;
  double sigma = 0.0;
  double alpha = 1.0;
  double l_psi = 0.0;
  double sigma_min = 0.0;
  bool contractive = false;
  double rate = 0.0;  // alpha (1 - L_psi); NaN when not contractive
};

// L_psi = (L_F / sigma) e^{2 C_F / sigma} (1 + e^{2 C_F / sigma}) m1 and
// sigma_min = 2 C_F + e (e + 1) L_F m1.
ContractionReport contraction_report(double c_f, double l_f, double sigma, double m1,
                                     double alpha = 1.0);

double lipschitz_factor(double c_f, double l_f, double sigma, double m1);
double sigma_threshold(double c_f, double l_f, double m1);

// Sensitivity of Psi_sigma to sigma:
// (C_F / (sigma sigma')) exp(C_F (min(sigma, sigma') + 1 / sigma')) (1 + e^{2 C_F / sigma}) m1.
double stability_constant(double c_f, double sigma, double sigma_prime, double m1);

// |sigma - sigma'| * stability_constant / (1 - L_psi(sigma)); +inf when the
// sigma map is not contractive.
double displacement_bound(double c_f, double l_f, double sigma, double sigma_prime, double m1);

struct DensityRatio {
  double min = 0.0;
  double max = 0.0;
};

// Pointwise range of p / xi over nodes where xi > 0.
DensityRatio density_ratio(const GridDensity& p, const ReferenceMeasure& ref);

}  // namespace brflow

#endif  // BRFLOW_BEST_RESPONSE_HPP_
