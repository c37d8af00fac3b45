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


#include "brflow/best_response.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include "brflow/error.hpp"
#include "brflow/parallel.hpp"
#include "brflow/random.hpp"

namespace brflow {
namespace {

void require_positive_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    fail(ErrorCode::kNonpositiveSigma, "sigma must be positive and finite, got " + std::to_string(sigma));
  }
}

}  // namespace

GridDensity gibbs_grid(const Linearization& lin, const ReferenceMeasure& ref, double sigma,
                       double sign) {
  require_positive_sigma(sigma);
  const Grid& g = ref.grid();
  std::vector<double> expo(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto x = g.nodes().subspan(i, 1);
    expo[i] = sign * lin.delta(x) / sigma - ref.potential(x);
  }
  const double top = *std::max_element(expo.begin(), expo.end());
  for (double& e : expo) e = std::exp(e - top);
  return normalize_density(expo, g);
}

GridDensity br_grid(const FlatObjective& obj, const ReferenceMeasure& ref, double sigma,
                    const GridDensity& nu) {
  require_positive_sigma(sigma);
  if (!(nu.grid() == ref.grid())) {
    fail(ErrorCode::kGridMismatch, "br_grid: measure and reference live on different grids");
  }
  return gibbs_grid(*obj.linearize(nu), ref, sigma);
}

void run_langevin_chains(const Linearization& lin, const ReferenceMeasure& ref, double sigma,
                         const LangevinConfig& cfg, std::uint64_t stream,
                         std::span<double> positions, std::size_t dim,
                         std::span<const std::size_t> indices) {
  require_positive_sigma(sigma);
  if (!(cfg.h_in > 0.0)) fail(ErrorCode::kConfigViolation, "inner.h_in must be positive");
  if (cfg.steps == 0 || indices.empty()) return;
  const double h = cfg.h_in;
  const double noise = std::sqrt(2.0 * h * sigma);
  std::atomic<bool> diverged{false};

  parallel_for(
      indices.size(),
      [&](std::size_t begin, std::size_t end) {
        std::vector<double> g_delta(dim);
        std::vector<double> g_u(dim);
        std::normal_distribution<double> normal;
        for (std::size_t j = begin; j < end; ++j) {
          const std::size_t p = indices[j];
          auto rng = make_stream(cfg.seed, StreamTag::kLangevin, stream, p);
          std::span<double> theta = positions.subspan(p * dim, dim);
          for (std::size_t k = 0; k < cfg.steps; ++k) {
            lin.grad_delta(theta, g_delta);
            ref.grad_potential(theta, g_u);
            for (std::size_t c = 0; c < dim; ++c) {
              theta[c] += -h * (g_delta[c] + sigma * g_u[c]) + noise * normal(rng);
            }
          }
          for (double v : theta) {
            if (!std::isfinite(v)) diverged = true;
          }
        }
      },
      cfg.threads);

  if (diverged) {
    fail(ErrorCode::kNonFinite,
         "Langevin chain diverged; reduce inner.h_in (currently " + std::to_string(h) + ")");
  }
}

ParticleEnsemble br_langevin(const FlatObjective& obj, const ReferenceMeasure& ref, double sigma,
                             const ParticleEnsemble& ensemble, const LangevinConfig& cfg) {
  if (ensemble.dim() != ref.dim() || ensemble.dim() != obj.dim()) {
    fail(ErrorCode::kDimUnsupported, "br_langevin: ensemble, reference and objective dims differ");
  }
  const auto lin = obj.linearize(ensemble);
  std::vector<double> pos(ensemble.positions().begin(), ensemble.positions().end());
  std::vector<std::size_t> all(ensemble.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  run_langevin_chains(*lin, ref, sigma, cfg, ensemble.lineage().outer_steps, pos, ensemble.dim(), all);
  SeedLineage lineage = ensemble.lineage();
  lineage.inner_steps += cfg.steps;
  return ParticleEnsemble(ensemble.dim(), std::move(pos), lineage);
}

double lipschitz_factor(double c_f, double l_f, double sigma, double m1) {
  const double e = std::exp(2.0 * c_f / sigma);
  return l_f / sigma * e * (1.0 + e) * m1;
}

double sigma_threshold(double c_f, double l_f, double m1) {
  constexpr double e = std::numbers::e;
  return 2.0 * c_f + e * (e + 1.0) * l_f * m1;
}

ContractionReport contraction_report(double c_f, double l_f, double sigma, double m1,
                                     double alpha) {
  require_positive_sigma(sigma);
  ContractionReport r;
  r.c_f = c_f;
  r.l_f = l_f;
  r.m1 = m1;
  r.sigma = sigma;
  r.alpha = alpha;
  r.l_psi = lipschitz_factor(c_f, l_f, sigma, m1);
  r.sigma_min = sigma_threshold(c_f, l_f, m1);
  r.contractive = r.l_psi < 1.0;
  r.rate = r.contractive ? alpha * (1.0 - r.l_psi) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double stability_constant(double c_f, double sigma, double sigma_prime, double m1) {
  require_positive_sigma(sigma);
  require_positive_sigma(sigma_prime);
  return c_f / (sigma * sigma_prime) *
         std::exp(c_f * (std::min(sigma, sigma_prime) + 1.0 / sigma_prime)) *
         (1.0 + std::exp(2.0 * c_f / sigma)) * m1;
}

double displacement_bound(double c_f, double l_f, double sigma, double sigma_prime, double m1) {
  const double gap = std::abs(sigma - sigma_prime);
  if (gap == 0.0) return 0.0;
  const double l_psi = lipschitz_factor(c_f, l_f, sigma, m1);
  if (!(l_psi < 1.0)) return std::numeric_limits<double>::infinity();
  return gap * stability_constant(c_f, sigma, sigma_prime, m1) / (1.0 - l_psi);
}

DensityRatio density_ratio(const GridDensity& p, const ReferenceMeasure& ref) {
  const GridDensity& xi = ref.density();
  if (!(p.grid() == xi.grid())) fail(ErrorCode::kGridMismatch, "density_ratio: grids differ");
  DensityRatio r{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (xi[i] <= 0.0) continue;
    const double q = p[i] / xi[i];
    r.min = std::min(r.min, q);
    r.max = std::max(r.max, q);
  }
  return r;
}

}  // namespace brflow
