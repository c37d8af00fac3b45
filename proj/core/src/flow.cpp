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


#include "brflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "brflow/error.hpp"
#include "brflow/parallel.hpp"
#include "brflow/random.hpp"

namespace brflow {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool should_record(std::size_t k, std::size_t total, std::size_t stride) {
  return k == total || (stride > 0 && k % stride == 0);
}

bool should_snapshot(std::size_t k, std::size_t total, std::size_t stride) {
  return k != total && stride > 0 && k % stride == 0;
}

double kl_or_nan(const GridDensity& p, const GridDensity& q) {
  try {
    return kl_grid(p, q);
  } catch (const Error&) {
    return kNaN;
  }
}

}  // namespace

void FlowConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorCode::kNonpositiveSigma, "sigma must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) fail(ErrorCode::kConfigViolation, "alpha must be positive");
  if (!(h_out >= 0.0) || !std::isfinite(h_out)) fail(ErrorCode::kConfigViolation, "h_out must be >= 0");
  if (alpha * h_out > 1.0 + 1e-15) {
    fail(ErrorCode::kConfigViolation, "alpha * h_out = " + std::to_string(alpha * h_out) +
                                          " exceeds 1; the explicit Euler step needs alpha * h_out <= 1");
  }
  if (!(inner.h_in > 0.0)) fail(ErrorCode::kConfigViolation, "inner.h_in must be positive");
  if (particles == 0) fail(ErrorCode::kConfigViolation, "inner.N must be >= 1");
  if (!(tol > 0.0)) fail(ErrorCode::kConfigViolation, "tol must be positive");
  if (trace_stride == 0) fail(ErrorCode::kConfigViolation, "trace_stride must be >= 1");
}

nlohmann::json to_json(const FlowConfig& cfg) {
  return {
      {"alpha", cfg.alpha},
      {"sigma", cfg.sigma},
      {"h_out", cfg.h_out},
      {"steps", cfg.steps},
      {"inner", {{"h_in", cfg.inner.h_in}, {"K", cfg.inner.steps}, {"N", cfg.particles},
                 {"seed", cfg.inner.seed}}},
      {"tol", cfg.tol},
      {"max_iter", cfg.max_iter},
      {"trace_stride", cfg.trace_stride},
      {"snapshot_stride", cfg.snapshot_stride},
  };
}

FlowTrace euler_flow_grid(const FlatObjective& obj, const ReferenceMeasure& ref,
                          const FlowConfig& cfg, const GridDensity& nu0,
                          const GridDensity* target) {
  cfg.validate();
  if (!(nu0.grid() == ref.grid())) {
    fail(ErrorCode::kGridMismatch, "euler_flow_grid: initial density is not on the reference grid");
  }
  if (target && !(target->grid() == ref.grid())) {
    fail(ErrorCode::kGridMismatch, "euler_flow_grid: target is not on the reference grid");
  }
  const double w = cfg.alpha * cfg.h_out;

  FlowTrace trace;
  trace.w1_to_target = target != nullptr;
  trace.config_echo = to_json(cfg);

  GridDensity nu = nu0;
  GridDensity last_recorded = nu0;
  for (std::size_t k = 0;; ++k) {
    if (should_record(k, cfg.steps, cfg.trace_stride)) {
      if (target) {
        trace.steps.push_back(k);
        trace.times.push_back(static_cast<double>(k) * cfg.h_out);
        trace.w1.push_back(w1_grid(nu, *target));
        trace.kl.push_back(kl_or_nan(nu, *target));
      } else if (k > 0) {
        trace.steps.push_back(k);
        trace.times.push_back(static_cast<double>(k) * cfg.h_out);
        trace.w1.push_back(w1_grid(nu, last_recorded));
        trace.kl.push_back(kNaN);
        last_recorded = nu;
      }
    }
    if (should_snapshot(k, cfg.steps, cfg.snapshot_stride)) trace.density_snapshots.emplace_back(k, nu);
    if (k == cfg.steps) break;
    nu = mix(nu, br_grid(obj, ref, cfg.sigma, nu), w);
  }
  trace.density_snapshots.emplace_back(cfg.steps, nu);
  trace.final_density = std::move(nu);
  return trace;
}

FixedPointResult picard_fixed_point(const FlatObjective& obj, const ReferenceMeasure& ref,
                                    double sigma, double tol, std::size_t max_iter) {
  const RegularityConstants k = obj.constants();
  FixedPointResult result{ref.density(), 0, 0.0,
                          contraction_report(k.c_f, k.l_f, sigma, ref.first_moment()), {}};
  if (!result.report.contractive) {
    result.warnings.push_back("sigma = " + std::to_string(sigma) + " is below the contraction threshold " +
                              std::to_string(result.report.sigma_min) +
                              " (L_psi = " + std::to_string(result.report.l_psi) +
                              "); convergence is not guaranteed");
  }
  for (std::size_t it = 1; it <= max_iter; ++it) {
    GridDensity next = br_grid(obj, ref, sigma, result.density);
    result.residual = w1_grid(next, result.density);
    result.iterations = it;
    if (result.residual < tol) return result;
    result.density = std::move(next);
  }
  fail(ErrorCode::kNoConvergence,
       "picard_fixed_point: residual " + std::to_string(result.residual) + " after " +
           std::to_string(max_iter) + " iterations (tol " + std::to_string(tol) +
           "); sigma may be below the contraction threshold");
}

FlowTrace particle_flow(const FlatObjective& obj, const ReferenceMeasure& ref,
                        const FlowConfig& cfg, const ParticleEnsemble& ens0,
                        const GridDensity* target) {
  cfg.validate();
  if (ens0.dim() != ref.dim() || ens0.dim() != obj.dim()) {
    fail(ErrorCode::kDimUnsupported, "particle_flow: ensemble, reference and objective dims differ");
  }
  if (target && ens0.dim() != 1) {
    fail(ErrorCode::kDimUnsupported, "particle_flow: grid targets need dim = 1");
  }
  const double w = cfg.alpha * cfg.h_out;
  const std::size_t dim = ens0.dim();

  FlowTrace trace;
  trace.w1_to_target = target != nullptr;
  trace.config_echo = to_json(cfg);

  auto distance = [&](const ParticleEnsemble& a, const ParticleEnsemble& b) {
    return sliced_w1(a, b, 64, derive_seed(cfg.inner.seed, StreamTag::kSlicing));
  };

  ParticleEnsemble ens = ens0;
  ens.lineage().seed = cfg.inner.seed;
  ParticleEnsemble last_recorded = ens;
  std::vector<std::size_t> replaced;
  for (std::size_t t = 0;; ++t) {
    if (should_record(t, cfg.steps, cfg.trace_stride)) {
      if (target) {
        trace.steps.push_back(t);
        trace.times.push_back(static_cast<double>(t) * cfg.h_out);
        trace.w1.push_back(w1_particles_grid(ens, *target));
        trace.kl.push_back(kNaN);
      } else if (t > 0) {
        trace.steps.push_back(t);
        trace.times.push_back(static_cast<double>(t) * cfg.h_out);
        trace.w1.push_back(distance(ens, last_recorded));
        trace.kl.push_back(kNaN);
        last_recorded = ens;
      }
    }
    if (should_snapshot(t, cfg.steps, cfg.snapshot_stride)) trace.ensemble_snapshots.emplace_back(t, ens);
    if (t == cfg.steps) break;

    replaced.clear();
    auto coin = make_stream(cfg.inner.seed, StreamTag::kReplacement, t);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t i = 0; i < ens.size(); ++i) {
      if (uniform(coin) < w) replaced.push_back(i);
    }
    std::vector<double> pos(ens.positions().begin(), ens.positions().end());
    if (!replaced.empty()) {
      const auto lin = obj.linearize(ens);
      run_langevin_chains(*lin, ref, cfg.sigma, cfg.inner, t, pos, dim, replaced);
    }
    SeedLineage lineage = ens.lineage();
    lineage.outer_steps = t + 1;
    lineage.inner_steps += cfg.inner.steps;
    ens = ParticleEnsemble(dim, std::move(pos), lineage);
  }
  trace.ensemble_snapshots.emplace_back(cfg.steps, ens);
  trace.final_ensemble = std::move(ens);
  return trace;
}

std::vector<StabilityRow> sigma_stability_experiment(const FlatObjective& obj,
                                                     const ReferenceMeasure& ref,
                                                     std::span<const double> sigmas, double tol,
                                                     std::size_t max_iter) {
  std::vector<std::optional<GridDensity>> fixed(sigmas.size());
  parallel_for(sigmas.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      fixed[i] = picard_fixed_point(obj, ref, sigmas[i], tol, max_iter).density;
    }
  });
  const RegularityConstants k = obj.constants();
  const double m1 = ref.first_moment();
  std::vector<StabilityRow> rows;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    for (std::size_t j = 0; j < sigmas.size(); ++j) {
      if (i == j) continue;
      StabilityRow row;
      row.sigma = sigmas[i];
      row.sigma_prime = sigmas[j];
      row.measured = w1_grid(*fixed[i], *fixed[j]);
      row.bound = displacement_bound(k.c_f, k.l_f, sigmas[i], sigmas[j], m1);
      row.l_psi = lipschitz_factor(k.c_f, k.l_f, sigmas[i], m1);
      rows.push_back(row);
    }
  }
  return rows;
}

double fit_exponential_rate(std::span<const double> times, std::span<const double> w1,
                            double fraction) {
  const std::size_t n = std::min(times.size(), w1.size());
  const auto skip = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - fraction)));
  double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  std::size_t m = 0;
  for (std::size_t i = skip; i < n; ++i) {
    if (!(w1[i] > 0.0) || !std::isfinite(w1[i])) continue;
    const double y = std::log(w1[i]);
    st += times[i];
    sy += y;
    stt += times[i] * times[i];
    sty += times[i] * y;
    ++m;
  }
  if (m < 2) return kNaN;
  const double mm = static_cast<double>(m);
  const double denom = mm * stt - st * st;
  if (denom == 0.0) return kNaN;
  return -(mm * sty - st * sy) / denom;
}

}  // namespace brflow
