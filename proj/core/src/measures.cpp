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

#include "brflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "brflow/error.hpp"
#include "brflow/random.hpp"

namespace brflow {
namespace {

constexpr double kMassTolerance = 1e-12;
constexpr double kGrowthMargin = 5.0;

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) fail(ErrorCode::kGridMismatch, std::string(what) + ": densities live on different grids");
}

void require_dim1(const ParticleEnsemble& e, const char* what) {
  if (e.dim() != 1) {
    fail(ErrorCode::kDimUnsupported,
         std::string(what) + ": exact W1 needs dim = 1, got " + std::to_string(e.dim()));
  }
}

std::vector<double> sorted_coords(const ParticleEnsemble& e) {
  std::vector<double> xs(e.positions().begin(), e.positions().end());
  std::sort(xs.begin(), xs.end());
  return xs;
}

// Integral over [0, len] of |g| for g linear from g0 to g1.
double abs_linear_integral(double g0, double g1, double len) {
  if ((g0 >= 0.0 && g1 >= 0.0) || (g0 <= 0.0 && g1 <= 0.0)) {
    return 0.5 * (std::abs(g0) + std::abs(g1)) * len;
  }
  const double a = std::abs(g0);
  const double b = std::abs(g1);
  return 0.5 * (a * a + b * b) / (a + b) * len;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(double x_min, double x_max, std::size_t n) : x_min_(x_min), x_max_(x_max) {
  if (n < 2) fail(ErrorCode::kInvalidSpec, "grid.n must be >= 2");
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_min < x_max)) {
    fail(ErrorCode::kInvalidSpec, "grid requires finite x_min < x_max");
  }
  dx_ = (x_max - x_min) / static_cast<double>(n - 1);
  nodes_.resize(n);
  for (std::size_t i = 0; i < n; ++i) nodes_[i] = x_min + static_cast<double>(i) * dx_;
  nodes_.back() = x_max;
}

Grid Grid::standard() { return Grid(-10.0, 10.0, 2001); }

double Grid::integrate(std::span<const double> values) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += weight(i) * values[i];
  return acc;
}

// ---------------------------------------------------------------------------
// GridDensity

GridDensity::GridDensity(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    fail(ErrorCode::kInvalidSpec, "density has " + std::to_string(values_.size()) +
                                      " values for a grid of " + std::to_string(grid_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      fail(ErrorCode::kNonFinite, "density value at node " + std::to_string(i) + " is not finite");
    }
    if (values_[i] < 0.0) {
      fail(ErrorCode::kNegativeValue, "density value at node " + std::to_string(i) + " is negative");
    }
  }
  const double m = mass();
  if (std::abs(m - 1.0) > kMassTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "density integrates to " << m << ", expected 1";
    fail(ErrorCode::kInvalidSpec, os.str());
  }
}

double GridDensity::mean() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) acc += grid_.weight(i) * grid_.node(i) * values_[i];
  return acc;
}

std::vector<double> GridDensity::cdf() const {
  std::vector<double> out(values_.size(), 0.0);
  const double half_dx = 0.5 * grid_.dx();
  for (std::size_t i = 1; i < values_.size(); ++i) {
    out[i] = out[i - 1] + half_dx * (values_[i - 1] + values_[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ParticleEnsemble

ParticleEnsemble::ParticleEnsemble(std::size_t dim, std::vector<double> positions,
                                   SeedLineage lineage)
    : dim_(dim), positions_(std::move(positions)), lineage_(lineage) {
  if (dim_ == 0) fail(ErrorCode::kInvalidSpec, "ensemble dim must be >= 1");
  if (positions_.empty() || positions_.size() % dim_ != 0) {
    fail(ErrorCode::kInvalidSpec, "ensemble needs N >= 1 points of dimension " + std::to_string(dim_));
  }
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    if (!std::isfinite(positions_[i])) {
      fail(ErrorCode::kNonFinite, "particle " + std::to_string(i / dim_) + " has a non-finite coordinate");
    }
  }
}

std::vector<double> ParticleEnsemble::mean() const {
  std::vector<double> m(dim_, 0.0);
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim_; ++k) m[k] += positions_[i * dim_ + k];
  }
  for (double& v : m) v /= static_cast<double>(n);
  return m;
}

std::vector<double> ParticleEnsemble::variance() const {
  const std::vector<double> m = mean();
  std::vector<double> v(dim_, 0.0);
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim_; ++k) {
      const double d = positions_[i * dim_ + k] - m[k];
      v[k] += d * d;
    }
  }
  for (double& x : v) x /= static_cast<double>(n);
  return v;
}

// ---------------------------------------------------------------------------
// MeasureView

MeasureView::MeasureView(const GridDensity& density) : source_(&density) {}
MeasureView::MeasureView(const ParticleEnsemble& ensemble) : source_(&ensemble) {}

std::size_t MeasureView::dim() const {
  if (auto* e = std::get_if<const ParticleEnsemble*>(&source_)) return (*e)->dim();
  return 1;
}

std::size_t MeasureView::size() const {
  return std::visit([](auto* s) { return s->size(); }, source_);
}

std::span<const double> MeasureView::point(std::size_t i) const {
  if (auto* e = std::get_if<const ParticleEnsemble*>(&source_)) return (*e)->point(i);
  const GridDensity* d = std::get<const GridDensity*>(source_);
  return d->grid().nodes().subspan(i, 1);
}

double MeasureView::mass(std::size_t i) const {
  if (auto* e = std::get_if<const ParticleEnsemble*>(&source_)) {
    return 1.0 / static_cast<double>((*e)->size());
  }
  const GridDensity* d = std::get<const GridDensity*>(source_);
  return d->grid().weight(i) * (*d)[i];
}

const GridDensity* MeasureView::density() const {
  auto* d = std::get_if<const GridDensity*>(&source_);
  return d ? *d : nullptr;
}

const ParticleEnsemble* MeasureView::ensemble() const {
  auto* e = std::get_if<const ParticleEnsemble*>(&source_);
  return e ? *e : nullptr;
}

// ---------------------------------------------------------------------------
// ReferenceMeasure

ReferenceMeasure::ReferenceMeasure(std::string name, std::size_t dim, Potential potential,
                                   Gradient gradient, std::optional<Grid> grid,
                                   Sampler sampler, std::optional<double> analytic_m1)
    : name_(std::move(name)),
      dim_(dim),
      potential_(std::move(potential)),
      gradient_(std::move(gradient)),
      grid_(std::move(grid)),
      sampler_(std::move(sampler)),
      analytic_m1_(analytic_m1) {
  if (dim_ == 0) fail(ErrorCode::kInvalidSpec, "reference dim must be >= 1");
  if (!potential_) fail(ErrorCode::kInvalidSpec, "reference '" + name_ + "' has no potential");
  if (!grid_) return;
  if (dim_ != 1) {
    fail(ErrorCode::kDimUnsupported, "reference '" + name_ + "': grids are one-dimensional");
  }

  const Grid& g = *grid_;
  std::vector<double> u(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    u[i] = potential_(g.nodes().subspan(i, 1));
    if (std::isnan(u[i]) || u[i] == -std::numeric_limits<double>::infinity()) {
      fail(ErrorCode::kInvalidSpec, "reference '" + name_ + "': potential is not bounded below at node " +
                                        std::to_string(i));
    }
  }
  const double u_min = *std::min_element(u.begin(), u.end());
  if (!std::isfinite(u_min)) {
    fail(ErrorCode::kInvalidSpec, "reference '" + name_ + "': potential is infinite on the whole grid");
  }
  if (u.front() - u_min < kGrowthMargin || u.back() - u_min < kGrowthMargin) {
    fail(ErrorCode::kInvalidSpec,
         "reference '" + name_ + "': potential does not grow by at least 5 toward the grid ends; "
         "widen the grid or steepen the potential");
  }

  std::vector<double> w(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) w[i] = std::exp(-(u[i] - u_min));
  const double z_shifted = g.integrate(w);
  for (double& x : w) x /= z_shifted;
  log_z_ = std::log(z_shifted) - u_min;
  density_.emplace(g, std::move(w));

  double m1 = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) m1 += g.weight(i) * std::abs(g.node(i)) * (*density_)[i];
  m1_ = m1;
}

ReferenceMeasure ReferenceMeasure::gaussian(double scale, std::optional<Grid> grid,
                                            std::size_t dim) {
  if (!(scale > 0.0)) fail(ErrorCode::kInvalidSpec, "gaussian reference needs scale > 0");
  const double inv_var = 1.0 / (scale * scale);
  auto potential = [inv_var](std::span<const double> x) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return 0.5 * inv_var * r2;
  };
  auto gradient = [inv_var](std::span<const double> x, std::span<double> out) {
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = inv_var * x[k];
  };
  auto sampler = [scale](std::mt19937_64& rng, std::span<double> out) {
    std::normal_distribution<double> normal(0.0, scale);
    for (double& v : out) v = normal(rng);
  };
  const double d = static_cast<double>(dim);
  const double m1 = scale * std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (d + 1.0)) - std::lgamma(0.5 * d));
  return ReferenceMeasure("gaussian", dim, potential, gradient, std::move(grid), sampler, m1);
}

ReferenceMeasure ReferenceMeasure::laplace(double scale, std::optional<Grid> grid,
                                           std::size_t dim) {
  if (!(scale > 0.0)) fail(ErrorCode::kInvalidSpec, "laplace reference needs scale > 0");
  auto potential = [scale](std::span<const double> x) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return std::sqrt(r2) / scale;
  };
  auto gradient = [scale](std::span<const double> x, std::span<double> out) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double r = std::sqrt(r2);
    for (std::size_t k = 0; k < x.size(); ++k) out[k] = r > 0.0 ? x[k] / (scale * r) : 0.0;
  };
  // Radius ~ Gamma(d, b) times a uniform direction.
  auto sampler = [scale, dim](std::mt19937_64& rng, std::span<double> out) {
    std::gamma_distribution<double> radius(static_cast<double>(dim), scale);
    std::normal_distribution<double> normal;
    double norm2 = 0.0;
    for (double& v : out) {
      v = normal(rng);
      norm2 += v * v;
    }
    const double r = radius(rng) / std::sqrt(norm2);
    for (double& v : out) v *= r;
  };
  return ReferenceMeasure("laplace", dim, potential, gradient, std::move(grid), sampler,
                          static_cast<double>(dim) * scale);
}

ReferenceMeasure ReferenceMeasure::quartic(double scale, std::optional<Grid> grid) {
  if (!(scale > 0.0)) fail(ErrorCode::kInvalidSpec, "quartic reference needs scale > 0");
  const double s4 = scale * scale * scale * scale;
  auto potential = [s4](std::span<const double> x) {
    const double v = x[0] * x[0];
    return 0.25 * v * v / s4;
  };
  auto gradient = [s4](std::span<const double> x, std::span<double> out) {
    out[0] = x[0] * x[0] * x[0] / s4;
  };
  return ReferenceMeasure("quartic", 1, potential, gradient, std::move(grid));
}

const Grid& ReferenceMeasure::grid() const {
  if (!grid_) fail(ErrorCode::kDimUnsupported, "reference '" + name_ + "' has no grid");
  return *grid_;
}

const GridDensity& ReferenceMeasure::density() const {
  if (!density_) fail(ErrorCode::kDimUnsupported, "reference '" + name_ + "' has no grid");
  return *density_;
}

double ReferenceMeasure::potential(std::span<const double> x) const {
  return potential_(x) + log_z_;
}

void ReferenceMeasure::grad_potential(std::span<const double> x, std::span<double> out) const {
  if (!gradient_) fail(ErrorCode::kInvalidSpec, "reference '" + name_ + "' has no gradient");
  gradient_(x, out);
}

double ReferenceMeasure::first_moment() const {
  if (m1_) return *m1_;
  if (analytic_m1_) return *analytic_m1_;
  fail(ErrorCode::kDimUnsupported, "reference '" + name_ + "': first moment needs a grid");
}

void ReferenceMeasure::sample(std::mt19937_64& rng, std::span<double> out) const {
  if (!sampler_) fail(ErrorCode::kDimUnsupported, "reference '" + name_ + "' has no sampler");
  sampler_(rng, out);
}

// ---------------------------------------------------------------------------
// Operations

GridDensity normalize_density(std::span<const double> raw_values, const Grid& grid) {
  if (raw_values.size() != grid.size()) {
    fail(ErrorCode::kInvalidSpec, "normalize_density: size does not match grid");
  }
  for (std::size_t i = 0; i < raw_values.size(); ++i) {
    if (!std::isfinite(raw_values[i])) {
      fail(ErrorCode::kNonFinite, "normalize_density: value at node " + std::to_string(i) + " is not finite");
    }
    if (raw_values[i] < 0.0) {
      fail(ErrorCode::kNegativeValue, "normalize_density: value at node " + std::to_string(i) + " is negative");
    }
  }
  const double z = grid.integrate(raw_values);
  if (!(z > 0.0)) fail(ErrorCode::kAllZero, "normalize_density: integral is zero");
  std::vector<double> values(raw_values.begin(), raw_values.end());
  for (double& v : values) v /= z;
  return GridDensity(grid, std::move(values));
}

GridDensity mix(const GridDensity& p, const GridDensity& q, double w) {
  require_same_grid(p.grid(), q.grid(), "mix");
  std::vector<double> values(p.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = (1.0 - w) * p[i] + w * q[i];
  return GridDensity(p.grid(), std::move(values));
}

GridDensity gaussian_density(const Grid& grid, double mean, double scale) {
  std::vector<double> raw(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double z = (grid.node(i) - mean) / scale;
    raw[i] = std::exp(-0.5 * z * z);
  }
  return normalize_density(raw, grid);
}

double w1_grid(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p.grid(), q.grid(), "w1_grid");
  const std::vector<double> fp = p.cdf();
  const std::vector<double> fq = q.cdf();
  double acc = 0.0;
  for (std::size_t i = 0; i < fp.size(); ++i) acc += p.grid().weight(i) * std::abs(fp[i] - fq[i]);
  return acc;
}

double w1_particles_1d(const ParticleEnsemble& a, const ParticleEnsemble& b) {
  require_dim1(a, "w1_particles_1d");
  require_dim1(b, "w1_particles_1d");
  const std::vector<double> xa = sorted_coords(a);
  const std::vector<double> xb = sorted_coords(b);
  const std::size_t na = xa.size();
  const std::size_t nb = xb.size();
  if (na == nb) {
    double acc = 0.0;
    for (std::size_t i = 0; i < na; ++i) acc += std::abs(xa[i] - xb[i]);
    return acc / static_cast<double>(na);
  }
  // Quantile coupling: walk the merged breakpoints k/na and l/nb, compared in
  // integers to avoid rounding ties.
  double acc = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t prev_num = 0;  // current level u = prev_num / (na * nb)
  const double denom = static_cast<double>(na) * static_cast<double>(nb);
  while (i < na && j < nb) {
    const std::size_t next_a = (i + 1) * nb;
    const std::size_t next_b = (j + 1) * na;
    const std::size_t next = std::min(next_a, next_b);
    acc += static_cast<double>(next - prev_num) / denom * std::abs(xa[i] - xb[j]);
    prev_num = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return acc;
}

double w1_particles_grid(const ParticleEnsemble& a, const GridDensity& p) {
  require_dim1(a, "w1_particles_grid");
  const std::vector<double> xs = sorted_coords(a);
  const std::vector<double> fp = p.cdf();
  const Grid& g = p.grid();
  const double n = static_cast<double>(xs.size());

  auto grid_cdf = [&](double x) {
    if (x <= g.x_min()) return 0.0;
    if (x >= g.x_max()) return 1.0;
    double s = (x - g.x_min()) / g.dx();
    std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(s), g.size() - 2);
    const double t = (x - g.node(k)) / g.dx();
    return fp[k] + t * (fp[k + 1] - fp[k]);
  };

  std::vector<double> breaks;
  breaks.reserve(xs.size() + g.size());
  breaks.insert(breaks.end(), xs.begin(), xs.end());
  breaks.insert(breaks.end(), g.nodes().begin(), g.nodes().end());
  std::sort(breaks.begin(), breaks.end());

  double acc = 0.0;
  std::size_t below = 0;  // particles <= left end of the current interval
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double l = breaks[k];
    const double r = breaks[k + 1];
    while (below < xs.size() && xs[below] <= l) ++below;
    if (r <= l) continue;
    const double fe = static_cast<double>(below) / n;
    acc += abs_linear_integral(grid_cdf(l) - fe, grid_cdf(r) - fe, r - l);
  }
  return acc;
}

double sliced_w1(const ParticleEnsemble& a, const ParticleEnsemble& b, std::size_t directions,
                 std::uint64_t seed) {
  if (a.dim() != b.dim()) fail(ErrorCode::kDimUnsupported, "sliced_w1: dimensions differ");
  if (a.dim() == 1) return w1_particles_1d(a, b);
  if (directions == 0) fail(ErrorCode::kInvalidSpec, "sliced_w1 needs at least one direction");
  const std::size_t d = a.dim();
  auto rng = make_stream(seed, StreamTag::kSlicing);
  std::normal_distribution<double> normal;
  auto project = [d](const ParticleEnsemble& e, const std::vector<double>& dir) {
    std::vector<double> out(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += e.point(i)[k] * dir[k];
      out[i] = s;
    }
    return ParticleEnsemble(1, std::move(out));
  };
  double acc = 0.0;
  std::vector<double> dir(d);
  for (std::size_t r = 0; r < directions; ++r) {
    double norm2 = 0.0;
    for (double& v : dir) {
      v = normal(rng);
      norm2 += v * v;
    }
    for (double& v : dir) v /= std::sqrt(norm2);
    acc += w1_particles_1d(project(a, dir), project(b, dir));
  }
  return acc / static_cast<double>(directions);
}

double kl_grid(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p.grid(), q.grid(), "kl_grid");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      fail(ErrorCode::kSupportViolation,
           "kl_grid: p > 0 where q = 0 at node " + std::to_string(i) + " (KL is infinite)");
    }
    acc += p.grid().weight(i) * p[i] * std::log(p[i] / q[i]);
  }
  return std::max(acc, 0.0);
}

double tv_grid(const GridDensity& p, const GridDensity& q) {
  require_same_grid(p.grid(), q.grid(), "tv_grid");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += p.grid().weight(i) * std::abs(p[i] - q[i]);
  return 0.5 * acc;
}

double first_moment(const ReferenceMeasure& ref) { return ref.first_moment(); }

ParticleEnsemble sample_density(const GridDensity& density, std::size_t n, std::uint64_t seed) {
  if (n == 0) fail(ErrorCode::kInvalidSpec, "sample_density needs n >= 1");
  const Grid& g = density.grid();
  const std::vector<double> cum = density.cdf();
  const double total = cum.back();
  auto rng = make_stream(seed, StreamTag::kSampling);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  std::vector<double> xs(n);
  for (std::size_t s = 0; s < n; ++s) {
    const double u = std::min(uniform(rng), std::nextafter(1.0, 0.0)) * total;
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    std::size_t cell = static_cast<std::size_t>(std::distance(cum.begin(), it));
    cell = std::clamp<std::size_t>(cell, 1, g.size() - 1) - 1;
    const double p0 = density[cell];
    const double p1 = density[cell + 1];
    const double cell_mass = cum[cell + 1] - cum[cell];
    const double v = cell_mass > 0.0 ? std::clamp((u - cum[cell]) / cell_mass, 0.0, 1.0) : 0.5;
    // Invert p0 t + (p1 - p0) t^2 / 2 = v (p0 + p1) / 2 on [0, 1].
    const double disc = p0 * p0 + (p1 - p0) * v * (p0 + p1);
    const double t = v * (p0 + p1) / (p0 + std::sqrt(std::max(disc, 0.0)));
    xs[s] = g.node(cell) + std::clamp(t, 0.0, 1.0) * g.dx();
  }
  return ParticleEnsemble(1, std::move(xs), SeedLineage{seed, 0, 0});
}

ParticleEnsemble sample_reference(const ReferenceMeasure& ref, std::size_t n, std::uint64_t seed) {
  if (ref.dim() == 1 && ref.has_grid()) return sample_density(ref.density(), n, seed);
  if (!ref.has_sampler()) {
    fail(ErrorCode::kDimUnsupported,
         "sample_reference: reference '" + ref.name() + "' has neither a grid nor a sampler");
  }
  if (n == 0) fail(ErrorCode::kInvalidSpec, "sample_reference needs n >= 1");
  auto rng = make_stream(seed, StreamTag::kSampling);
  std::vector<double> xs(n * ref.dim());
  for (std::size_t i = 0; i < n; ++i) ref.sample(rng, std::span<double>(xs).subspan(i * ref.dim(), ref.dim()));
  return ParticleEnsemble(ref.dim(), std::move(xs), SeedLineage{seed, 0, 0});
}

}  // namespace brflow
