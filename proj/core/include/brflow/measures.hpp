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

#ifndef BRFLOW_MEASURES_HPP_
#define BRFLOW_MEASURES_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace brflow {

// Uniform one-dimensional grid with n >= 2 nodes x_i = x_min + i * dx.
class Grid {
 public:
  Grid(double x_min, double x_max, std::size_t n);

  // [-10, 10] with 2001 nodes.
  static Grid standard();

  double x_min() const { return x_min_; }
  double x_max() const { return x_max_; }
  std::size_t size() const { return nodes_.size(); }
  double dx() const { return dx_; }
  double node(std::size_t i) const { return nodes_[i]; }
  std::span<const double> nodes() const { return nodes_; }

  // Trapezoidal quadrature weight of node i.
  double weight(std::size_t i) const {
    return (i == 0 || i + 1 == nodes_.size()) ? 0.5 * dx_ : dx_;
  }

  // Trapezoidal integral of values sampled at the nodes.
  double integrate(std::span<const double> values) const;

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.x_min_ == b.x_min_ && a.x_max_ == b.x_max_ && a.size() == b.size();
  }

 private:
  double x_min_;
  double x_max_;
  double dx_;
  std::vector<double> nodes_;
};

// Probability density with respect to Lebesgue measure, sampled on a Grid and
// interpreted as piecewise linear between nodes.
class GridDensity {
 public:
  // Checks non-negativity and unit mass (trapezoidal, within 1e-12).
  GridDensity(Grid grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::size_t size() const { return values_.size(); }

  double mass() const { return grid_.integrate(values_); }
  double mean() const;
  // Cumulative distribution at each node (trapezoidal cell masses).
  std::vector<double> cdf() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

struct SeedLineage {
  std::uint64_t seed = 0;
  std::uint64_t outer_steps = 0;
  std::uint64_t inner_steps = 0;
};

// N equally weighted points in R^d, stored row-major.
class ParticleEnsemble {
 public:
  ParticleEnsemble(std::size_t dim, std::vector<double> positions,
                   SeedLineage lineage = {});

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return positions_.size() / dim_; }
  std::span<const double> point(std::size_t i) const {
    return {positions_.data() + i * dim_, dim_};
  }
  std::span<double> mutable_point(std::size_t i) {
    return {positions_.data() + i * dim_, dim_};
  }
  std::span<const double> positions() const { return positions_; }
  const SeedLineage& lineage() const { return lineage_; }
  SeedLineage& lineage() { return lineage_; }

  // Coordinate-wise sample mean and variance.
  std::vector<double> mean() const;
  std::vector<double> variance() const;

 private:
  std::size_t dim_;
  std::vector<double> positions_;
  SeedLineage lineage_;
};

// Read-only view of a probability measure as weighted support points. A grid
// density contributes its nodes with trapezoidal masses, an ensemble its
// particles with mass 1/N. Integrals against either representation are then
// the same finite sums.
class MeasureView {
 public:
  MeasureView(const GridDensity& density);  // NOLINT(google-explicit-constructor)
  MeasureView(const ParticleEnsemble& ensemble);  // NOLINT(google-explicit-constructor)

  std::size_t dim() const;
  std::size_t size() const;
  std::span<const double> point(std::size_t i) const;
  double mass(std::size_t i) const;

  const GridDensity* density() const;
  const ParticleEnsemble* ensemble() const;

  template <typename Fn>
  double expectation(Fn&& fn) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
      const double m = mass(i);
      if (m != 0.0) acc += m * fn(point(i));
    }
    return acc;
  }

 private:
  std::variant<const GridDensity*, const ParticleEnsemble*> source_;
};

// Reference measure xi(dx) = exp(-U(x)) dx. When a grid is attached the
// potential is shifted by log Z so that the induced density integrates to one.
class ReferenceMeasure {
 public:
  using Potential = std::function<double(std::span<const double>)>;
  using Gradient = std::function<void(std::span<const double>, std::span<double>)>;
  using Sampler = std::function<void(std::mt19937_64&, std::span<double>)>;

  ReferenceMeasure(std::string name, std::size_t dim, Potential potential,
                   Gradient gradient, std::optional<Grid> grid,
                   Sampler sampler = {}, std::optional<double> analytic_m1 = {});

  // U(x) = |x|^2 / (2 s^2).
  static ReferenceMeasure gaussian(double scale,
                                   std::optional<Grid> grid = Grid::standard(),
                                   std::size_t dim = 1);
  // U(x) = |x| / b.
  static ReferenceMeasure laplace(double scale,
                                  std::optional<Grid> grid = Grid::standard(),
                                  std::size_t dim = 1);
  // U(x) = |x|^4 / (4 s^4).
  static ReferenceMeasure quartic(double scale,
                                  std::optional<Grid> grid = Grid::standard());

  const std::string& name() const { return name_; }
  std::size_t dim() const { return dim_; }
  bool has_grid() const { return grid_.has_value(); }
  const Grid& grid() const;
  const GridDensity& density() const;

  // Normalized potential U - log Z (unshifted when no grid is attached).
  double potential(std::span<const double> x) const;
  void grad_potential(std::span<const double> x, std::span<double> out) const;
  // Unnormalized potential as supplied.
  double raw_potential(std::span<const double> x) const { return potential_(x); }

  double log_z() const { return log_z_; }
  // E_xi |x|: trapezoidal on the grid, or the analytic value for presets.
  double first_moment() const;

  bool has_sampler() const { return static_cast<bool>(sampler_); }
  void sample(std::mt19937_64& rng, std::span<double> out) const;

 private:
  std::string name_;
  std::size_t dim_;
  Potential potential_;
  Gradient gradient_;
  std::optional<Grid> grid_;
  Sampler sampler_;
  std::optional<double> analytic_m1_;
  double log_z_ = 0.0;
  std::optional<GridDensity> density_;
  std::optional<double> m1_;
};

// Scales non-negative raw values into a probability density on the grid.
GridDensity normalize_density(std::span<const double> raw_values, const Grid& grid);

// Convex combination (1 - w) p + w q on the shared grid.
GridDensity mix(const GridDensity& p, const GridDensity& q, double w);

// Gaussian N(mean, scale^2) restricted to the grid and renormalized.
GridDensity gaussian_density(const Grid& grid, double mean, double scale);

// W1 as the integral of |CDF_p - CDF_q| over the shared grid.
double w1_grid(const GridDensity& p, const GridDensity& q);

// Exact W1 between one-dimensional empirical measures (quantile coupling).
double w1_particles_1d(const ParticleEnsemble& a, const ParticleEnsemble& b);

// W1 between a one-dimensional empirical measure and a grid density whose CDF
// is taken to be linear between nodes.
double w1_particles_grid(const ParticleEnsemble& a, const GridDensity& p);

// Sliced W1: average of one-dimensional W1 over random unit directions.
double sliced_w1(const ParticleEnsemble& a, const ParticleEnsemble& b,
                 std::size_t directions, std::uint64_t seed);

// Relative entropy KL(p | q) by trapezoidal quadrature. Throws
// SupportViolation when p puts mass where q vanishes.
double kl_grid(const GridDensity& p, const GridDensity& q);

// Total variation 0.5 * integral |p - q|.
double tv_grid(const GridDensity& p, const GridDensity& q);

double first_moment(const ReferenceMeasure& ref);

// Draws n i.i.d. points from the grid density by exact inversion of its
// piecewise quadratic CDF.
ParticleEnsemble sample_density(const GridDensity& density, std::size_t n,
                                std::uint64_t seed);

// d = 1 with a grid samples by inverse CDF; otherwise requires the
// reference's own sampler (DimUnsupported when absent).
ParticleEnsemble sample_reference(const ReferenceMeasure& ref, std::size_t n,
                                  std::uint64_t seed);

}  // namespace brflow

#endif  // BRFLOW_MEASURES_HPP_
