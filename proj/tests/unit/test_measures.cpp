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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "brflow/error.hpp"
#include "brflow/measures.hpp"
#include "test_support.hpp"

namespace brflow {
namespace {

using testing::random_density;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected brflow::Error";
  return ErrorCode::kIo;
}

TEST(Grid, NodesAreUniform) {
  Grid g(-1.0, 3.0, 5);
  EXPECT_DOUBLE_EQ(g.dx(), 1.0);
  EXPECT_DOUBLE_EQ(g.node(0), -1.0);
  EXPECT_DOUBLE_EQ(g.node(4), 3.0);
  EXPECT_EQ(code_of([] { Grid(0.0, 1.0, 1); }), ErrorCode::kInvalidSpec);
  EXPECT_EQ(code_of([] { Grid(1.0, 1.0, 3); }), ErrorCode::kInvalidSpec);
}

TEST(NormalizeDensity, ConstantIsUniform) {
  Grid g(0.0, 1.0, 11);
  auto p = normalize_density(std::vector<double>(11, 3.0), g);
  for (double v : p.values()) EXPECT_NEAR(v, 1.0, 1e-15);
  EXPECT_NEAR(p.mass(), 1.0, 1e-12);
}

TEST(NormalizeDensity, GaussianMatchesClosedForm) {
  Grid g(-8.0, 8.0, 1601);
  std::vector<double> raw(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) raw[i] = std::exp(-0.5 * g.node(i) * g.node(i));
  auto p = normalize_density(raw, g);
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(p[i], c * raw[i], 1e-6);
}

TEST(NormalizeDensity, SpikeHasUnitMass) {
  Grid g(0.0, 1.0, 11);
  std::vector<double> raw(11, 0.0);
  raw[4] = 2.0;
  auto p = normalize_density(raw, g);
  EXPECT_NEAR(p.mass(), 1.0, 1e-12);
  EXPECT_NEAR(p[4], 1.0 / g.dx(), 1e-9);
}

TEST(NormalizeDensity, RejectsBadInput) {
  Grid g(0.0, 1.0, 3);
  EXPECT_EQ(code_of([&] { normalize_density(std::vector<double>{0, 0, 0}, g); }),
            ErrorCode::kAllZero);
  EXPECT_EQ(code_of([&] { normalize_density(std::vector<double>{1, -1, 1}, g); }),
            ErrorCode::kNegativeValue);
  EXPECT_EQ(code_of([&] { GridDensity(g, {1.0, 1.0, 5.0}); }), ErrorCode::kInvalidSpec);
}

TEST(W1Grid, IdentityIsZero) {
  std::mt19937_64 rng(1);
  auto p = random_density(Grid::standard(), rng);
  EXPECT_EQ(w1_grid(p, p), 0.0);
}

GridDensity indicator(const Grid& g, double lo, double hi) {
  std::vector<double> raw(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    raw[i] = (g.node(i) >= lo - 1e-12 && g.node(i) <= hi + 1e-12) ? 1.0 : 0.0;
  }
  return normalize_density(raw, g);
}

TEST(W1Grid, DisjointUniforms) {
  Grid g(-1.0, 3.0, 4001);
  auto p = indicator(g, 0.0, 1.0);
  auto q = indicator(g, 1.0, 2.0);
  EXPECT_NEAR(w1_grid(p, q), 1.0, g.dx());
  EXPECT_NEAR(w1_grid(q, p), w1_grid(p, q), 1e-15);
}

TEST(W1Grid, TranslationByShift) {
  Grid g = Grid::standard();
  for (double s : {0.5, 1.0, 2.5}) {
    auto p = gaussian_density(g, 0.0, 1.0);
    auto q = gaussian_density(g, s, 1.0);
    EXPECT_NEAR(w1_grid(p, q), s, g.dx());
  }
}

TEST(W1Grid, RejectsGridMismatch) {
  auto p = gaussian_density(Grid(-5, 5, 101), 0, 1);
  auto q = gaussian_density(Grid(-5, 5, 201), 0, 1);
  EXPECT_EQ(code_of([&] { w1_grid(p, q); }), ErrorCode::kGridMismatch);
}

TEST(W1Grid, TriangleInequalityOnRandomTriples) {
  std::mt19937_64 rng(7);
  const Grid g = Grid::standard();
  for (int t = 0; t < 50; ++t) {
    auto a = random_density(g, rng);
    auto b = random_density(g, rng);
    auto c = random_density(g, rng);
    EXPECT_LE(w1_grid(a, c), w1_grid(a, b) + w1_grid(b, c) + 1e-10);
    EXPECT_GE(w1_grid(a, b), 0.0);
  }
}

ParticleEnsemble points(std::vector<double> xs) { return ParticleEnsemble(1, std::move(xs)); }

TEST(W1Particles, HandExamples) {
  EXPECT_EQ(w1_particles_1d(points({0}), points({0})), 0.0);
  EXPECT_DOUBLE_EQ(w1_particles_1d(points({0}), points({1})), 1.0);
  EXPECT_DOUBLE_EQ(w1_particles_1d(points({0, 1}), points({0, 3})), 1.0);
  EXPECT_DOUBLE_EQ(w1_particles_1d(points({1, 0}), points({3, 0})), 1.0);
}

TEST(W1Particles, UnequalSizesUseQuantileCoupling) {
  // {0} vs {0, 2}: half the mass moves by 2.
  EXPECT_DOUBLE_EQ(w1_particles_1d(points({0}), points({0, 2})), 1.0);
  // {0, 1, 2} vs {0, 3}: quantile functions differ by 0, 1|2 on [1/3,1/2),
  // 1 on [1/2, 2/3) and 1 on [2/3, 1).
  const double want = (1.0 / 6.0) * 1.0 + (1.0 / 6.0) * 2.0 + (1.0 / 3.0) * 1.0;
  EXPECT_NEAR(w1_particles_1d(points({0, 1, 2}), points({0, 3})), want, 1e-15);
}

TEST(W1Particles, RejectsMultiDimensional) {
  ParticleEnsemble a(2, {0, 0});
  EXPECT_EQ(code_of([&] { w1_particles_1d(a, a); }), ErrorCode::kDimUnsupported);
}

TEST(W1Particles, MatchesGridW1ForInverseCdfSamples) {
  std::mt19937_64 rng(11);
  const Grid g = Grid::standard();
  for (int t = 0; t < 10; ++t) {
    auto p = random_density(g, rng);
    auto q = random_density(g, rng);
    const std::uint64_t seed = rng();
    auto a = sample_density(p, 10000, seed);
    auto b = sample_density(q, 10000, seed);
    EXPECT_NEAR(w1_particles_1d(a, b), w1_grid(p, q), 2.0 * g.dx());
  }
}

TEST(W1Particles, AgainstGridDensity) {
  const Grid g = Grid::standard();
  auto p = gaussian_density(g, 0.0, 1.0);
  auto a = sample_density(p, 20000, 3);
  EXPECT_LT(w1_particles_grid(a, p), 0.03);
  // A single Dirac at the origin against N(0, 1) sits at E|x| = sqrt(2/pi).
  EXPECT_NEAR(w1_particles_grid(points({0.0}), p), std::sqrt(2.0 / std::numbers::pi), 1e-4);
}

TEST(SlicedW1, ReducesToExactInOneDimension) {
  auto a = points({0.0, 1.0});
  auto b = points({0.0, 3.0});
  EXPECT_NEAR(sliced_w1(a, b, 16, 1), 1.0, 1e-15);
}

TEST(SlicedW1, TranslationInTwoDimensions) {
  // Shift by (1, 0): the projection onto direction (cos t, sin t) shifts by
  // |cos t|, whose average over the circle is 2/pi.
  std::vector<double> xa, xb;
  for (int i = 0; i < 50; ++i) {
    xa.insert(xa.end(), {0.1 * i, -0.05 * i});
    xb.insert(xb.end(), {0.1 * i + 1.0, -0.05 * i});
  }
  const double got = sliced_w1(ParticleEnsemble(2, xa), ParticleEnsemble(2, xb), 4000, 9);
  EXPECT_NEAR(got, 2.0 / std::numbers::pi, 0.02);
}

TEST(Kl, IdentityAndGaussians) {
  const Grid g = Grid::standard();
  auto p = gaussian_density(g, 0.0, 1.0);
  auto q = gaussian_density(g, 1.0, 1.0);
  EXPECT_EQ(kl_grid(p, p), 0.0);
  EXPECT_NEAR(kl_grid(p, q), 0.5, 1e-3);
}

TEST(Kl, SupportViolation) {
  Grid g(0.0, 2.0, 21);
  auto p = indicator(g, 0.0, 2.0);
  auto q = indicator(g, 0.0, 1.0);
  EXPECT_EQ(code_of([&] { kl_grid(p, q); }), ErrorCode::kSupportViolation);
  EXPECT_NO_THROW(kl_grid(q, p));
}

TEST(Kl, PinskerOnRandomPairs) {
  std::mt19937_64 rng(5);
  const Grid g = Grid::standard();
  for (int t = 0; t < 50; ++t) {
    auto p = random_density(g, rng);
    auto q = random_density(g, rng);
    const double tv = tv_grid(p, q);
    EXPECT_LE(tv * tv, 0.5 * kl_grid(p, q) + 1e-14);
  }
}

TEST(FirstMoment, GaussianReference) {
  auto ref = ReferenceMeasure::gaussian(1.0, Grid(-8.0, 8.0, 1601));
  EXPECT_NEAR(first_moment(ref), std::sqrt(2.0 / std::numbers::pi), 1e-3);
  EXPECT_NEAR(ref.density().mass(), 1.0, 1e-12);
}

TEST(FirstMoment, LaplaceReference) {
  auto ref = ReferenceMeasure::laplace(1.0);
  EXPECT_NEAR(first_moment(ref), 1.0, 1e-2);
}

TEST(FirstMoment, ConcentratedReference) {
  // U = 500 x^2 is a Gaussian with scale 1/sqrt(1000); m1 = sqrt(2/pi)/31.6.
  auto ref = ReferenceMeasure::gaussian(1.0 / std::sqrt(1000.0), Grid(-1.0, 1.0, 2001));
  EXPECT_LT(first_moment(ref), 0.03);
}

TEST(FirstMoment, AnalyticWithoutGrid) {
  auto ref = ReferenceMeasure::gaussian(2.0, std::nullopt, 1);
  EXPECT_NEAR(first_moment(ref), 2.0 * std::sqrt(2.0 / std::numbers::pi), 1e-15);
}

TEST(ReferenceMeasure, GrowthCheckRejectsFlatPotential) {
  auto flat = [](std::span<const double>) { return 0.0; };
  auto zero_grad = [](std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  EXPECT_EQ(code_of([&] {
              ReferenceMeasure("flat", 1, flat, zero_grad, Grid(-1.0, 1.0, 11));
            }),
            ErrorCode::kInvalidSpec);
}

TEST(ReferenceMeasure, PotentialIsNormalized) {
  auto ref = ReferenceMeasure::quartic(1.0);
  const Grid& g = ref.grid();
  std::vector<double> vals(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double x = g.node(i);
    vals[i] = std::exp(-ref.potential(std::span<const double>(&x, 1)));
  }
  EXPECT_NEAR(g.integrate(vals), 1.0, 1e-12);
}

TEST(SampleReference, SinglePointInsideGrid) {
  auto ref = ReferenceMeasure::gaussian(1.0);
  auto e = sample_reference(ref, 1, 123);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_GE(e.point(0)[0], -10.0);
  EXPECT_LE(e.point(0)[0], 10.0);
}

TEST(SampleReference, MeanOfLargeSample) {
  auto ref = ReferenceMeasure::gaussian(1.0);
  auto e = sample_reference(ref, 100000, 99);
  EXPECT_NEAR(e.mean()[0], 0.0, 0.02);
  EXPECT_NEAR(e.variance()[0], 1.0, 0.02);
}

TEST(SampleReference, KolmogorovSmirnovAgainstGaussian) {
  auto ref = ReferenceMeasure::gaussian(1.0);
  const std::size_t n = 10000;
  auto e = sample_reference(ref, n, 2026);
  std::vector<double> xs(e.positions().begin(), e.positions().end());
  std::sort(xs.begin(), xs.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-xs[i] / std::numbers::sqrt2);
    ks = std::max({ks, std::abs(cdf - double(i) / n), std::abs(cdf - double(i + 1) / n)});
  }
  EXPECT_LT(ks, 2.0 / std::sqrt(double(n)));
}

TEST(SampleReference, SeedDeterminism) {
  auto ref = ReferenceMeasure::laplace(1.0);
  auto a = sample_reference(ref, 1000, 42);
  auto b = sample_reference(ref, 1000, 42);
  auto c = sample_reference(ref, 1000, 43);
  EXPECT_TRUE(std::equal(a.positions().begin(), a.positions().end(), b.positions().begin()));
  EXPECT_FALSE(std::equal(a.positions().begin(), a.positions().end(), c.positions().begin()));
}

TEST(SampleReference, MultiDimensionalNeedsSampler) {
  auto ref = ReferenceMeasure::gaussian(1.0, std::nullopt, 2);
  auto e = sample_reference(ref, 5000, 1);
  EXPECT_EQ(e.dim(), 2u);
  EXPECT_NEAR(e.variance()[1], 1.0, 0.1);

  auto quad = [](std::span<const double> x) { return 0.5 * (x[0] * x[0] + x[1] * x[1]); };
  auto grad = [](std::span<const double> x, std::span<double> out) {
    out[0] = x[0];
    out[1] = x[1];
  };
  ReferenceMeasure custom("custom", 2, quad, grad, std::nullopt);
  EXPECT_EQ(code_of([&] { sample_reference(custom, 10, 1); }), ErrorCode::kDimUnsupported);
}

TEST(SampleDensity, ExactInversionOfPiecewiseLinearDensity) {
  // Density 2x on [0, 1]: CDF x^2, so the median is 1/sqrt(2).
  Grid g(0.0, 1.0, 2);
  GridDensity p(g, {0.0, 2.0});
  auto e = sample_density(p, 40001, 8);
  std::vector<double> xs(e.positions().begin(), e.positions().end());
  std::nth_element(xs.begin(), xs.begin() + 20000, xs.end());
  EXPECT_NEAR(xs[20000], 1.0 / std::numbers::sqrt2, 0.01);
  EXPECT_NEAR(e.mean()[0], 2.0 / 3.0, 0.005);
}

TEST(Mix, IsConvexCombination) {
  const Grid g = Grid::standard();
  auto p = gaussian_density(g, -1.0, 1.0);
  auto q = gaussian_density(g, 2.0, 0.5);
  auto m = mix(p, q, 0.25);
  EXPECT_NEAR(m.mass(), 1.0, 1e-12);
  for (std::size_t i = 0; i < g.size(); i += 97) EXPECT_NEAR(m[i], 0.75 * p[i] + 0.25 * q[i], 1e-15);
  // W1 is linear along segments in one dimension.
  EXPECT_NEAR(w1_grid(m, p), 0.25 * w1_grid(p, q), 1e-12);
}

TEST(MeasureView, GridAndParticleExpectations) {
  const Grid g = Grid::standard();
  auto p = gaussian_density(g, 1.5, 1.0);
  MeasureView vp(p);
  EXPECT_NEAR(vp.expectation([](auto x) { return x[0]; }), 1.5, 1e-9);
  auto e = points({1.0, 2.0, 6.0});
  MeasureView ve(e);
  EXPECT_NEAR(ve.expectation([](auto x) { return x[0]; }), 3.0, 1e-15);
  EXPECT_EQ(ve.size(), 3u);
}

}  // namespace
}  // namespace brflow
