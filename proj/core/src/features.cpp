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


#include "brflow/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "brflow/error.hpp"
#include "brflow/random.hpp"

namespace brflow {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  fail(ErrorCode::kValidation, "activation: expected \"tanh\" or \"sigmoid\", got \"" +
                                   std::string(name) + "\"");
}

std::string_view to_string(Activation act) {
  return act == Activation::kTanh ? "tanh" : "sigmoid";
}

double activate(Activation act, double z) {
  if (act == Activation::kTanh) return std::tanh(z);
  return 1.0 / (1.0 + std::exp(-z));
}

double activate_derivative(Activation act, double z) {
  if (act == Activation::kTanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  const double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 - s);
}

FeatureMap::FeatureMap(Activation act, std::size_t dim, std::vector<double> embeddings)
    : act_(act), dim_(dim), embeddings_(std::move(embeddings)) {
  if (dim_ == 0) fail(ErrorCode::kValidation, "features.dim must be >= 1");
  if (embeddings_.empty() || embeddings_.size() % dim_ != 0) {
    fail(ErrorCode::kValidation, "features.phi: expected entries x " + std::to_string(dim_) +
                                     " values, got " + std::to_string(embeddings_.size()));
  }
  for (std::size_t i = 0; i < embeddings_.size(); ++i) {
    if (!std::isfinite(embeddings_[i])) {
      fail(ErrorCode::kValidation, "features.phi[" + std::to_string(i / dim_) + "] is not finite");
    }
  }
}

FeatureMap FeatureMap::random(Activation act, std::size_t dim, std::size_t entries,
                              double scale, std::uint64_t seed) {
  auto rng = make_stream(seed, StreamTag::kSpecGeneration, 1);
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> phi(dim * entries);
  for (double& v : phi) v = normal(rng);
  return FeatureMap(act, dim, std::move(phi));
}

double FeatureMap::value(std::span<const double> theta, std::size_t k) const {
  return activate(act_, dot(theta, embedding(k)));
}

void FeatureMap::accumulate_gradient(std::span<const double> theta, std::size_t k, double weight,
                                     std::span<double> out) const {
  const auto phi = embedding(k);
  const double g = weight * activate_derivative(act_, dot(theta, phi));
  for (std::size_t i = 0; i < dim_; ++i) out[i] += g * phi[i];
}

double FeatureMap::sup_f1() const {
  double best = 0.0;
  for (std::size_t k = 0; k < entries(); ++k) best = std::max(best, std::sqrt(dot(embedding(k), embedding(k))));
  return act_ == Activation::kTanh ? best : 0.25 * best;
}

std::vector<double> FeatureMap::mean_features(const MeasureView& nu) const {
  if (nu.dim() != dim_) {
    fail(ErrorCode::kDimUnsupported, "feature dim " + std::to_string(dim_) +
                                         " does not match measure dim " + std::to_string(nu.dim()));
  }
  std::vector<double> out(entries(), 0.0);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const double m = nu.mass(i);
    if (m == 0.0) continue;
    const auto theta = nu.point(i);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += m * value(theta, k);
  }
  return out;
}

}  // namespace brflow
