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


#ifndef BRFLOW_FEATURES_HPP_
#define BRFLOW_FEATURES_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "brflow/measures.hpp"

namespace brflow {

enum class Activation { kTanh, kSigmoid };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation act);

double activate(Activation act, double z);
double activate_derivative(Activation act, double z);

// f(theta, k) = activation(theta . phi[k]) over a finite index set (actions,
// or state-action pairs flattened as s * nA + a).
class FeatureMap {
 public:
  // embeddings: entries x dim, row-major.
  FeatureMap(Activation act, std::size_t dim, std::vector<double> embeddings);

  // Embeddings with i.i.d. N(0, scale^2) coordinates.
  static FeatureMap random(Activation act, std::size_t dim, std::size_t entries,
                           double scale, std::uint64_t seed);

  Activation activation() const { return act_; }
  std::size_t dim() const { return dim_; }
  std::size_t entries() const { return embeddings_.size() / dim_; }
  std::span<const double> embedding(std::size_t k) const {
    return {embeddings_.data() + k * dim_, dim_};
  }
  std::span<const double> embeddings() const { return embeddings_; }

  double value(std::span<const double> theta, std::size_t k) const;
  // out += weight * grad_theta f(theta, k).
  void accumulate_gradient(std::span<const double> theta, std::size_t k, double weight,
                           std::span<double> out) const;

  // sup |f| and sup |grad f|.
  double sup_f0() const { return 1.0; }
  double sup_f1() const;

  // Integrals of f(., k) against nu, one per entry.
  std::vector<double> mean_features(const MeasureView& nu) const;

 private:
  Activation act_;
  std::size_t dim_;
  std::vector<double> embeddings_;
};

}  // namespace brflow

#endif  // BRFLOW_FEATURES_HPP_
