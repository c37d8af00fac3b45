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


#ifndef BRFLOW_OBJECTIVES_HPP_
#define BRFLOW_OBJECTIVES_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "brflow/features.hpp"
#include "brflow/measures.hpp"

namespace brflow {

// The flat derivative x -> dF/dnu(nu, x) at a frozen nu, together with its
// gradient in x. Implementations are immutable and thread-safe.
class Linearization {
 public:
  virtual ~Linearization() = default;
  virtual std::size_t dim() const = 0;
  virtual double delta(std::span<const double> theta) const = 0;
  virtual void grad_delta(std::span<const double> theta, std::span<double> out) const = 0;
};

struct RegularityConstants {
  double c_f = 0.0;  // sup |dF/dnu|
  double l_f = 0.0;  // Lipschitz constant of dF/dnu in (nu, x)
};

class FlatObjective {
 public:
  virtual ~FlatObjective() = default;
  virtual std::size_t dim() const = 0;
  virtual double value(const MeasureView& nu) const = 0;
  // The returned flat derivative is centered: its nu-integral vanishes.
  virtual std::unique_ptr<Linearization> linearize(const MeasureView& nu) const = 0;
  virtual RegularityConstants constants() const = 0;

  double delta(const MeasureView& nu, std::span<const double> theta) const;
  std::vector<double> grad_delta(const MeasureView& nu, std::span<const double> theta) const;
};

// delta(theta) = sum_k w_k f(theta, k) - offset.
class FeatureLinearization final : public Linearization {
 public:
  FeatureLinearization(FeatureMap features, std::vector<double> weights, double offset);

  // Sets the offset so that the result integrates to zero against nu.
  static std::unique_ptr<FeatureLinearization> centered(FeatureMap features,
                                                        std::vector<double> weights,
                                                        std::span<const double> mean_features);

  std::size_t dim() const override { return features_.dim(); }
  double delta(std::span<const double> theta) const override;
  void grad_delta(std::span<const double> theta, std::span<double> out) const override;

  std::span<const double> weights() const { return weights_; }

 private:
  FeatureMap features_;
  std::vector<double> weights_;
  double offset_;
};

// Constants of the entropy-regularized softmax objective for a cost bounded by
// cost_sup, discount factor `discount` (0 for bandits), features bounded by
// f0 with gradient bounded by f1, and reference total mass eta(A).
RegularityConstants regularity_constants(double cost_sup, double tau, double f0, double f1,
                                         double log_eta_total, double discount = 0.0);

// pi(a) proportional to exp(logit(a)) eta(a). Also returns log(pi(a) / eta(a))
// when log_ratio is non-null.
std::vector<double> softmax(std::span<const double> logits, std::span<const double> eta,
                            std::vector<double>* log_ratio = nullptr);

struct BanditSpec {
  std::vector<double> cost;
  std::vector<double> eta;
  double tau = 0.0;
  FeatureMap features;
  std::optional<double> c_f_override;
  std::optional<double> l_f_override;

  std::size_t actions() const { return cost.size(); }
  // Throws Validation naming the offending field.
  void validate() const;
};

std::vector<double> softmax_policy(const BanditSpec& spec, const MeasureView& nu);
// sum_a (c(a) + tau log(pi(a) / eta(a))) pi(a).
double bandit_value(const BanditSpec& spec, const MeasureView& nu);
double bandit_delta(const BanditSpec& spec, const MeasureView& nu,
                    std::span<const double> theta);
std::vector<double> bandit_grad_delta(const BanditSpec& spec, const MeasureView& nu,
                                      std::span<const double> theta);
RegularityConstants declared_constants(const BanditSpec& spec);

class BanditObjective final : public FlatObjective {
 public:
  explicit BanditObjective(BanditSpec spec);

  const BanditSpec& spec() const { return spec_; }
  std::size_t dim() const override { return spec_.features.dim(); }
  double value(const MeasureView& nu) const override;
  std::unique_ptr<Linearization> linearize(const MeasureView& nu) const override;
  RegularityConstants constants() const override { return declared_constants(spec_); }

 private:
  BanditSpec spec_;
};

// F(nu) = integral of V against nu, so dF/dnu = V - integral V dnu.
class LinearObjective final : public FlatObjective {
 public:
  using Fn = std::function<double(std::span<const double>)>;
  using GradFn = std::function<void(std::span<const double>, std::span<double>)>;

  LinearObjective(std::size_t dim, Fn v, GradFn grad_v, double bound, double lipschitz);

  std::size_t dim() const override { return dim_; }
  double value(const MeasureView& nu) const override;
  std::unique_ptr<Linearization> linearize(const MeasureView& nu) const override;
  RegularityConstants constants() const override { return {2.0 * bound_, lipschitz_}; }

 private:
  std::size_t dim_;
  Fn v_;
  GradFn grad_v_;
  double bound_;
  double lipschitz_;
};

std::unique_ptr<LinearObjective> linear_objective(std::size_t dim, LinearObjective::Fn v,
                                                  LinearObjective::GradFn grad_v, double bound,
                                                  double lipschitz);

// F = 0.
std::unique_ptr<LinearObjective> zero_objective(std::size_t dim = 1);

}  // namespace brflow

#endif  // BRFLOW_OBJECTIVES_HPP_
