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


#include "brflow/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "brflow/error.hpp"

namespace brflow {
namespace {

// Policy, log(pi/eta) and Q-bar for the bandit at a given nu.
struct BanditState {
  std::vector<double> mean_f;
  std::vector<double> pi;
  std::vector<double> q_bar;
};

BanditState bandit_state(const BanditSpec& spec, const MeasureView& nu) {
  BanditState st;
  st.mean_f = spec.features.mean_features(nu);
  std::vector<double> log_ratio;
  st.pi = softmax(st.mean_f, spec.eta, &log_ratio);
  st.q_bar.resize(st.pi.size());
  for (std::size_t a = 0; a < st.pi.size(); ++a) st.q_bar[a] = spec.cost[a] + spec.tau * log_ratio[a];
  return st;
}

// W(a) = pi(a) (Qbar(a) - sum_b Qbar(b) pi(b)).
std::vector<double> bandit_weights(const BanditState& st) {
  double avg = 0.0;
  for (std::size_t a = 0; a < st.pi.size(); ++a) avg += st.q_bar[a] * st.pi[a];
  std::vector<double> w(st.pi.size());
  for (std::size_t a = 0; a < w.size(); ++a) w[a] = st.pi[a] * (st.q_bar[a] - avg);
  return w;
}

class LinearLinearization final : public Linearization {
 public:
  LinearLinearization(std::size_t dim, const LinearObjective::Fn* v,
                      const LinearObjective::GradFn* grad_v, double mean)
      : dim_(dim), v_(v), grad_v_(grad_v), mean_(mean) {}

  std::size_t dim() const override { return dim_; }
  double delta(std::span<const double> theta) const override { return (*v_)(theta) - mean_; }
  void grad_delta(std::span<const double> theta, std::span<double> out) const override {
    (*grad_v_)(theta, out);
  }

 private:
  std::size_t dim_;
  const LinearObjective::Fn* v_;
  const LinearObjective::GradFn* grad_v_;
  double mean_;
};

}  // namespace

double FlatObjective::delta(const MeasureView& nu, std::span<const double> theta) const {
  return linearize(nu)->delta(theta);
}

std::vector<double> FlatObjective::grad_delta(const MeasureView& nu,
                                              std::span<const double> theta) const {
  std::vector<double> out(dim(), 0.0);
  linearize(nu)->grad_delta(theta, out);
  return out;
}

FeatureLinearization::FeatureLinearization(FeatureMap features, std::vector<double> weights,
                                           double offset)
    : features_(std::move(features)), weights_(std::move(weights)), offset_(offset) {
  if (weights_.size() != features_.entries()) {
    fail(ErrorCode::kInvalidSpec, "FeatureLinearization: one weight per feature entry required");
  }
}

std::unique_ptr<FeatureLinearization> FeatureLinearization::centered(
    FeatureMap features, std::vector<double> weights, std::span<const double> mean_features) {
  double offset = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) offset += weights[k] * mean_features[k];
  return std::make_unique<FeatureLinearization>(std::move(features), std::move(weights), offset);
}

double FeatureLinearization::delta(std::span<const double> theta) const {
  double acc = -offset_;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k] != 0.0) acc += weights_[k] * features_.value(theta, k);
  }
  return acc;
}

void FeatureLinearization::grad_delta(std::span<const double> theta, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    if (weights_[k] != 0.0) features_.accumulate_gradient(theta, k, weights_[k], out);
  }
}

RegularityConstants regularity_constants(double cost_sup, double tau, double f0, double f1,
                                         double log_eta_total, double discount) {
  const double a = std::abs(cost_sup) + std::abs(tau) * (2.0 * f0 + std::abs(log_eta_total));
  const double k = 1.0 / ((1.0 - discount) * (1.0 - discount));
  RegularityConstants out;
  out.c_f = 2.0 * k * a * f0;
  out.l_f = f1 * (k * a * std::max(2.0, 5.0 / (1.0 - discount) * f0) + 4.0 * std::abs(tau) * f0);
  return out;
}

std::vector<double> softmax(std::span<const double> logits, std::span<const double> eta,
                            std::vector<double>* log_ratio) {
  const std::size_t n = logits.size();
  std::vector<double> z(n);
  for (std::size_t a = 0; a < n; ++a) z[a] = logits[a] + std::log(eta[a]);
  const double zmax = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a) sum += std::exp(z[a] - zmax);
  const double lse = zmax + std::log(sum);
  std::vector<double> pi(n);
  for (std::size_t a = 0; a < n; ++a) pi[a] = std::exp(z[a] - lse);
  if (log_ratio) {
    log_ratio->resize(n);
    for (std::size_t a = 0; a < n; ++a) (*log_ratio)[a] = logits[a] - lse;
  }
  return pi;
}

void BanditSpec::validate() const {
  if (cost.empty()) fail(ErrorCode::kValidation, "cost: at least one action required");
  if (eta.size() != cost.size()) {
    fail(ErrorCode::kValidation, "eta: expected " + std::to_string(cost.size()) + " entries, got " +
                                     std::to_string(eta.size()));
  }
  for (std::size_t a = 0; a < cost.size(); ++a) {
    if (!std::isfinite(cost[a])) fail(ErrorCode::kValidation, "cost[" + std::to_string(a) + "] is not finite");
    if (!(eta[a] > 0.0) || !std::isfinite(eta[a])) {
      fail(ErrorCode::kValidation, "eta[" + std::to_string(a) + "] must be positive and finite");
    }
  }
  if (!(tau >= 0.0) || !std::isfinite(tau)) fail(ErrorCode::kValidation, "tau must be >= 0");
  if (features.entries() != cost.size()) {
    fail(ErrorCode::kValidation, "features.phi: expected " + std::to_string(cost.size()) +
                                     " embeddings, got " + std::to_string(features.entries()));
  }
  if (c_f_override && !(*c_f_override >= 0.0)) fail(ErrorCode::kValidation, "constants.C_F must be >= 0");
  if (l_f_override && !(*l_f_override >= 0.0)) fail(ErrorCode::kValidation, "constants.L_F must be >= 0");
}

std::vector<double> softmax_policy(const BanditSpec& spec, const MeasureView& nu) {
  return softmax(spec.features.mean_features(nu), spec.eta);
}

double bandit_value(const BanditSpec& spec, const MeasureView& nu) {
  const BanditState st = bandit_state(spec, nu);
  double v = 0.0;
  for (std::size_t a = 0; a < st.pi.size(); ++a) v += st.q_bar[a] * st.pi[a];
  return v;
}

double bandit_delta(const BanditSpec& spec, const MeasureView& nu, std::span<const double> theta) {
  return BanditObjective(spec).delta(nu, theta);
}

std::vector<double> bandit_grad_delta(const BanditSpec& spec, const MeasureView& nu,
                                      std::span<const double> theta) {
  return BanditObjective(spec).grad_delta(nu, theta);
}

RegularityConstants declared_constants(const BanditSpec& spec) {
  double cost_sup = 0.0;
  for (double c : spec.cost) cost_sup = std::max(cost_sup, std::abs(c));
  const double eta_total = std::accumulate(spec.eta.begin(), spec.eta.end(), 0.0);
  RegularityConstants k = regularity_constants(cost_sup, spec.tau, spec.features.sup_f0(),
                                               spec.features.sup_f1(), std::log(eta_total));
  if (spec.c_f_override) k.c_f = *spec.c_f_override;
  if (spec.l_f_override) k.l_f = *spec.l_f_override;
  return k;
}

BanditObjective::BanditObjective(BanditSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

double BanditObjective::value(const MeasureView& nu) const { return bandit_value(spec_, nu); }

std::unique_ptr<Linearization> BanditObjective::linearize(const MeasureView& nu) const {
  const BanditState st = bandit_state(spec_, nu);
  return FeatureLinearization::centered(spec_.features, bandit_weights(st), st.mean_f);
}

LinearObjective::LinearObjective(std::size_t dim, Fn v, GradFn grad_v, double bound,
                                 double lipschitz)
    : dim_(dim), v_(std::move(v)), grad_v_(std::move(grad_v)), bound_(bound), lipschitz_(lipschitz) {
  if (!v_ || !grad_v_) fail(ErrorCode::kInvalidSpec, "linear objective needs V and its gradient");
}

double LinearObjective::value(const MeasureView& nu) const {
  return nu.expectation([this](std::span<const double> x) { return v_(x); });
}

std::unique_ptr<Linearization> LinearObjective::linearize(const MeasureView& nu) const {
  return std::make_unique<LinearLinearization>(dim_, &v_, &grad_v_, value(nu));
}

std::unique_ptr<LinearObjective> linear_objective(std::size_t dim, LinearObjective::Fn v,
                                                  LinearObjective::GradFn grad_v, double bound,
                                                  double lipschitz) {
  return std::make_unique<LinearObjective>(dim, std::move(v), std::move(grad_v), bound, lipschitz);
}

std::unique_ptr<LinearObjective> zero_objective(std::size_t dim) {
  return linear_objective(
      dim, [](std::span<const double>) { return 0.0; },
      [](std::span<const double>, std::span<double> out) { std::fill(out.begin(), out.end(), 0.0); },
      0.0, 0.0);
}

}  // namespace brflow
