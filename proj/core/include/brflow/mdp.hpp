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


#ifndef BRFLOW_MDP_HPP_
#define BRFLOW_MDP_HPP_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "brflow/features.hpp"
#include "brflow/measures.hpp"
#include "brflow/objectives.hpp"

namespace brflow {

// Finite entropy-regularized MDP with mean-field softmax policies
// pi_nu(a|s) proportional to exp(integral f(theta, s, a) nu(dtheta)) eta(a).
struct MDPSpec {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> transition;  // P(s'|s,a) at (s * nA + a) * nS + s'
  std::vector<double> cost;        // c(s,a) at s * nA + a
  double discount = 0.0;
  double tau = 0.0;
  std::vector<double> eta;
  std::vector<double> gamma;
  FeatureMap features;             // nS * nA entries, index s * nA + a
  std::size_t dense_threshold = 2000;
  std::optional<double> c_f_override;
  std::optional<double> l_f_override;

  // Throws Validation naming the offending field and index.
  void validate() const;
};

struct PolicyTable {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<double> pi;         // s * nA + a
  std::vector<double> log_ratio;  // log(pi(a|s) / eta(a))

  double operator()(std::size_t s, std::size_t a) const { return pi[s * n_actions + a]; }
};

// Validates a user-supplied row-stochastic, strictly positive table.
PolicyTable make_policy_table(const MDPSpec& mdp, std::vector<double> pi);

PolicyTable policy_from_params(const MDPSpec& mdp, const MeasureView& nu);

struct Occupancy {
  std::vector<double> kernel;   // (1 - delta)(I - delta P_pi)^{-1}, nS x nS
  std::vector<double> d_gamma;  // gamma^T kernel
};

Occupancy occupancy(const MDPSpec& mdp, const PolicyTable& pi);

struct ValueQ {
  std::vector<double> v;  // nS
  std::vector<double> q;  // nS x nA, Q = c + delta P V
};

ValueQ value_q(const MDPSpec& mdp, const PolicyTable& pi);

// V(gamma) through the Bellman linear system.
double policy_value(const MDPSpec& mdp, const PolicyTable& pi);
// V(gamma) = (1 / (1 - delta)) sum_s d_gamma(s) sum_a (c + tau log(pi/eta)) pi.
double occupancy_route_value(const MDPSpec& mdp, const PolicyTable& pi);

// max_s |V(s) - sum_a pi(a|s) (Q(s,a) + tau log(pi/eta))|.
double bellman_residual(const MDPSpec& mdp, const PolicyTable& pi, const ValueQ& vq);
// max_s |(1 - delta) gamma + delta d_gamma P_pi - d_gamma|.
double occupancy_identity_residual(const MDPSpec& mdp, const PolicyTable& pi,
                                   const Occupancy& occ);

double mdp_value(const MDPSpec& mdp, const MeasureView& nu);
double mdp_flat_derivative(const MDPSpec& mdp, const MeasureView& nu,
                           std::span<const double> theta);
std::vector<double> mdp_grad_flat_derivative(const MDPSpec& mdp, const MeasureView& nu,
                                             std::span<const double> theta);
RegularityConstants mdp_constants(const MDPSpec& mdp);

// max_s TV(pi(.|s), softmax(-Q^pi(s,.) / tau; eta)). Requires tau > 0.
double optimal_policy_residual(const MDPSpec& mdp, const PolicyTable& pi);

struct SoftValueIteration {
  PolicyTable policy;
  std::vector<double> v;
  std::size_t iterations = 0;
};

// V(s) <- -tau log sum_a eta(a) exp(-(c(s,a) + delta (P V)(s,a)) / tau) until
// the sup-norm change falls below tol. Requires tau > 0.
SoftValueIteration soft_value_iteration(const MDPSpec& mdp, double tol = 1e-14,
                                        std::size_t max_iter = 100000);

class MdpObjective final : public FlatObjective {
 public:
  explicit MdpObjective(MDPSpec spec);

  const MDPSpec& spec() const { return spec_; }
  std::size_t dim() const override { return spec_.features.dim(); }
  double value(const MeasureView& nu) const override;
  std::unique_ptr<Linearization> linearize(const MeasureView& nu) const override;
  RegularityConstants constants() const override { return mdp_constants(spec_); }

 private:
  MDPSpec spec_;
};

struct RandomMdpOptions {
  double discount = 0.5;
  double tau = 0.1;
  std::size_t dim = 1;
  Activation activation = Activation::kTanh;
  double embedding_scale = 1.0;
};

// Dirichlet(1) transitions, uniform costs in [0, 1], uniform eta and gamma.
MDPSpec make_random_mdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                        const RandomMdpOptions& opts = {});

}  // namespace brflow

#endif  // BRFLOW_MDP_HPP_
