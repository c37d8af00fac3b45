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


// Entropy-regularized tabular MDP kernels shared by the single-agent and
// Markov-game objectives. The regularization weight is signed so that the
// maximizing player's induced MDP (entropy entering with a minus sign) uses
// the same code.

#ifndef BRFLOW_SRC_TABULAR_HPP_
#define BRFLOW_SRC_TABULAR_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace brflow::detail {

struct SoftMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::span<const double> transition;  // (s * nA + a) * nS + s'
  std::span<const double> cost;        // s * nA + a
  double discount = 0.0;
  double tau = 0.0;                    // signed
  std::span<const double> gamma;
  std::size_t dense_threshold = 2000;
};

// P_pi(s, s') = sum_a pi(a|s) P(s'|s, a), row-major nS x nS.
std::vector<double> policy_kernel(const SoftMdp& m, std::span<const double> pi);

// Solves (I - discount * K) x = rhs, or its transpose. Dense LU up to the
// threshold, fixed-point iteration above it.
std::vector<double> solve_discounted(std::span<const double> kernel, std::size_t n,
                                     double discount, std::span<const double> rhs,
                                     bool transpose, std::size_t dense_threshold);

struct Evaluation {
  std::vector<double> v;        // nS
  std::vector<double> q;        // nS x nA, unregularized Q = c + discount P V
  std::vector<double> d_gamma;  // nS, normalized discounted occupancy
};

// log_ratio holds log(pi(a|s) / eta(a)).
Evaluation evaluate(const SoftMdp& m, std::span<const double> pi,
                    std::span<const double> log_ratio, bool with_occupancy);

// V(gamma) = sum_s gamma(s) V(s).
double initial_value(const SoftMdp& m, const Evaluation& ev);

// Weights W(s, a) such that the flat derivative equals
// sum_{s,a} W(s, a) f(theta, s, a) up to a constant:
// W = d_gamma(s) / (1 - discount) * pi(a|s) (Qbar(s,a) - sum_b Qbar(s,b) pi(b|s))
// with Qbar = Q + tau log(pi / eta).
std::vector<double> flat_weights(const SoftMdp& m, std::span<const double> pi,
                                 std::span<const double> log_ratio, const Evaluation& ev);

}  // namespace brflow::detail

#endif  // BRFLOW_SRC_TABULAR_HPP_
