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


#include "tabular.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "brflow/error.hpp"

namespace brflow::detail {

std::vector<double> policy_kernel(const SoftMdp& m, std::span<const double> pi) {
  const std::size_t ns = m.n_states;
  const std::size_t na = m.n_actions;
  std::vector<double> k(ns * ns, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const double p = pi[s * na + a];
      if (p == 0.0) continue;
      const double* row = m.transition.data() + (s * na + a) * ns;
      for (std::size_t t = 0; t < ns; ++t) k[s * ns + t] += p * row[t];
    }
  }
  return k;
}

std::vector<double> solve_discounted(std::span<const double> kernel, std::size_t n,
                                     double discount, std::span<const double> rhs,
                                     bool transpose, std::size_t dense_threshold) {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMatrix> k(kernel.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(), static_cast<Eigen::Index>(n));
  Eigen::VectorXd x;

  if (n <= dense_threshold) {
    RowMatrix a = RowMatrix::Identity(k.rows(), k.cols()) - discount * k;
    if (transpose) a.transposeInPlace();
    Eigen::PartialPivLU<RowMatrix> lu(a);
    x = lu.solve(b);
  } else {
    // x = b + discount K x converges geometrically with ratio `discount`.
    x = b;
    for (int it = 0; it < 100000; ++it) {
      Eigen::VectorXd next = transpose ? Eigen::VectorXd(b + discount * (k.transpose() * x))
                                       : Eigen::VectorXd(b + discount * (k * x));
      const double change = (next - x).lpNorm<Eigen::Infinity>();
      x.swap(next);
      if (change <= 1e-15 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) break;
    }
  }
  if (!x.allFinite()) {
    fail(ErrorCode::kSolveFailure, "linear solve for (I - delta P_pi) produced non-finite values");
  }
  return std::vector<double>(x.data(), x.data() + x.size());
}

Evaluation evaluate(const SoftMdp& m, std::span<const double> pi,
                    std::span<const double> log_ratio, bool with_occupancy) {
  const std::size_t ns = m.n_states;
  const std::size_t na = m.n_actions;
  const std::vector<double> k = policy_kernel(m, pi);

  std::vector<double> r(ns, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t i = s * na + a;
      r[s] += pi[i] * (m.cost[i] + m.tau * log_ratio[i]);
    }
  }

  Evaluation ev;
  ev.v = solve_discounted(k, ns, m.discount, r, false, m.dense_threshold);
  ev.q.assign(ns * na, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t i = s * na + a;
      const double* row = m.transition.data() + i * ns;
      double pv = 0.0;
      for (std::size_t t = 0; t < ns; ++t) pv += row[t] * ev.v[t];
      ev.q[i] = m.cost[i] + m.discount * pv;
    }
  }
  if (with_occupancy) {
    ev.d_gamma = solve_discounted(k, ns, m.discount, m.gamma, true, m.dense_threshold);
    for (double& d : ev.d_gamma) d *= 1.0 - m.discount;
  }
  return ev;
}

double initial_value(const SoftMdp& m, const Evaluation& ev) {
  double v = 0.0;
  for (std::size_t s = 0; s < m.n_states; ++s) v += m.gamma[s] * ev.v[s];
  return v;
}

std::vector<double> flat_weights(const SoftMdp& m, std::span<const double> pi,
                                 std::span<const double> log_ratio, const Evaluation& ev) {
  const std::size_t ns = m.n_states;
  const std::size_t na = m.n_actions;
  std::vector<double> w(ns * na, 0.0);
  std::vector<double> q_bar(na);
  for (std::size_t s = 0; s < ns; ++s) {
    double avg = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t i = s * na + a;
      q_bar[a] = ev.q[i] + m.tau * log_ratio[i];
      avg += q_bar[a] * pi[i];
    }
    const double scale = ev.d_gamma[s] / (1.0 - m.discount);
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t i = s * na + a;
      w[i] = scale * pi[i] * (q_bar[a] - avg);
    }
  }
  return w;
}

}  // namespace brflow::detail
