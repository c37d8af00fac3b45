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


#include "brflow/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <utility>

#include "brflow/error.hpp"
#include "brflow/random.hpp"
#include "tabular.hpp"

namespace brflow {
namespace {

constexpr double kStochasticTolerance = 1e-12;

std::string at(const char* field, std::size_t i) {
  return std::string(field) + "[" + std::to_string(i) + "]";
}

detail::SoftMdp view(const MDPSpec& m) {
  return {m.n_states, m.n_actions, m.transition, m.cost, m.discount, m.tau, m.gamma,
          m.dense_threshold};
}

PolicyTable policy_from_mean_features(const MDPSpec& mdp, std::span<const double> mean_f) {
  PolicyTable t{mdp.n_states, mdp.n_actions, {}, {}};
  t.pi.resize(mdp.n_states * mdp.n_actions);
  t.log_ratio.resize(t.pi.size());
  std::vector<double> log_ratio;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto logits = mean_f.subspan(s * mdp.n_actions, mdp.n_actions);
    const std::vector<double> row = softmax(logits, mdp.eta, &log_ratio);
    std::copy(row.begin(), row.end(), t.pi.begin() + static_cast<std::ptrdiff_t>(s * mdp.n_actions));
    std::copy(log_ratio.begin(), log_ratio.end(),
              t.log_ratio.begin() + static_cast<std::ptrdiff_t>(s * mdp.n_actions));
  }
  return t;
}

void require_positive_tau(const MDPSpec& mdp, const char* what) {
  if (!(mdp.tau > 0.0)) fail(ErrorCode::kValidation, std::string(what) + " requires tau > 0");
}

}  // namespace

void MDPSpec::validate() const {
  if (n_states == 0) fail(ErrorCode::kValidation, "nS must be >= 1");
  if (n_actions == 0) fail(ErrorCode::kValidation, "nA must be >= 1");
  const std::size_t ns = n_states;
  const std::size_t na = n_actions;
  if (transition.size() != ns * na * ns) {
    fail(ErrorCode::kValidation, "P: expected nS x nA x nS = " + std::to_string(ns * na * ns) +
                                     " entries, got " + std::to_string(transition.size()));
  }
  for (std::size_t sa = 0; sa < ns * na; ++sa) {
    double row = 0.0;
    for (std::size_t t = 0; t < ns; ++t) {
      const double p = transition[sa * ns + t];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        fail(ErrorCode::kValidation, "P[" + std::to_string(sa / na) + "][" + std::to_string(sa % na) +
                                         "][" + std::to_string(t) + "] must be a probability");
      }
      row += p;
    }
    if (std::abs(row - 1.0) > kStochasticTolerance) {
      fail(ErrorCode::kValidation, "P[" + std::to_string(sa / na) + "][" + std::to_string(sa % na) +
                                       "] sums to " + std::to_string(row) + ", expected 1");
    }
  }
  if (cost.size() != ns * na) {
    fail(ErrorCode::kValidation, "c: expected nS x nA = " + std::to_string(ns * na) + " entries");
  }
  for (std::size_t i = 0; i < cost.size(); ++i) {
    if (!std::isfinite(cost[i])) {
      fail(ErrorCode::kValidation, "c[" + std::to_string(i / na) + "][" + std::to_string(i % na) + "] is not finite");
    }
  }
  if (!(discount >= 0.0 && discount < 1.0)) fail(ErrorCode::kValidation, "delta must lie in [0, 1)");
  if (!(tau >= 0.0) || !std::isfinite(tau)) fail(ErrorCode::kValidation, "tau must be >= 0");
  if (eta.size() != na) fail(ErrorCode::kValidation, "eta: expected nA = " + std::to_string(na) + " entries");
  for (std::size_t a = 0; a < na; ++a) {
    if (!(eta[a] > 0.0) || !std::isfinite(eta[a])) fail(ErrorCode::kValidation, at("eta", a) + " must be positive");
  }
  if (gamma.size() != ns) fail(ErrorCode::kValidation, "gamma: expected nS = " + std::to_string(ns) + " entries");
  double gsum = 0.0;
  for (std::size_t s = 0; s < ns; ++s) {
    if (!(gamma[s] >= 0.0)) fail(ErrorCode::kValidation, at("gamma", s) + " must be >= 0");
    gsum += gamma[s];
  }
  if (std::abs(gsum - 1.0) > kStochasticTolerance) fail(ErrorCode::kValidation, "gamma must sum to 1");
  if (features.entries() != ns * na) {
    fail(ErrorCode::kValidation, "features.phi: expected nS x nA = " + std::to_string(ns * na) +
                                     " embeddings, got " + std::to_string(features.entries()));
  }
  if (c_f_override && !(*c_f_override >= 0.0)) fail(ErrorCode::kValidation, "constants.C_F must be >= 0");
  if (l_f_override && !(*l_f_override >= 0.0)) fail(ErrorCode::kValidation, "constants.L_F must be >= 0");
}

PolicyTable make_policy_table(const MDPSpec& mdp, std::vector<double> pi) {
  const std::size_t na = mdp.n_actions;
  if (pi.size() != mdp.n_states * na) fail(ErrorCode::kValidation, "pi: expected nS x nA entries");
  PolicyTable t{mdp.n_states, na, std::move(pi), {}};
  t.log_ratio.resize(t.pi.size());
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double row = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const double p = t.pi[s * na + a];
      if (!(p > 0.0)) fail(ErrorCode::kValidation, "pi[" + std::to_string(s) + "][" + std::to_string(a) + "] must be > 0");
      row += p;
      t.log_ratio[s * na + a] = std::log(p / mdp.eta[a]);
    }
    if (std::abs(row - 1.0) > kStochasticTolerance) fail(ErrorCode::kValidation, at("pi", s) + " must sum to 1");
  }
  return t;
}

PolicyTable policy_from_params(const MDPSpec& mdp, const MeasureView& nu) {
  return policy_from_mean_features(mdp, mdp.features.mean_features(nu));
}

Occupancy occupancy(const MDPSpec& mdp, const PolicyTable& pi) {
  const detail::SoftMdp m = view(mdp);
  const std::size_t ns = mdp.n_states;
  const std::vector<double> k = detail::policy_kernel(m, pi.pi);
  Occupancy occ;
  occ.kernel.assign(ns * ns, 0.0);
  std::vector<double> unit(ns, 0.0);
  for (std::size_t t = 0; t < ns; ++t) {
    // Column t of (I - delta P)^{-1}.
    std::fill(unit.begin(), unit.end(), 0.0);
    unit[t] = 1.0;
    const std::vector<double> col = detail::solve_discounted(k, ns, mdp.discount, unit, false, mdp.dense_threshold);
    for (std::size_t s = 0; s < ns; ++s) occ.kernel[s * ns + t] = (1.0 - mdp.discount) * col[s];
  }
  occ.d_gamma.assign(ns, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t t = 0; t < ns; ++t) occ.d_gamma[t] += mdp.gamma[s] * occ.kernel[s * ns + t];
  }
  return occ;
}

ValueQ value_q(const MDPSpec& mdp, const PolicyTable& pi) {
  detail::Evaluation ev = detail::evaluate(view(mdp), pi.pi, pi.log_ratio, false);
  return {std::move(ev.v), std::move(ev.q)};
}

double policy_value(const MDPSpec& mdp, const PolicyTable& pi) {
  const ValueQ vq = value_q(mdp, pi);
  double v = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) v += mdp.gamma[s] * vq.v[s];
  return v;
}

double occupancy_route_value(const MDPSpec& mdp, const PolicyTable& pi) {
  const Occupancy occ = occupancy(mdp, pi);
  const std::size_t na = mdp.n_actions;
  double v = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double r = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t i = s * na + a;
      r += (mdp.cost[i] + mdp.tau * pi.log_ratio[i]) * pi.pi[i];
    }
    v += occ.d_gamma[s] * r;
  }
  return v / (1.0 - mdp.discount);
}

double bellman_residual(const MDPSpec& mdp, const PolicyTable& pi, const ValueQ& vq) {
  const std::size_t na = mdp.n_actions;
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    double rhs = 0.0;
    for (std::size_t a = 0; a < na; ++a) {
      const std::size_t i = s * na + a;
      rhs += pi.pi[i] * (vq.q[i] + mdp.tau * pi.log_ratio[i]);
    }
    worst = std::max(worst, std::abs(vq.v[s] - rhs));
  }
  return worst;
}

double occupancy_identity_residual(const MDPSpec& mdp, const PolicyTable& pi,
                                   const Occupancy& occ) {
  const std::size_t ns = mdp.n_states;
  const std::vector<double> k = detail::policy_kernel(view(mdp), pi.pi);
  double worst = 0.0;
  for (std::size_t t = 0; t < ns; ++t) {
    double flow = 0.0;
    for (std::size_t s = 0; s < ns; ++s) flow += occ.d_gamma[s] * k[s * ns + t];
    const double lhs = (1.0 - mdp.discount) * mdp.gamma[t] + mdp.discount * flow;
    worst = std::max(worst, std::abs(lhs - occ.d_gamma[t]));
  }
  return worst;
}

double mdp_value(const MDPSpec& mdp, const MeasureView& nu) {
  return policy_value(mdp, policy_from_params(mdp, nu));
}

double mdp_flat_derivative(const MDPSpec& mdp, const MeasureView& nu,
                           std::span<const double> theta) {
  return MdpObjective(mdp).delta(nu, theta);
}

std::vector<double> mdp_grad_flat_derivative(const MDPSpec& mdp, const MeasureView& nu,
                                             std::span<const double> theta) {
  return MdpObjective(mdp).grad_delta(nu, theta);
}

RegularityConstants mdp_constants(const MDPSpec& mdp) {
  double cost_sup = 0.0;
  for (double c : mdp.cost) cost_sup = std::max(cost_sup, std::abs(c));
  const double eta_total = std::accumulate(mdp.eta.begin(), mdp.eta.end(), 0.0);
  RegularityConstants k = regularity_constants(cost_sup, mdp.tau, mdp.features.sup_f0(),
                                               mdp.features.sup_f1(), std::log(eta_total),
                                               mdp.discount);
  if (mdp.c_f_override) k.c_f = *mdp.c_f_override;
  if (mdp.l_f_override) k.l_f = *mdp.l_f_override;
  return k;
}

double optimal_policy_residual(const MDPSpec& mdp, const PolicyTable& pi) {
  require_positive_tau(mdp, "optimal_policy_residual");
  const ValueQ vq = value_q(mdp, pi);
  const std::size_t na = mdp.n_actions;
  std::vector<double> logits(na);
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < na; ++a) logits[a] = -vq.q[s * na + a] / mdp.tau;
    const std::vector<double> target = softmax(logits, mdp.eta);
    double tv = 0.0;
    for (std::size_t a = 0; a < na; ++a) tv += std::abs(pi.pi[s * na + a] - target[a]);
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

SoftValueIteration soft_value_iteration(const MDPSpec& mdp, double tol, std::size_t max_iter) {
  mdp.validate();
  require_positive_tau(mdp, "soft_value_iteration");
  const std::size_t ns = mdp.n_states;
  const std::size_t na = mdp.n_actions;
  std::vector<double> v(ns, 0.0);
  std::vector<double> next(ns);
  std::vector<double> q(ns * na);
  auto compute_q = [&](const std::vector<double>& vv) {
    for (std::size_t i = 0; i < ns * na; ++i) {
      const double* row = mdp.transition.data() + i * ns;
      double pv = 0.0;
      for (std::size_t t = 0; t < ns; ++t) pv += row[t] * vv[t];
      q[i] = mdp.cost[i] + mdp.discount * pv;
    }
  };
  std::vector<double> z(na);
  std::size_t it = 0;
  for (; it < max_iter; ++it) {
    compute_q(v);
    double change = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t a = 0; a < na; ++a) z[a] = std::log(mdp.eta[a]) - q[s * na + a] / mdp.tau;
      const double top = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double x : z) sum += std::exp(x - top);
      next[s] = -mdp.tau * (top + std::log(sum));
      change = std::max(change, std::abs(next[s] - v[s]));
    }
    v.swap(next);
    if (change <= tol) {
      ++it;
      break;
    }
  }
  compute_q(v);
  std::vector<double> logits(ns * na);
  for (std::size_t i = 0; i < ns * na; ++i) logits[i] = -q[i] / mdp.tau;
  return {policy_from_mean_features(mdp, logits), std::move(v), it};
}

MdpObjective::MdpObjective(MDPSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

double MdpObjective::value(const MeasureView& nu) const { return mdp_value(spec_, nu); }

std::unique_ptr<Linearization> MdpObjective::linearize(const MeasureView& nu) const {
  const std::vector<double> mean_f = spec_.features.mean_features(nu);
  const PolicyTable pi = policy_from_mean_features(spec_, mean_f);
  const detail::SoftMdp m = view(spec_);
  const detail::Evaluation ev = detail::evaluate(m, pi.pi, pi.log_ratio, true);
  return FeatureLinearization::centered(spec_.features, detail::flat_weights(m, pi.pi, pi.log_ratio, ev),
                                        mean_f);
}

MDPSpec make_random_mdp(std::size_t n_states, std::size_t n_actions, std::uint64_t seed,
                        const RandomMdpOptions& opts) {
  auto rng = make_stream(seed, StreamTag::kSpecGeneration);
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> p(n_states * n_actions * n_states);
  for (std::size_t sa = 0; sa < n_states * n_actions; ++sa) {
    double total = 0.0;
    for (std::size_t t = 0; t < n_states; ++t) total += p[sa * n_states + t] = expo(rng);
    for (std::size_t t = 0; t < n_states; ++t) p[sa * n_states + t] /= total;
  }
  std::vector<double> c(n_states * n_actions);
  for (double& x : c) x = unif(rng);
  MDPSpec spec{
      n_states,
      n_actions,
      std::move(p),
      std::move(c),
      opts.discount,
      opts.tau,
      std::vector<double>(n_actions, 1.0 / static_cast<double>(n_actions)),
      std::vector<double>(n_states, 1.0 / static_cast<double>(n_states)),
      FeatureMap::random(opts.activation, opts.dim, n_states * n_actions, opts.embedding_scale,
                         derive_seed(seed, StreamTag::kSpecGeneration, 2)),
      2000,
      {},
      {},
  };
  spec.validate();
  return spec;
}

}  // namespace brflow
