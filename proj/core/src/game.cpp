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


#include "brflow/game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>

#include "brflow/best_response.hpp"
#include "brflow/error.hpp"
#include "tabular.hpp"

namespace brflow {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_positive(double v, const char* field) {
  if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorCode::kValidation, std::string(field) + " must be positive");
}

class NegatedLinearization final : public Linearization {
 public:
  explicit NegatedLinearization(std::unique_ptr<Linearization> inner) : inner_(std::move(inner)) {}
  std::size_t dim() const override { return inner_->dim(); }
  double delta(std::span<const double> theta) const override { return -inner_->delta(theta); }
  void grad_delta(std::span<const double> theta, std::span<double> out) const override {
    inner_->grad_delta(theta, out);
    for (double& v : out) v = -v;
  }

 private:
  std::unique_ptr<Linearization> inner_;
};

// Single-agent view of one player against a frozen opponent, oriented so that
// the player minimizes.
class FrozenOpponent final : public FlatObjective {
 public:
  FrozenOpponent(const GameObjective& game, const GridDensity& opponent, bool is_nu)
      : game_(game), opponent_(opponent), is_nu_(is_nu) {}

  std::size_t dim() const override { return is_nu_ ? game_.dim_nu() : game_.dim_mu(); }
  double value(const MeasureView& m) const override {
    return is_nu_ ? game_.value(m, opponent_) : -game_.value(opponent_, m);
  }
  std::unique_ptr<Linearization> linearize(const MeasureView& m) const override {
    if (is_nu_) return game_.linearize(m, opponent_).nu;
    return std::make_unique<NegatedLinearization>(game_.linearize(opponent_, m).mu);
  }
  RegularityConstants constants() const override {
    const GameConstants k = game_.constants();
    return is_nu_ ? RegularityConstants{k.c_nu, k.l_nu} : RegularityConstants{k.c_mu, k.l_mu};
  }

 private:
  const GameObjective& game_;
  GridDensity opponent_;
  bool is_nu_;
};

// Row-wise softmax of per-state logits; fills log(pi / eta).
std::vector<double> state_softmax(std::span<const double> logits, std::size_t ns, std::size_t na,
                                  std::span<const double> eta, std::vector<double>& log_ratio) {
  std::vector<double> pi(ns * na);
  log_ratio.resize(ns * na);
  std::vector<double> lr;
  for (std::size_t s = 0; s < ns; ++s) {
    const std::vector<double> row = softmax(logits.subspan(s * na, na), eta, &lr);
    for (std::size_t a = 0; a < na; ++a) {
      pi[s * na + a] = row[a];
      log_ratio[s * na + a] = lr[a];
    }
  }
  return pi;
}

double bandit_side_value(std::span<const double> pi, std::span<const double> log_ratio) {
  double v = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) v += pi[a] * log_ratio[a];
  return v;
}

std::vector<double> side_weights(std::span<const double> pi, std::span<const double> q_bar) {
  double avg = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) avg += pi[a] * q_bar[a];
  std::vector<double> w(pi.size());
  for (std::size_t a = 0; a < pi.size(); ++a) w[a] = pi[a] * (q_bar[a] - avg);
  return w;
}

double abs_max(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double log_total(std::span<const double> eta) {
  return std::log(std::accumulate(eta.begin(), eta.end(), 0.0));
}

void validate_eta(std::span<const double> eta, std::size_t n, const char* field) {
  if (eta.size() != n) {
    fail(ErrorCode::kValidation, std::string(field) + ": expected " + std::to_string(n) + " entries");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(eta[i] > 0.0) || !std::isfinite(eta[i])) {
      fail(ErrorCode::kValidation, std::string(field) + "[" + std::to_string(i) + "] must be positive");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// GameObjective conveniences

double GameObjective::delta_nu(const MeasureView& nu, const MeasureView& mu,
                               std::span<const double> x) const {
  return linearize(nu, mu).nu->delta(x);
}

double GameObjective::delta_mu(const MeasureView& nu, const MeasureView& mu,
                               std::span<const double> y) const {
  return linearize(nu, mu).mu->delta(y);
}

std::vector<double> GameObjective::grad_delta_nu(const MeasureView& nu, const MeasureView& mu,
                                                 std::span<const double> x) const {
  std::vector<double> out(dim_nu(), 0.0);
  linearize(nu, mu).nu->grad_delta(x, out);
  return out;
}

std::vector<double> GameObjective::grad_delta_mu(const MeasureView& nu, const MeasureView& mu,
                                                 std::span<const double> y) const {
  std::vector<double> out(dim_mu(), 0.0);
  linearize(nu, mu).mu->grad_delta(y, out);
  return out;
}

void GameConfig::validate() const {
  if (!(sigma_nu > 0.0)) fail(ErrorCode::kNonpositiveSigma, "sigma_nu must be positive");
  if (!(sigma_mu > 0.0)) fail(ErrorCode::kNonpositiveSigma, "sigma_mu must be positive");
  require_positive(alpha_nu, "alpha_nu");
  require_positive(alpha_mu, "alpha_mu");
}

// ---------------------------------------------------------------------------
// Operators and calculators

GridPair br_pair_grid(const GameObjective& game, const GameConfig& cfg, const GridDensity& nu,
                      const GridDensity& mu) {
  cfg.validate();
  if (!(nu.grid() == cfg.xi.grid())) fail(ErrorCode::kGridMismatch, "br_pair_grid: nu is not on the xi grid");
  if (!(mu.grid() == cfg.rho.grid())) fail(ErrorCode::kGridMismatch, "br_pair_grid: mu is not on the rho grid");
  const GameLinearization lin = game.linearize(nu, mu);
  return {gibbs_grid(*lin.nu, cfg.xi, cfg.sigma_nu, -1.0), gibbs_grid(*lin.mu, cfg.rho, cfg.sigma_mu, +1.0)};
}

GameContractionReport game_contraction_report(const GameConstants& k, double sigma_nu,
                                              double sigma_mu, double alpha_nu, double alpha_mu,
                                              double m1_xi, double m1_rho) {
  constexpr double e = std::numbers::e;
  GameContractionReport r;
  r.constants = k;
  r.m1_xi = m1_xi;
  r.m1_rho = m1_rho;
  r.sigma_nu = sigma_nu;
  r.sigma_mu = sigma_mu;
  r.alpha_nu = alpha_nu;
  r.alpha_mu = alpha_mu;
  r.l_psi = lipschitz_factor(k.c_nu, k.l_nu, sigma_nu, m1_xi);
  r.l_phi = lipschitz_factor(k.c_mu, k.l_mu, sigma_mu, m1_rho);
  r.l_sum = r.l_psi + r.l_phi;
  const double a_min = std::min(alpha_nu, alpha_mu);
  r.sigma_nu_threshold = 2.0 * k.c_nu + 2.0 * e * (e + 1.0) * k.l_nu * m1_xi;
  r.sigma_mu_threshold = 2.0 * k.c_mu + 2.0 * e * (e + 1.0) * k.l_mu * m1_rho;
  r.sigma_nu_threshold_adjusted = 2.0 * k.c_nu + 2.0 * e * (e + 1.0) * k.l_nu * (alpha_nu / a_min) * m1_xi;
  r.sigma_mu_threshold_adjusted = 2.0 * k.c_mu + 2.0 * e * (e + 1.0) * k.l_mu * (alpha_mu / a_min) * m1_rho;
  r.thresholds_hold = sigma_nu > r.sigma_nu_threshold && sigma_mu > r.sigma_mu_threshold;
  r.adjusted_thresholds_hold =
      sigma_nu > r.sigma_nu_threshold_adjusted && sigma_mu > r.sigma_mu_threshold_adjusted;
  r.contractive = r.l_sum < 1.0;
  const double rate = a_min - (alpha_nu * r.l_psi + alpha_mu * r.l_phi);
  r.rate = rate > 0.0 ? rate : kNaN;
  return r;
}

GameContractionReport game_contraction_report(const GameConstants& k, const GameConfig& cfg) {
  cfg.validate();
  return game_contraction_report(k, cfg.sigma_nu, cfg.sigma_mu, cfg.alpha_nu, cfg.alpha_mu,
                                 cfg.xi.first_moment(), cfg.rho.first_moment());
}

double joint_w1(const GridPair& a, const GridPair& b) {
  return w1_grid(a.nu, b.nu) + w1_grid(a.mu, b.mu);
}

CoupledTrace coupled_flow_grid(const GameObjective& game, const GameConfig& cfg,
                               const GridDensity& nu0, const GridDensity& mu0, double h,
                               std::size_t steps, const GridPair* target,
                               std::size_t snapshot_stride) {
  cfg.validate();
  if (!(h >= 0.0)) fail(ErrorCode::kConfigViolation, "h must be >= 0");
  if (std::max(cfg.alpha_nu, cfg.alpha_mu) * h > 1.0 + 1e-15) {
    fail(ErrorCode::kConfigViolation, "max(alpha_nu, alpha_mu) * h exceeds 1");
  }
  CoupledTrace trace{{}, {}, {}, {nu0, mu0}};
  trace.nu.w1_to_target = trace.mu.w1_to_target = target != nullptr;
  const nlohmann::json echo = {{"sigma_nu", cfg.sigma_nu}, {"sigma_mu", cfg.sigma_mu},
                               {"alpha_nu", cfg.alpha_nu}, {"alpha_mu", cfg.alpha_mu},
                               {"h", h},                   {"steps", steps}};
  trace.nu.config_echo = trace.mu.config_echo = echo;

  GridPair state{nu0, mu0};
  GridPair last = state;
  auto record = [&](std::size_t k) {
    const double t = static_cast<double>(k) * h;
    const GridPair& ref = target ? *target : last;
    const double wn = w1_grid(state.nu, ref.nu);
    const double wm = w1_grid(state.mu, ref.mu);
    for (FlowTrace* tr : {&trace.nu, &trace.mu}) {
      tr->steps.push_back(k);
      tr->times.push_back(t);
      tr->kl.push_back(kNaN);
    }
    trace.nu.w1.push_back(wn);
    trace.mu.w1.push_back(wm);
    trace.joint_w1.push_back(wn + wm);
  };

  for (std::size_t k = 0;; ++k) {
    if (target || k > 0) record(k);
    if (!target) last = state;
    if (k != steps && snapshot_stride > 0 && k % snapshot_stride == 0) {
      trace.nu.density_snapshots.emplace_back(k, state.nu);
      trace.mu.density_snapshots.emplace_back(k, state.mu);
    }
    if (k == steps) break;
    GridPair br = br_pair_grid(game, cfg, state.nu, state.mu);
    state = {mix(state.nu, br.nu, cfg.alpha_nu * h), mix(state.mu, br.mu, cfg.alpha_mu * h)};
  }
  trace.nu.density_snapshots.emplace_back(steps, state.nu);
  trace.mu.density_snapshots.emplace_back(steps, state.mu);
  trace.nu.final_density = state.nu;
  trace.mu.final_density = state.mu;
  trace.final_state = std::move(state);
  return trace;
}

MneResult mne_fixed_point(const GameObjective& game, const GameConfig& cfg, double tol,
                          std::size_t max_iter) {
  MneResult result{{cfg.xi.density(), cfg.rho.density()}, 0, 0.0,
                   game_contraction_report(game.constants(), cfg), {}};
  if (!result.report.contractive) {
    result.warnings.push_back("L_psi + L_phi = " + std::to_string(result.report.l_sum) +
                              " >= 1; convergence is not guaranteed");
  }
  for (std::size_t it = 1; it <= max_iter; ++it) {
    GridPair next = br_pair_grid(game, cfg, result.state.nu, result.state.mu);
    result.residual = joint_w1(next, result.state);
    result.iterations = it;
    if (result.residual < tol) return result;
    result.state = std::move(next);
  }
  fail(ErrorCode::kNoConvergence, "mne_fixed_point: joint residual " + std::to_string(result.residual) +
                                      " after " + std::to_string(max_iter) + " iterations");
}

std::pair<double, double> mne_residuals(const GameObjective& game, const GameConfig& cfg,
                                        const GridDensity& nu, const GridDensity& mu) {
  const GridPair br = br_pair_grid(game, cfg, nu, mu);
  return {w1_grid(br.nu, nu), w1_grid(br.mu, mu)};
}

double regularized_game_value(const GameObjective& game, const GameConfig& cfg,
                              const GridDensity& nu, const GridDensity& mu) {
  return game.value(nu, mu) + cfg.sigma_nu * kl_grid(nu, cfg.xi.density()) -
         cfg.sigma_mu * kl_grid(mu, cfg.rho.density());
}

Exploitability exploitability(const GameObjective& game, const GameConfig& cfg,
                              const GridDensity& nu, const GridDensity& mu, double tol,
                              std::size_t max_iter) {
  const double g = regularized_game_value(game, cfg, nu, mu);
  const GridDensity nu_hat =
      picard_fixed_point(FrozenOpponent(game, mu, true), cfg.xi, cfg.sigma_nu, tol, max_iter).density;
  const GridDensity mu_hat =
      picard_fixed_point(FrozenOpponent(game, nu, false), cfg.rho, cfg.sigma_mu, tol, max_iter).density;
  Exploitability out;
  out.nu_gain = g - regularized_game_value(game, cfg, nu_hat, mu);
  out.mu_gain = regularized_game_value(game, cfg, nu, mu_hat) - g;
  out.total = out.nu_gain + out.mu_gain;
  return out;
}

// ---------------------------------------------------------------------------
// Two-player bandit

TwoPlayerBandit::TwoPlayerBandit(std::vector<double> costs, std::vector<double> eta_a,
                                 std::vector<double> eta_b, FeatureMap features_a,
                                 FeatureMap features_b, double tau_a, double tau_b)
    : costs_(std::move(costs)),
      eta_a_(std::move(eta_a)),
      eta_b_(std::move(eta_b)),
      features_a_(std::move(features_a)),
      features_b_(std::move(features_b)),
      tau_a_(tau_a),
      tau_b_(tau_b) {
  if (eta_a_.empty() || eta_b_.empty()) fail(ErrorCode::kValidation, "eta_a and eta_b must be non-empty");
  validate_eta(eta_a_, eta_a_.size(), "eta_a");
  validate_eta(eta_b_, eta_b_.size(), "eta_b");
  if (costs_.size() != eta_a_.size() * eta_b_.size()) {
    fail(ErrorCode::kValidation, "costs: expected nA x nB = " + std::to_string(eta_a_.size() * eta_b_.size()) +
                                     " entries");
  }
  for (std::size_t i = 0; i < costs_.size(); ++i) {
    if (!std::isfinite(costs_[i])) fail(ErrorCode::kValidation, "costs[" + std::to_string(i) + "] is not finite");
  }
  if (features_a_.entries() != eta_a_.size()) fail(ErrorCode::kValidation, "features_a: one embedding per action");
  if (features_b_.entries() != eta_b_.size()) fail(ErrorCode::kValidation, "features_b: one embedding per action");
  if (!(tau_a_ >= 0.0)) fail(ErrorCode::kValidation, "tau_a must be >= 0");
  if (!(tau_b_ >= 0.0)) fail(ErrorCode::kValidation, "tau_b must be >= 0");
}

std::vector<double> TwoPlayerBandit::policy_a(const MeasureView& nu) const {
  return softmax(features_a_.mean_features(nu), eta_a_);
}

std::vector<double> TwoPlayerBandit::policy_b(const MeasureView& mu) const {
  return softmax(features_b_.mean_features(mu), eta_b_);
}

double TwoPlayerBandit::value(const MeasureView& nu, const MeasureView& mu) const {
  std::vector<double> lr_a, lr_b;
  const std::vector<double> pa = softmax(features_a_.mean_features(nu), eta_a_, &lr_a);
  const std::vector<double> pb = softmax(features_b_.mean_features(mu), eta_b_, &lr_b);
  const std::size_t nb = pb.size();
  double v = 0.0;
  for (std::size_t a = 0; a < pa.size(); ++a) {
    for (std::size_t b = 0; b < nb; ++b) v += costs_[a * nb + b] * pa[a] * pb[b];
  }
  return v + tau_a_ * bandit_side_value(pa, lr_a) - tau_b_ * bandit_side_value(pb, lr_b);
}

GameLinearization TwoPlayerBandit::linearize(const MeasureView& nu, const MeasureView& mu) const {
  std::vector<double> lr_a, lr_b;
  const std::vector<double> fa = features_a_.mean_features(nu);
  const std::vector<double> fb = features_b_.mean_features(mu);
  const std::vector<double> pa = softmax(fa, eta_a_, &lr_a);
  const std::vector<double> pb = softmax(fb, eta_b_, &lr_b);
  const std::size_t na = pa.size();
  const std::size_t nb = pb.size();
  std::vector<double> qa(na, 0.0), qb(nb, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t b = 0; b < nb; ++b) {
      qa[a] += costs_[a * nb + b] * pb[b];
      qb[b] += costs_[a * nb + b] * pa[a];
    }
  }
  for (std::size_t a = 0; a < na; ++a) qa[a] += tau_a_ * lr_a[a];
  for (std::size_t b = 0; b < nb; ++b) qb[b] -= tau_b_ * lr_b[b];
  GameLinearization out;
  out.nu = FeatureLinearization::centered(features_a_, side_weights(pa, qa), fa);
  out.mu = FeatureLinearization::centered(features_b_, side_weights(pb, qb), fb);
  return out;
}

GameConstants TwoPlayerBandit::constants() const {
  const double c = abs_max(costs_);
  const RegularityConstants ka = regularity_constants(c, tau_a_, features_a_.sup_f0(), features_a_.sup_f1(),
                                                      log_total(eta_a_));
  const RegularityConstants kb = regularity_constants(c, tau_b_, features_b_.sup_f0(), features_b_.sup_f1(),
                                                      log_total(eta_b_));
  return {ka.c_f, ka.l_f, kb.c_f, kb.l_f};
}

std::unique_ptr<TwoPlayerBandit> two_player_bandit(std::vector<double> costs,
                                                   std::vector<double> eta_a,
                                                   std::vector<double> eta_b,
                                                   FeatureMap features_a, FeatureMap features_b,
                                                   double tau_a, double tau_b) {
  return std::make_unique<TwoPlayerBandit>(std::move(costs), std::move(eta_a), std::move(eta_b),
                                           std::move(features_a), std::move(features_b), tau_a, tau_b);
}

// ---------------------------------------------------------------------------
// Markov game

void MarkovGameSpec::validate() const {
  if (n_states == 0) fail(ErrorCode::kValidation, "nS must be >= 1");
  if (n_actions_a == 0) fail(ErrorCode::kValidation, "nA must be >= 1");
  if (n_actions_b == 0) fail(ErrorCode::kValidation, "nB must be >= 1");
  const std::size_t ns = n_states, na = n_actions_a, nb = n_actions_b;
  if (transition.size() != ns * na * nb * ns) {
    fail(ErrorCode::kValidation, "P: expected nS x nA x nB x nS = " + std::to_string(ns * na * nb * ns) +
                                     " entries, got " + std::to_string(transition.size()));
  }
  for (std::size_t j = 0; j < ns * na * nb; ++j) {
    double row = 0.0;
    for (std::size_t t = 0; t < ns; ++t) {
      const double p = transition[j * ns + t];
      if (!(p >= 0.0) || !std::isfinite(p)) {
        fail(ErrorCode::kValidation, "P[" + std::to_string(j / (na * nb)) + "][" + std::to_string((j / nb) % na) +
                                         "][" + std::to_string(j % nb) + "] has an invalid entry");
      }
      row += p;
    }
    if (std::abs(row - 1.0) > 1e-12) {
      fail(ErrorCode::kValidation, "P[" + std::to_string(j / (na * nb)) + "][" + std::to_string((j / nb) % na) +
                                       "][" + std::to_string(j % nb) + "] must sum to 1");
    }
  }
  if (cost.size() != ns * na * nb) fail(ErrorCode::kValidation, "c: expected nS x nA x nB entries");
  for (std::size_t i = 0; i < cost.size(); ++i) {
    if (!std::isfinite(cost[i])) fail(ErrorCode::kValidation, "c[" + std::to_string(i) + "] is not finite");
  }
  if (!(discount >= 0.0 && discount < 1.0)) fail(ErrorCode::kValidation, "delta must lie in [0, 1)");
  if (!(tau_a >= 0.0)) fail(ErrorCode::kValidation, "tau_a must be >= 0");
  if (!(tau_b >= 0.0)) fail(ErrorCode::kValidation, "tau_b must be >= 0");
  validate_eta(eta_a, na, "eta_a");
  validate_eta(eta_b, nb, "eta_b");
  if (gamma.size() != ns) fail(ErrorCode::kValidation, "gamma: expected nS entries");
  double g = 0.0;
  for (std::size_t s = 0; s < ns; ++s) {
    if (!(gamma[s] >= 0.0)) fail(ErrorCode::kValidation, "gamma[" + std::to_string(s) + "] must be >= 0");
    g += gamma[s];
  }
  if (std::abs(g - 1.0) > 1e-12) fail(ErrorCode::kValidation, "gamma must sum to 1");
  if (features_a.entries() != ns * na) fail(ErrorCode::kValidation, "features_a.phi: expected nS x nA embeddings");
  if (features_b.entries() != ns * nb) fail(ErrorCode::kValidation, "features_b.phi: expected nS x nB embeddings");
}

namespace {

struct PlayerPolicy {
  std::vector<double> mean_f;
  std::vector<double> pi;
  std::vector<double> log_ratio;
};

PlayerPolicy player_policy(const FeatureMap& f, const MeasureView& m, std::size_t ns, std::size_t na,
                           std::span<const double> eta) {
  PlayerPolicy p;
  p.mean_f = f.mean_features(m);
  p.pi = state_softmax(p.mean_f, ns, na, eta, p.log_ratio);
  return p;
}

// The MDP seen by one player with the opponent's policy averaged out.
struct InducedMdp {
  std::vector<double> transition;
  std::vector<double> cost;
  detail::SoftMdp view;
};

InducedMdp induce(const MarkovGameSpec& g, const PlayerPolicy& opp, bool for_a) {
  const std::size_t ns = g.n_states, na = g.n_actions_a, nb = g.n_actions_b;
  const std::size_t n_own = for_a ? na : nb;
  const std::size_t n_opp = for_a ? nb : na;
  // Signed entropy contribution of the opponent, a function of the state only.
  const double opp_tau = for_a ? -g.tau_b : g.tau_a;
  InducedMdp m;
  m.transition.assign(ns * n_own * ns, 0.0);
  m.cost.assign(ns * n_own, 0.0);
  for (std::size_t s = 0; s < ns; ++s) {
    double opp_entropy = 0.0;
    for (std::size_t o = 0; o < n_opp; ++o) opp_entropy += opp.pi[s * n_opp + o] * opp.log_ratio[s * n_opp + o];
    for (std::size_t u = 0; u < n_own; ++u) {
      double c = opp_tau * opp_entropy;
      double* row = m.transition.data() + (s * n_own + u) * ns;
      for (std::size_t o = 0; o < n_opp; ++o) {
        const std::size_t a = for_a ? u : o;
        const std::size_t b = for_a ? o : u;
        const std::size_t j = (s * na + a) * nb + b;
        const double w = opp.pi[s * n_opp + o];
        c += w * g.cost[j];
        const double* src = g.transition.data() + j * ns;
        for (std::size_t t = 0; t < ns; ++t) row[t] += w * src[t];
      }
      m.cost[s * n_own + u] = c;
    }
  }
  m.view = {ns, n_own, m.transition, m.cost, g.discount, for_a ? g.tau_a : -g.tau_b, g.gamma,
            g.dense_threshold};
  return m;
}

}  // namespace

MarkovGameObjective::MarkovGameObjective(MarkovGameSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
}

double MarkovGameObjective::value(const MeasureView& nu, const MeasureView& mu) const {
  const MarkovGameSpec& g = spec_;
  const PlayerPolicy pa = player_policy(g.features_a, nu, g.n_states, g.n_actions_a, g.eta_a);
  const PlayerPolicy pb = player_policy(g.features_b, mu, g.n_states, g.n_actions_b, g.eta_b);
  const InducedMdp m = induce(g, pb, true);
  const detail::Evaluation ev = detail::evaluate(m.view, pa.pi, pa.log_ratio, false);
  return detail::initial_value(m.view, ev);
}

GameLinearization MarkovGameObjective::linearize(const MeasureView& nu, const MeasureView& mu) const {
  const MarkovGameSpec& g = spec_;
  const PlayerPolicy pa = player_policy(g.features_a, nu, g.n_states, g.n_actions_a, g.eta_a);
  const PlayerPolicy pb = player_policy(g.features_b, mu, g.n_states, g.n_actions_b, g.eta_b);
  const InducedMdp ma = induce(g, pb, true);
  const InducedMdp mb = induce(g, pa, false);
  const detail::Evaluation ea = detail::evaluate(ma.view, pa.pi, pa.log_ratio, true);
  const detail::Evaluation eb = detail::evaluate(mb.view, pb.pi, pb.log_ratio, true);
  GameLinearization out;
  out.nu = FeatureLinearization::centered(g.features_a, detail::flat_weights(ma.view, pa.pi, pa.log_ratio, ea),
                                          pa.mean_f);
  out.mu = FeatureLinearization::centered(g.features_b, detail::flat_weights(mb.view, pb.pi, pb.log_ratio, eb),
                                          pb.mean_f);
  return out;
}

GameConstants MarkovGameObjective::constants() const {
  const MarkovGameSpec& g = spec_;
  const double c = abs_max(g.cost);
  const double log_a = log_total(g.eta_a);
  const double log_b = log_total(g.eta_b);
  // The opponent's regularizer enters each induced MDP as a bounded state cost.
  const double cost_nu = c + g.tau_b * (2.0 * g.features_b.sup_f0() + std::abs(log_b));
  const double cost_mu = c + g.tau_a * (2.0 * g.features_a.sup_f0() + std::abs(log_a));
  const RegularityConstants ka =
      regularity_constants(cost_nu, g.tau_a, g.features_a.sup_f0(), g.features_a.sup_f1(), log_a, g.discount);
  const RegularityConstants kb =
      regularity_constants(cost_mu, g.tau_b, g.features_b.sup_f0(), g.features_b.sup_f1(), log_b, g.discount);
  return {ka.c_f, ka.l_f, kb.c_f, kb.l_f};
}

std::unique_ptr<MarkovGameObjective> markov_game_objective(MarkovGameSpec spec) {
  return std::make_unique<MarkovGameObjective>(std::move(spec));
}

// ---------------------------------------------------------------------------
// Kernel game

namespace {

struct Support {
  std::vector<double> points;
  std::vector<double> masses;
};

Support support_of(const MeasureView& m) {
  Support s;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double w = m.mass(i);
    if (w == 0.0) continue;
    const auto p = m.point(i);
    s.points.insert(s.points.end(), p.begin(), p.end());
    s.masses.push_back(w);
  }
  return s;
}

class KernelSide final : public Linearization {
 public:
  KernelSide(std::shared_ptr<const KernelGame::Kernel> k, std::shared_ptr<const KernelGame::KernelGrad> grad,
             Support other, std::size_t dim_self, std::size_t dim_other, bool self_is_x, double offset)
      : k_(std::move(k)),
        grad_(std::move(grad)),
        other_(std::move(other)),
        dim_self_(dim_self),
        dim_other_(dim_other),
        self_is_x_(self_is_x),
        offset_(offset) {}

  std::size_t dim() const override { return dim_self_; }

  double delta(std::span<const double> theta) const override {
    double acc = 0.0;
    for (std::size_t j = 0; j < other_.masses.size(); ++j) {
      const std::span<const double> o(other_.points.data() + j * dim_other_, dim_other_);
      acc += other_.masses[j] * (self_is_x_ ? (*k_)(theta, o) : (*k_)(o, theta));
    }
    return acc - offset_;
  }

  void grad_delta(std::span<const double> theta, std::span<double> out) const override {
    std::fill(out.begin(), out.end(), 0.0);
    std::vector<double> g(dim_self_);
    for (std::size_t j = 0; j < other_.masses.size(); ++j) {
      const std::span<const double> o(other_.points.data() + j * dim_other_, dim_other_);
      if (self_is_x_) {
        (*grad_)(theta, o, g);
      } else {
        (*grad_)(o, theta, g);
      }
      for (std::size_t c = 0; c < dim_self_; ++c) out[c] += other_.masses[j] * g[c];
    }
  }

 private:
  std::shared_ptr<const KernelGame::Kernel> k_;
  std::shared_ptr<const KernelGame::KernelGrad> grad_;
  Support other_;
  std::size_t dim_self_;
  std::size_t dim_other_;
  bool self_is_x_;
  double offset_;
};

}  // namespace

KernelGame::KernelGame(std::size_t dim_x, std::size_t dim_y, Kernel k, KernelGrad grad_x,
                       KernelGrad grad_y, GameConstants constants)
    : dim_x_(dim_x),
      dim_y_(dim_y),
      k_(std::make_shared<const Kernel>(std::move(k))),
      grad_x_(std::make_shared<const KernelGrad>(std::move(grad_x))),
      grad_y_(std::make_shared<const KernelGrad>(std::move(grad_y))),
      constants_(constants) {
  if (!*k_ || !*grad_x_ || !*grad_y_) fail(ErrorCode::kInvalidSpec, "kernel game needs k and both gradients");
}

double KernelGame::value(const MeasureView& nu, const MeasureView& mu) const {
  const Support sx = support_of(nu);
  const Support sy = support_of(mu);
  double v = 0.0;
  for (std::size_t i = 0; i < sx.masses.size(); ++i) {
    const std::span<const double> x(sx.points.data() + i * dim_x_, dim_x_);
    double row = 0.0;
    for (std::size_t j = 0; j < sy.masses.size(); ++j) {
      row += sy.masses[j] * (*k_)(x, std::span<const double>(sy.points.data() + j * dim_y_, dim_y_));
    }
    v += sx.masses[i] * row;
  }
  return v;
}

GameLinearization KernelGame::linearize(const MeasureView& nu, const MeasureView& mu) const {
  const double f = value(nu, mu);
  GameLinearization out;
  out.nu = std::make_unique<KernelSide>(k_, grad_x_, support_of(mu), dim_x_, dim_y_, true, f);
  out.mu = std::make_unique<KernelSide>(k_, grad_y_, support_of(nu), dim_y_, dim_x_, false, f);
  return out;
}

}  // namespace brflow
