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


#ifndef BRFLOW_GAME_HPP_
#define BRFLOW_GAME_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "brflow/features.hpp"
#include "brflow/flow.hpp"
#include "brflow/measures.hpp"
#include "brflow/objectives.hpp"

namespace brflow {

// Constants of the min player (nu) and the max player (mu).
struct GameConstants {
  double c_nu = 0.0;
  double l_nu = 0.0;
  double c_mu = 0.0;
  double l_mu = 0.0;
};

struct GameLinearization {
  std::unique_ptr<Linearization> nu;  // dF/dnu(nu, mu, .)
  std::unique_ptr<Linearization> mu;  // dF/dmu(nu, mu, .)
};

// F(nu, mu), minimized over nu and maximized over mu. Both flat derivatives
// are centered against their own measure.
class GameObjective {
 public:
  virtual ~GameObjective() = default;
  virtual std::size_t dim_nu() const = 0;
  virtual std::size_t dim_mu() const = 0;
  virtual double value(const MeasureView& nu, const MeasureView& mu) const = 0;
  virtual GameLinearization linearize(const MeasureView& nu, const MeasureView& mu) const = 0;
  virtual GameConstants constants() const = 0;

  double delta_nu(const MeasureView& nu, const MeasureView& mu, std::span<const double> x) const;
  double delta_mu(const MeasureView& nu, const MeasureView& mu, std::span<const double> y) const;
  std::vector<double> grad_delta_nu(const MeasureView& nu, const MeasureView& mu,
                                    std::span<const double> x) const;
  std::vector<double> grad_delta_mu(const MeasureView& nu, const MeasureView& mu,
                                    std::span<const double> y) const;
};

struct GameConfig {
  double sigma_nu = 1.0;
  double sigma_mu = 1.0;
  double alpha_nu = 1.0;
  double alpha_mu = 1.0;
  ReferenceMeasure xi;
  ReferenceMeasure rho;

  void validate() const;
};

struct GridPair {
  GridDensity nu;
  GridDensity mu;
};

// Psi proportional to exp(-dF/dnu / sigma_nu) xi and Phi proportional to
// exp(+dF/dmu / sigma_mu) rho.
GridPair br_pair_grid(const GameObjective& game, const GameConfig& cfg, const GridDensity& nu,
                      const GridDensity& mu);

struct GameContractionReport {
  GameConstants constants;
  double m1_xi = 0.0;
  double m1_rho = 0.0;
  double sigma_nu = 0.0;
  double sigma_mu = 0.0;
  double alpha_nu = 1.0;
  double alpha_mu = 1.0;
  double l_psi = 0.0;
  double l_phi = 0.0;
  double l_sum = 0.0;
  // 2C + 2e(e+1) L m1, and the same with L scaled by alpha / min(alpha_nu, alpha_mu).
  double sigma_nu_threshold = 0.0;
  double sigma_mu_threshold = 0.0;
  double sigma_nu_threshold_adjusted = 0.0;
  double sigma_mu_threshold_adjusted = 0.0;
  bool thresholds_hold = false;
  bool adjusted_thresholds_hold = false;
  bool contractive = false;  // l_sum < 1
  // min(alpha_nu, alpha_mu) - (alpha_nu L_psi + alpha_mu L_phi); NaN unless positive.
  double rate = 0.0;
};

GameContractionReport game_contraction_report(const GameConstants& k, double sigma_nu,
                                              double sigma_mu, double alpha_nu, double alpha_mu,
                                              double m1_xi, double m1_rho);
GameContractionReport game_contraction_report(const GameConstants& k, const GameConfig& cfg);

// Joint metric W1(nu, nu') + W1(mu, mu').
double joint_w1(const GridPair& a, const GridPair& b);

struct CoupledTrace {
  FlowTrace nu;
  FlowTrace mu;
  std::vector<double> joint_w1;  // to the target pair, or between consecutive records
  GridPair final_state;
};

// Per-player explicit Euler with weights alpha_nu h and alpha_mu h.
// ConfigViolation when max(alpha_nu, alpha_mu) h > 1.
CoupledTrace coupled_flow_grid(const GameObjective& game, const GameConfig& cfg,
                               const GridDensity& nu0, const GridDensity& mu0, double h,
                               std::size_t steps, const GridPair* target = nullptr,
                               std::size_t snapshot_stride = 10);

struct MneResult {
  GridPair state;
  std::size_t iterations = 0;
  double residual = 0.0;  // joint W1 between (Psi, Phi)[state] and state
  GameContractionReport report;
  std::vector<std::string> warnings;
};

// Joint Picard iteration from (xi, rho). NoConvergence after max_iter.
MneResult mne_fixed_point(const GameObjective& game, const GameConfig& cfg, double tol,
                          std::size_t max_iter = 100000);

// (W1(Psi[nu, mu], nu), W1(Phi[nu, mu], mu)).
std::pair<double, double> mne_residuals(const GameObjective& game, const GameConfig& cfg,
                                        const GridDensity& nu, const GridDensity& mu);

// F(nu, mu) + sigma_nu KL(nu | xi) - sigma_mu KL(mu | rho).
double regularized_game_value(const GameObjective& game, const GameConfig& cfg,
                              const GridDensity& nu, const GridDensity& mu);

struct Exploitability {
  double nu_gain = 0.0;  // decrease available to the min player
  double mu_gain = 0.0;  // increase available to the max player
  double total = 0.0;
};

// Each player's best response to the frozen opponent is computed by the
// single-agent fixed-point solver; gains are measured in the regularized value.
Exploitability exploitability(const GameObjective& game, const GameConfig& cfg,
                              const GridDensity& nu, const GridDensity& mu, double tol,
                              std::size_t max_iter = 100000);

// Static zero-sum game F = sum_{a,b} c(a,b) pi_nu(a) pi_mu(b)
//   + tau_a KL-type term of pi_nu - tau_b KL-type term of pi_mu.
class TwoPlayerBandit final : public GameObjective {
 public:
  TwoPlayerBandit(std::vector<double> costs, std::vector<double> eta_a, std::vector<double> eta_b,
                  FeatureMap features_a, FeatureMap features_b, double tau_a = 0.0,
                  double tau_b = 0.0);

  std::size_t actions_a() const { return eta_a_.size(); }
  std::size_t actions_b() const { return eta_b_.size(); }
  std::size_t dim_nu() const override { return features_a_.dim(); }
  std::size_t dim_mu() const override { return features_b_.dim(); }
  double value(const MeasureView& nu, const MeasureView& mu) const override;
  GameLinearization linearize(const MeasureView& nu, const MeasureView& mu) const override;
  GameConstants constants() const override;

  std::vector<double> policy_a(const MeasureView& nu) const;
  std::vector<double> policy_b(const MeasureView& mu) const;

 private:
  std::vector<double> costs_;  // a * nB + b
  std::vector<double> eta_a_;
  std::vector<double> eta_b_;
  FeatureMap features_a_;
  FeatureMap features_b_;
  double tau_a_;
  double tau_b_;
};

std::unique_ptr<TwoPlayerBandit> two_player_bandit(std::vector<double> costs,
                                                   std::vector<double> eta_a,
                                                   std::vector<double> eta_b,
                                                   FeatureMap features_a, FeatureMap features_b,
                                                   double tau_a = 0.0, double tau_b = 0.0);

struct MarkovGameSpec {
  std::size_t n_states = 0;
  std::size_t n_actions_a = 0;
  std::size_t n_actions_b = 0;
  std::vector<double> transition;  // ((s * nA + a) * nB + b) * nS + s'
  std::vector<double> cost;        // (s * nA + a) * nB + b
  double discount = 0.0;
  double tau_a = 0.0;
  double tau_b = 0.0;
  std::vector<double> eta_a;
  std::vector<double> eta_b;
  std::vector<double> gamma;
  FeatureMap features_a;  // nS * nA entries
  FeatureMap features_b;  // nS * nB entries
  std::size_t dense_threshold = 2000;

  void validate() const;
};

// Each player's flat derivative is the single-agent one of the MDP induced by
// averaging the opponent's current policy into cost and kernel.
class MarkovGameObjective final : public GameObjective {
 public:
  explicit MarkovGameObjective(MarkovGameSpec spec);

  const MarkovGameSpec& spec() const { return spec_; }
  std::size_t dim_nu() const override { return spec_.features_a.dim(); }
  std::size_t dim_mu() const override { return spec_.features_b.dim(); }
  double value(const MeasureView& nu, const MeasureView& mu) const override;
  GameLinearization linearize(const MeasureView& nu, const MeasureView& mu) const override;
  GameConstants constants() const override;

 private:
  MarkovGameSpec spec_;
};

std::unique_ptr<MarkovGameObjective> markov_game_objective(MarkovGameSpec spec);

// F(nu, mu) = double integral of k(x, y) nu(dx) mu(dy).
class KernelGame final : public GameObjective {
 public:
  using Kernel = std::function<double(std::span<const double>, std::span<const double>)>;
  // Gradient of k in its first (x) or second (y) argument.
  using KernelGrad =
      std::function<void(std::span<const double>, std::span<const double>, std::span<double>)>;

  KernelGame(std::size_t dim_x, std::size_t dim_y, Kernel k, KernelGrad grad_x, KernelGrad grad_y,
             GameConstants constants);

  std::size_t dim_nu() const override { return dim_x_; }
  std::size_t dim_mu() const override { return dim_y_; }
  double value(const MeasureView& nu, const MeasureView& mu) const override;
  GameLinearization linearize(const MeasureView& nu, const MeasureView& mu) const override;
  GameConstants constants() const override { return constants_; }

 private:
  std::size_t dim_x_;
  std::size_t dim_y_;
  std::shared_ptr<const Kernel> k_;
  std::shared_ptr<const KernelGrad> grad_x_;
  std::shared_ptr<const KernelGrad> grad_y_;
  GameConstants constants_;
};

}  // namespace brflow

#endif  // BRFLOW_GAME_HPP_
