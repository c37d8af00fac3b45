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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. `--only 1,3` restricts the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "brflow/best_response.hpp"
#include "brflow/error.hpp"
#include "brflow/flow.hpp"
#include "brflow/game.hpp"
#include "brflow/mdp.hpp"
#include "brflow/measures.hpp"
#include "brflow/objectives.hpp"
#include "test_support.hpp"

namespace brflow {
namespace {

using testing::random_density;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Two-action bandit c = (0, 1), tau = 0.1, tanh features (1, -1) on the
// standard Gaussian reference, run at 1.1 times the contraction threshold.
struct Bandit {
  ReferenceMeasure ref = ReferenceMeasure::gaussian(1.0);
  BanditObjective obj{testing::two_action_bandit()};
  double sigma = 0.0;
  ContractionReport report;

  explicit Bandit(double alpha = 1.0) {
    auto k = obj.constants();
    sigma = 1.1 * sigma_threshold(k.c_f, k.l_f, ref.first_moment());
    report = contraction_report(k.c_f, k.l_f, sigma, ref.first_moment(), alpha);
  }
};

Outcome contraction() {
  const auto t0 = std::chrono::steady_clock::now();
  Bandit b;
  std::mt19937_64 rng(101);
  int violations = 0;
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    auto p = random_density(b.ref.grid(), rng);
    auto q = random_density(b.ref.grid(), rng);
    const double before = w1_grid(p, q);
    const double after = w1_grid(br_grid(b.obj, b.ref, b.sigma, p), br_grid(b.obj, b.ref, b.sigma, q));
    if (after > b.report.l_psi * before) ++violations;
    worst = std::max(worst, after / before);
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 10.0,
          fmt("L_psi=%.4f, worst ratio=%.3g, violations=%d/20, %.2fs", b.report.l_psi, worst,
              violations, secs)};
}

Outcome exponential_rate() {
  const auto t0 = std::chrono::steady_clock::now();
  Bandit b;
  auto star = picard_fixed_point(b.obj, b.ref, b.sigma, 1e-13).density;
  FlowConfig cfg;
  cfg.sigma = b.sigma;
  cfg.alpha = 1.0;
  cfg.h_out = 0.02;
  cfg.steps = 500;
  auto trace = euler_flow_grid(b.obj, b.ref, cfg, gaussian_density(b.ref.grid(), 3.0, 0.5), &star);
  const double theory = cfg.alpha * (1.0 - b.report.l_psi);
  int violations = 0;
  for (std::size_t i = 0; i < trace.w1.size(); ++i) {
    if (trace.w1[i] > std::exp(-theory * trace.times[i]) * trace.w1[0] * 1.05) ++violations;
  }
  const double fitted = fit_exponential_rate(trace.times, trace.w1);
  const double secs = seconds_since(t0);
  return {violations == 0 && fitted >= 0.9 * theory && trace.w1.size() == 501 && secs < 30.0,
          fmt("envelope violations=%d/%zu, fitted rate=%.4f, alpha(1-L_psi)=%.4f, %.2fs", violations,
              trace.w1.size(), fitted, theory, secs)};
}

Outcome fixed_point() {
  Bandit b;
  auto r = picard_fixed_point(b.obj, b.ref, b.sigma, 1e-11);
  const double residual = w1_grid(br_grid(b.obj, b.ref, b.sigma, r.density), r.density);
  auto ratio = density_ratio(r.density, b.ref);
  const double bound = std::exp(2.0 * b.obj.constants().c_f / b.sigma);
  const bool sandwich = ratio.min >= 1.0 / bound && ratio.max <= bound;
  return {residual < 1e-10 && sandwich,
          fmt("residual=%.3g after %zu iterations, density ratio in [%.6f, %.6f] within [%.6f, %.6f]",
              residual, r.iterations, ratio.min, ratio.max, 1.0 / bound, bound)};
}

Outcome sigma_stability() {
  Bandit b;
  std::vector<double> sigmas;
  for (double f : {1.0, 1.2, 1.5, 2.0, 3.0}) sigmas.push_back(f * b.sigma);
  auto rows = sigma_stability_experiment(b.obj, b.ref, sigmas, 1e-13);
  int violations = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    if (!(r.measured <= r.bound)) ++violations;
    worst = std::max(worst, r.measured / r.bound);
  }
  return {violations == 0 && rows.size() == 20,
          fmt("%zu ordered pairs, violations=%d, worst measured/bound=%.3g", rows.size(), violations,
              worst)};
}

// Second-order one-sided difference of eps -> value(mix(nu, nu2, eps)) at 0.
double directional_fd2(const FlatObjective& obj, const GridDensity& nu, const GridDensity& nu2,
                       double eps) {
  return (-3.0 * obj.value(nu) + 4.0 * obj.value(mix(nu, nu2, eps)) - obj.value(mix(nu, nu2, 2 * eps))) /
         (2.0 * eps);
}

struct FidelityStats {
  double value_rel = 0.0;
  double grad_rel = 0.0;
};

void fidelity_case(const FlatObjective& obj, const GridDensity& nu, const GridDensity& nu2,
                   double theta, FidelityStats& s) {
  auto lin = obj.linearize(nu);
  const double an = testing::delta_pairing([&](auto x) { return lin->delta(x); }, nu, nu2);
  const double fd = directional_fd2(obj, nu, nu2, 1e-5);
  s.value_rel = std::max(s.value_rel, std::abs(fd - an) / std::max(std::abs(an), 1e-6));
  const double h = 1e-5;
  const double up = theta + h, down = theta - h;
  std::vector<double> grad(1, 0.0);
  lin->grad_delta(std::span<const double>(&theta, 1), grad);
  const double gfd = (lin->delta(std::span<const double>(&up, 1)) -
                      lin->delta(std::span<const double>(&down, 1))) / (2 * h);
  s.grad_rel = std::max(s.grad_rel, std::abs(grad[0] - gfd) / std::max(std::abs(grad[0]), 1e-3));
}

Outcome flat_derivative_fidelity() {
  std::mt19937_64 rng(505);
  std::normal_distribution<double> theta(0.0, 2.0);
  const Grid g = Grid::standard();
  FidelityStats bandit, mdp;
  for (int t = 0; t < 50; ++t) {
    BanditObjective obj(testing::random_bandit(rng, 2 + t % 3));
    auto nu = random_density(g, rng);
    auto nu2 = random_density(g, rng);
    fidelity_case(obj, nu, nu2, theta(rng), bandit);
  }
  for (int t = 0; t < 50; ++t) {
    MdpObjective obj(make_random_mdp(3, 2, 5000 + std::uint64_t(t), {.discount = 0.5, .tau = 0.1}));
    auto nu = random_density(g, rng);
    auto nu2 = random_density(g, rng);
    fidelity_case(obj, nu, nu2, theta(rng), mdp);
  }
  const bool pass = bandit.value_rel < 1e-3 && mdp.value_rel < 1e-3 && bandit.grad_rel < 1e-5 &&
                    mdp.grad_rel < 1e-5;
  return {pass, fmt("max relative error: bandit FD=%.2g grad=%.2g, 3x2 MDP FD=%.2g grad=%.2g",
                    bandit.value_rel, bandit.grad_rel, mdp.value_rel, mdp.grad_rel)};
}

Outcome constants() {
  // delta = 0.5, |c| = 1, tau = 0.1, |f|_0 = |f|_1 = 1, uniform eta.
  MDPSpec spec{2,
               2,
               {1, 0, 0, 1, 0, 1, 1, 0},
               {1.0, -0.5, 0.25, 0.0},
               0.5,
               0.1,
               {0.5, 0.5},
               {0.5, 0.5},
               FeatureMap(Activation::kTanh, 1, {1.0, -1.0, 0.5, 0.0}),
               2000,
               {},
               {}};
  auto k = mdp_constants(spec);
  const bool exact = std::abs(k.c_f - 9.6) < 1e-12 && std::abs(k.l_f - 48.4) < 1e-12;
  std::mt19937_64 rng(606);
  std::normal_distribution<double> theta(0.0, 3.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    auto nu = random_density(Grid::standard(), rng);
    const double th = theta(rng);
    worst = std::max(worst, std::abs(mdp_flat_derivative(spec, nu, std::span<const double>(&th, 1))));
  }
  return {exact && worst <= k.c_f,
          fmt("C_F=%.15g, L_F=%.15g, max |dF/dnu| over 1000 draws=%.4f", k.c_f, k.l_f, worst)};
}

Outcome particle_agreement() {
  Bandit b;
  auto star = picard_fixed_point(b.obj, b.ref, b.sigma, 1e-13).density;
  FlowConfig cfg;
  cfg.sigma = b.sigma;
  cfg.alpha = 1.0;
  cfg.h_out = 0.05;
  cfg.steps = 200;
  cfg.particles = 10000;
  cfg.inner.h_in = 1e-3;
  cfg.inner.steps = 10000;
  cfg.inner.seed = 2026;
  cfg.trace_stride = 20;
  cfg.snapshot_stride = 0;
  auto ens0 = sample_density(gaussian_density(b.ref.grid(), 3.0, 0.5), cfg.particles, 707);
  const double initial = w1_particles_grid(ens0, star);

  const auto t0 = std::chrono::steady_clock::now();
  auto first = particle_flow(b.obj, b.ref, cfg, ens0, &star);
  const double secs = seconds_since(t0);
  const double terminal = first.w1.back();

  // Re-run with a different thread count; the result must be bit-identical.
  cfg.inner.threads = std::max(2u, std::thread::hardware_concurrency()) + 1;
  auto second = particle_flow(b.obj, b.ref, cfg, ens0, &star);
  const auto& pa = first.final_ensemble->positions();
  const auto& pb = second.final_ensemble->positions();
  const bool same = std::equal(pa.begin(), pa.end(), pb.begin(), pb.end());
  return {terminal < 0.05 && same && secs < 300.0,
          fmt("W1 to grid fixed point %.4f -> %.4f, rerun identical=%s, %.1fs per run", initial, terminal,
              same ? "yes" : "no", secs)};
}

Outcome min_max() {
  // Skewed two-action game with tanh features; sigmas at 1.1 times the thresholds.
  auto game = two_player_bandit({0.5, -1.0, -0.3, 1.0}, {0.3, 0.7}, {0.6, 0.4},
                                FeatureMap(Activation::kTanh, 1, {1.0, -0.5}),
                                FeatureMap(Activation::kTanh, 1, {0.8, -1.0}), 0.2, 0.1);
  auto config_for = [&](double alpha_nu, double alpha_mu) {
    GameConfig cfg{1.0, 1.0, alpha_nu, alpha_mu, ReferenceMeasure::gaussian(1.0),
                   ReferenceMeasure::gaussian(1.0)};
    auto r = game_contraction_report(game->constants(), cfg);
    cfg.sigma_nu = 1.1 * r.sigma_nu_threshold_adjusted;
    cfg.sigma_mu = 1.1 * r.sigma_mu_threshold_adjusted;
    return cfg;
  };
  const Grid& g = Grid::standard();

  auto cfg = config_for(1.0, 1.0);
  auto report = game_contraction_report(game->constants(), cfg);
  std::mt19937_64 rng(808);
  int violations = 0;
  for (int t = 0; t < 20; ++t) {
    GridPair a{random_density(g, rng), random_density(g, rng)};
    GridPair c{random_density(g, rng), random_density(g, rng)};
    const double after = joint_w1(br_pair_grid(*game, cfg, a.nu, a.mu), br_pair_grid(*game, cfg, c.nu, c.mu));
    if (after > report.l_sum * joint_w1(a, c)) ++violations;
  }

  // Envelope exp(-rate t) W(0) with 5% slack, for a given config.
  auto envelope_violations = [&](const GameConfig& c, const GridPair& star) {
    auto r = game_contraction_report(game->constants(), c);
    auto trace = coupled_flow_grid(*game, c, gaussian_density(g, 3.0, 0.5), gaussian_density(g, -2.0, 0.7),
                                   0.05, 200, &star);
    int bad = 0;
    for (std::size_t i = 0; i < trace.joint_w1.size(); ++i) {
      if (trace.joint_w1[i] > std::exp(-r.rate * trace.nu.times[i]) * trace.joint_w1[0] * 1.05) ++bad;
    }
    return bad;
  };

  const double tol = 1e-10;
  auto mne = mne_fixed_point(*game, cfg, tol);
  const int env = envelope_violations(cfg, mne.state);
  auto ex = exploitability(*game, cfg, mne.state.nu, mne.state.mu, 1e-13);

  auto skew = config_for(2.0, 1.0);
  auto skew_report = game_contraction_report(game->constants(), skew);
  const bool enforced = skew_report.adjusted_thresholds_hold &&
                        skew_report.sigma_nu_threshold_adjusted > skew_report.sigma_nu_threshold &&
                        skew_report.rate > 0.0;
  const int skew_env = envelope_violations(skew, mne_fixed_point(*game, skew, 1e-13).state);

  const bool pass = report.l_sum < 1.0 && violations == 0 && env == 0 && ex.total < 10 * tol &&
                    enforced && skew_env == 0;
  return {pass, fmt("L_psi+L_phi=%.4f, pair violations=%d/20, envelope violations=%d, exploitability=%.2g, "
                    "alpha=(2,1): adjusted sigma_nu threshold %.1f > %.1f, envelope violations=%d",
                    report.l_sum, violations, env, ex.total, skew_report.sigma_nu_threshold_adjusted,
                    skew_report.sigma_nu_threshold, skew_env)};
}

Outcome mdp_consistency() {
  double route = 0.0, identity = 0.0, optimal = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto spec = make_random_mdp(3 + seed % 4, 2 + seed % 3, 9000 + seed,
                                {.discount = 0.3 + 0.03 * double(seed), .tau = 0.2});
    std::mt19937_64 rng(seed);
    auto pi = policy_from_params(spec, random_density(Grid::standard(), rng));
    route = std::max(route, std::abs(policy_value(spec, pi) - occupancy_route_value(spec, pi)));
    identity = std::max(identity, occupancy_identity_residual(spec, pi, occupancy(spec, pi)));
    optimal = std::max(optimal, optimal_policy_residual(spec, soft_value_iteration(spec).policy));
  }
  return {route < 1e-10 && identity < 1e-12 && optimal < 1e-8,
          fmt("20 MDPs: max route gap=%.2g, occupancy residual=%.2g, soft-VI policy residual=%.2g", route,
              identity, optimal)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace brflow

int main(int argc, char** argv) {
  using namespace brflow;
  CLI::App app{"brflow acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Criterion numbers to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {"contraction", contraction},
      {"exponential-rate", exponential_rate},
      {"fixed-point", fixed_point},
      {"sigma-stability", sigma_stability},
      {"flat-derivative-fidelity", flat_derivative_fidelity},
      {"constants", constants},
      {"particle-grid-agreement", particle_agreement},
      {"min-max", min_max},
      {"mdp-consistency", mdp_consistency},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    Outcome out;
    try {
      out = criteria[i].run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++failures;
    std::printf("%s %d %s: %s\n", out.pass ? "PASS" : "FAIL", id, criteria[i].name, out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
