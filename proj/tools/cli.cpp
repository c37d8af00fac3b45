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


#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <utility>
#include <vector>

#include "brflow/best_response.hpp"
#include "brflow/flow.hpp"
#include "brflow/game.hpp"
#include "brflow/mdp.hpp"
#include "brflow/measures.hpp"
#include "brflow/objectives.hpp"
#include "brflow/random.hpp"

namespace brflow::cli {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  fail(ErrorCode::kValidation, path + " " + what);
}

std::string join(const std::string& path, const std::string& key) { return path + "." + key; }

// The object at cfg[key], or an empty object when absent.
Json section(const Json& cfg, const std::string& key) {
  if (!cfg.contains(key)) return Json::object();
  if (!cfg[key].is_object()) invalid(key, "must be an object");
  return cfg[key];
}

double number_or(const Json& j, const std::string& key, double fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) invalid(join(path, key), "must be a number");
  return j[key].get<double>();
}

std::optional<double> optional_number(const Json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) return std::nullopt;
  return number_or(j, key, 0.0, path);
}

std::uint64_t unsigned_or(const Json& j, const std::string& key, std::uint64_t fallback,
                          const std::string& path) {
  if (!j.contains(key)) return fallback;
  const Json& v = j[key];
  if (!v.is_number_integer() || v.get<long long>() < 0) invalid(join(path, key), "must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string string_or(const Json& j, const std::string& key, const std::string& fallback,
                      const std::string& path) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) invalid(join(path, key), "must be a string");
  return j[key].get<std::string>();
}

// Re-raises a library configuration error with the config section prepended.
template <class Fn>
void check_at(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    fail(e.code(), path + ": " + e.detail());
  }
}

struct Problem {
  std::string type;
  std::unique_ptr<FlatObjective> objective;
  std::optional<MDPSpec> mdp;
  std::unique_ptr<GameObjective> game;
  Json echo;
};

Problem parse_problem(const Json& cfg) {
  if (!cfg.contains("problem")) invalid("problem", "is required");
  const Json& j = cfg["problem"];
  if (!j.is_object()) invalid("problem", "must be an object");
  Problem p;
  p.type = string_or(j, "type", "", "problem");
  if (p.type == "bandit") {
    BanditSpec spec = bandit_spec_from_json(j, "problem");
    p.echo = to_json(spec);
    p.objective = std::make_unique<BanditObjective>(std::move(spec));
  } else if (p.type == "mdp" || p.type == "random-mdp") {
    auto generate = [&] {
      RandomMdpOptions opts;
      opts.discount = number_or(j, "delta", opts.discount, "problem");
      opts.tau = number_or(j, "tau", opts.tau, "problem");
      if (!(opts.tau >= 0.0)) invalid("problem.tau", "must be >= 0");
      opts.dim = unsigned_or(j, "dim", 1, "problem");
      opts.embedding_scale = number_or(j, "embedding_scale", 1.0, "problem");
      check_at("problem.activation",
               [&] { opts.activation = parse_activation(string_or(j, "activation", "tanh", "problem")); });
      const std::size_t ns = unsigned_or(j, "nS", 3, "problem");
      const std::size_t na = unsigned_or(j, "nA", 2, "problem");
      if (ns == 0 || na == 0 || opts.dim == 0) invalid("problem", "nS, nA and dim must be positive");
      const std::uint64_t seed = unsigned_or(j, "seed", 0, "problem");
      std::optional<MDPSpec> out;
      check_at("problem", [&] { out = make_random_mdp(ns, na, seed, opts); });
      return std::move(*out);
    };
    MDPSpec spec = p.type == "mdp" ? mdp_spec_from_json(j, "problem") : generate();
    p.echo = to_json(spec);
    p.objective = std::make_unique<MdpObjective>(spec);
    p.mdp = std::move(spec);
  } else if (p.type == "zero") {
    const std::size_t dim = unsigned_or(j, "dim", 1, "problem");
    if (dim == 0) invalid("problem.dim", "must be positive");
    p.echo = {{"dim", dim}};
    p.objective = zero_objective(dim);
  } else if (p.type == "markov-game") {
    MarkovGameSpec spec = markov_game_spec_from_json(j, "problem");
    p.echo = to_json(spec);
    p.game = std::make_unique<MarkovGameObjective>(std::move(spec));
  } else {
    invalid("problem.type", "must be one of bandit, mdp, random-mdp, zero, markov-game (got \"" + p.type + "\")");
  }
  p.echo["type"] = p.type;
  return p;
}

Json reference_echo(const Json& input, const ReferenceMeasure& ref) {
  Json e = input;
  e["name"] = ref.name();
  e["scale"] = number_or(input, "scale", 1.0, "reference");
  e["dim"] = ref.dim();
  if (ref.has_grid()) e["grid"] = to_json(ref.grid());
  e["m1"] = ref.first_moment();
  return e;
}

struct Initial {
  std::string name = "reference";
  double mean = 0.0;
  double scale = 1.0;
  Json echo;
};

Initial parse_initial(const Json& sec, const std::string& key, const std::string& path) {
  Initial init;
  if (sec.contains(key)) {
    const Json& j = sec[key];
    const std::string p = join(path, key);
    if (!j.is_object()) invalid(p, "must be an object");
    init.name = string_or(j, "name", "reference", p);
    if (init.name == "gaussian") {
      init.mean = number_or(j, "mean", 0.0, p);
      init.scale = number_or(j, "scale", 1.0, p);
      if (!(init.scale > 0.0)) invalid(join(p, "scale"), "must be positive");
    } else if (init.name != "reference") {
      invalid(join(p, "name"), "must be reference or gaussian (got \"" + init.name + "\")");
    }
  }
  init.echo = {{"name", init.name}};
  if (init.name == "gaussian") init.echo.update({{"mean", init.mean}, {"scale", init.scale}});
  return init;
}

GridDensity initial_density(const Initial& init, const ReferenceMeasure& ref) {
  if (init.name == "gaussian") return gaussian_density(ref.grid(), init.mean, init.scale);
  return ref.density();
}

struct FlowSection {
  FlowConfig cfg;
  std::optional<double> sigma;
  bool to_fixed_point = true;
  Initial init;
};

struct GameSection {
  explicit GameSection(GameConfig c) : cfg(std::move(c)) {}

  GameConfig cfg;
  double h = 0.1;
  std::size_t steps = 100;
  double tol = 1e-10;
  std::size_t max_iter = 100000;
  std::size_t snapshot_stride = 0;
  Initial init_nu;
  Initial init_mu;
};

struct Context {
  std::string mode;
  std::uint64_t seed = 0;
  fs::path out_dir;
  Problem problem;
  ReferenceMeasure ref = ReferenceMeasure::gaussian(1.0);
  std::optional<FlowSection> flow;
  std::optional<GameSection> game;
  Json stability;
  Json resolved;
};

FlowSection parse_flow(const Json& cfg, const Context& ctx) {
  const Json j = section(cfg, "flow");
  FlowSection f;
  FlowConfig& c = f.cfg;
  c.alpha = number_or(j, "alpha", c.alpha, "flow");
  c.h_out = number_or(j, "h_out", c.h_out, "flow");
  c.steps = unsigned_or(j, "steps", c.steps, "flow");
  c.tol = number_or(j, "tol", c.tol, "flow");
  c.max_iter = unsigned_or(j, "max_iter", c.max_iter, "flow");
  c.trace_stride = unsigned_or(j, "trace_stride", c.trace_stride, "flow");
  c.snapshot_stride = unsigned_or(j, "snapshot_stride", 0, "flow");
  c.particles = unsigned_or(j, "particles", c.particles, "flow");
  c.inner.h_in = number_or(j, "h_in", c.inner.h_in, "flow");
  c.inner.steps = unsigned_or(j, "inner_steps", c.inner.steps, "flow");
  c.inner.seed = ctx.seed;

  f.sigma = optional_number(j, "sigma", "flow");
  if (auto factor = optional_number(j, "sigma_factor", "flow")) {
    if (f.sigma) invalid("flow.sigma_factor", "cannot be combined with flow.sigma");
    if (!(*factor > 0.0)) invalid("flow.sigma_factor", "must be positive");
    const auto k = ctx.problem.objective->constants();
    f.sigma = *factor * sigma_threshold(k.c_f, k.l_f, ctx.ref.first_moment());
  }
  c.sigma = f.sigma.value_or(1.0);

  const std::string target = string_or(j, "target", "fixed-point", "flow");
  if (target != "fixed-point" && target != "none") invalid("flow.target", "must be fixed-point or none");
  f.to_fixed_point = target == "fixed-point";
  f.init = parse_initial(j, "init", "flow");
  if (f.sigma) check_at("flow", [&] { c.validate(); });
  return f;
}

GameSection parse_game(const Json& cfg, const Context& ctx) {
  const Json j = section(cfg, "game");
  ReferenceMeasure rho = ctx.ref;
  if (cfg.contains("reference_mu")) rho = reference_from_json(cfg["reference_mu"], "reference_mu");
  GameSection g(GameConfig{1.0, 1.0, 1.0, 1.0, ctx.ref, rho});
  GameConfig& c = g.cfg;
  c.alpha_nu = number_or(j, "alpha_nu", 1.0, "game");
  c.alpha_mu = number_or(j, "alpha_mu", 1.0, "game");
  auto factor = optional_number(j, "sigma_factor", "game");
  if (factor) {
    if (j.contains("sigma_nu") || j.contains("sigma_mu")) {
      invalid("game.sigma_factor", "cannot be combined with game.sigma_nu or game.sigma_mu");
    }
    if (!(*factor > 0.0)) invalid("game.sigma_factor", "must be positive");
    check_at("game", [&] {
      auto r = game_contraction_report(ctx.problem.game->constants(), c);
      c.sigma_nu = *factor * r.sigma_nu_threshold_adjusted;
      c.sigma_mu = *factor * r.sigma_mu_threshold_adjusted;
    });
  } else {
    if (!j.contains("sigma_nu")) invalid("game.sigma_nu", "is required (or game.sigma_factor)");
    if (!j.contains("sigma_mu")) invalid("game.sigma_mu", "is required (or game.sigma_factor)");
    c.sigma_nu = number_or(j, "sigma_nu", 1.0, "game");
    c.sigma_mu = number_or(j, "sigma_mu", 1.0, "game");
  }
  g.h = number_or(j, "h", g.h, "game");
  g.steps = unsigned_or(j, "steps", g.steps, "game");
  g.tol = number_or(j, "tol", g.tol, "game");
  g.max_iter = unsigned_or(j, "max_iter", g.max_iter, "game");
  g.snapshot_stride = unsigned_or(j, "snapshot_stride", 0, "game");
  g.init_nu = parse_initial(j, "init_nu", "game");
  g.init_mu = parse_initial(j, "init_mu", "game");
  check_at("game", [&] { c.validate(); });
  if (!(g.h > 0.0)) invalid("game.h", "must be positive");
  if (!(g.tol > 0.0)) invalid("game.tol", "must be positive");
  if (std::max(c.alpha_nu, c.alpha_mu) * g.h > 1.0) {
    fail(ErrorCode::kConfigViolation, "game: max(alpha_nu, alpha_mu) * h must be <= 1");
  }
  return g;
}

bool known_mode(std::string_view m) {
  return std::find(std::begin(kModes), std::end(kModes), m) != std::end(kModes);
}

Context load(std::string_view mode, const RunOptions& opts) {
  const Json cfg = read_json(opts.config);
  if (!cfg.is_object()) invalid("config", "must be a JSON object");
  Context ctx;
  const std::string declared = string_or(cfg, "mode", "", "config");
  if (mode == "run") {
    if (declared.empty()) invalid("mode", "is required when using the run subcommand");
    ctx.mode = declared;
  } else {
    if (!declared.empty() && declared != mode) {
      invalid("mode", "is \"" + declared + "\" but the subcommand is \"" + std::string(mode) + "\"");
    }
    ctx.mode = mode;
  }
  if (!known_mode(ctx.mode)) invalid("mode", "is not a known mode (got \"" + ctx.mode + "\")");

  ctx.seed = opts.seed.value_or(unsigned_or(cfg, "seed", 0, "config"));
  ctx.out_dir = opts.out.value_or(fs::path(string_or(cfg, "output_dir", "brflow_out", "config")));
  ctx.problem = parse_problem(cfg);
  const Json ref_json = cfg.value("reference", Json{{"name", "gaussian"}});
  ctx.ref = reference_from_json(ref_json, "reference");

  const bool is_game = ctx.problem.game != nullptr;
  if (ctx.mode == "game" && !is_game) invalid("problem.type", "must be markov-game for the game mode");
  if (ctx.mode != "game" && ctx.mode != "check-sigma" && is_game) {
    invalid("problem.type", "markov-game is only supported by the game and check-sigma modes");
  }
  if (ctx.mode == "mdp" && !ctx.problem.mdp) invalid("problem.type", "must be mdp or random-mdp for the mdp mode");
  if (!is_game && ctx.problem.objective->dim() != ctx.ref.dim()) {
    invalid("reference.dim", "must equal the parameter dimension of the problem (" +
                                 std::to_string(ctx.problem.objective->dim()) + ")");
  }
  const bool grid_mode = ctx.mode == "solve-grid" || ctx.mode == "mdp" || ctx.mode == "stability-sweep" ||
                         ctx.mode == "game";
  if (grid_mode && !ctx.ref.has_grid()) invalid("reference.dim", "must be 1 for grid solvers");

  ctx.resolved = {{"mode", ctx.mode},
                  {"seed", ctx.seed},
                  {"output_dir", ctx.out_dir.string()},
                  {"problem", ctx.problem.echo},
                  {"reference", reference_echo(ref_json, ctx.ref)}};
  if (is_game) {
    if (ctx.mode == "game" || cfg.contains("game")) {
      ctx.game = parse_game(cfg, ctx);
      const GameSection& g = *ctx.game;
      ctx.resolved["reference_mu"] = reference_echo(cfg.value("reference_mu", ref_json), g.cfg.rho);
      ctx.resolved["game"] = {{"sigma_nu", g.cfg.sigma_nu}, {"sigma_mu", g.cfg.sigma_mu},
                              {"alpha_nu", g.cfg.alpha_nu}, {"alpha_mu", g.cfg.alpha_mu},
                              {"h", g.h},                   {"steps", g.steps},
                              {"tol", g.tol},               {"max_iter", g.max_iter},
                              {"snapshot_stride", g.snapshot_stride},
                              {"init_nu", g.init_nu.echo},  {"init_mu", g.init_mu.echo}};
    }
    return ctx;
  }

  ctx.flow = parse_flow(cfg, ctx);
  const FlowSection& f = *ctx.flow;
  const bool needs_sigma = ctx.mode != "check-sigma" && ctx.mode != "stability-sweep";
  if (needs_sigma && !f.sigma) invalid("flow.sigma", "is required (or flow.sigma_factor)");
  Json flow_echo = to_json(f.cfg);
  if (!f.sigma) flow_echo.erase("sigma");
  flow_echo["target"] = f.to_fixed_point ? "fixed-point" : "none";
  flow_echo["init"] = f.init.echo;
  ctx.resolved["flow"] = flow_echo;

  if (ctx.mode == "stability-sweep") {
    const Json s = section(cfg, "stability");
    const auto k = ctx.problem.objective->constants();
    const double sigma_min = sigma_threshold(k.c_f, k.l_f, ctx.ref.first_moment());
    std::vector<double> sigmas;
    auto read_list = [&](const std::string& key, double scale) {
      const Json& a = s[key];
      if (!a.is_array() || a.size() < 2) invalid("stability." + key, "must be an array of at least two numbers");
      for (std::size_t i = 0; i < a.size(); ++i) {
        const std::string p = "stability." + key + "[" + std::to_string(i) + "]";
        if (!a[i].is_number()) invalid(p, "must be a number");
        const double v = a[i].get<double>() * scale;
        if (!(v > 0.0)) invalid(p, "must be positive");
        sigmas.push_back(v);
      }
    };
    if (s.contains("sigmas")) {
      read_list("sigmas", 1.0);
    } else if (s.contains("sigma_factors")) {
      read_list("sigma_factors", sigma_min);
    } else {
      invalid("stability.sigmas", "is required (or stability.sigma_factors)");
    }
    ctx.stability = {{"sigmas", sigmas}, {"tol", number_or(s, "tol", 1e-12, "stability")}};
    ctx.resolved["stability"] = ctx.stability;
  }
  return ctx;
}

// Shared outputs of a run.
struct Writer {
  const Context& ctx;
  Json report;
  std::vector<std::string> summary;

  explicit Writer(const Context& c) : ctx(c), report{{"mode", c.mode}, {"config", c.resolved}} {}

  fs::path path(const std::string& name) const { return ctx.out_dir / name; }

  void density(const std::string& name, const GridDensity& p) const { write_density_csv(path(name), p); }

  void snapshots(const FlowTrace& t, const std::string& prefix) const {
    char buf[64];
    for (const auto& [step, p] : t.density_snapshots) {
      std::snprintf(buf, sizeof buf, "snapshots/%s_step_%06zu.csv", prefix.c_str(), step);
      write_density_csv(path(buf), p);
    }
    for (const auto& [step, e] : t.ensemble_snapshots) {
      std::snprintf(buf, sizeof buf, "snapshots/%s_step_%06zu.csv", prefix.c_str(), step);
      write_ensemble_csv(path(buf), e);
    }
  }

  void line(std::string s) { summary.push_back(std::move(s)); }
};

Json nan_to_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Json trace_summary(const FlowTrace& t) {
  Json j = {{"records", t.w1.size()}, {"w1_to_target", t.w1_to_target}};
  if (!t.w1.empty()) j["terminal_w1"] = t.w1.back();
  if (t.w1_to_target) j["fitted_rate"] = nan_to_null(fit_exponential_rate(t.times, t.w1));
  return j;
}

ContractionReport single_report(const Context& ctx, double sigma) {
  const auto k = ctx.problem.objective->constants();
  return contraction_report(k.c_f, k.l_f, sigma, ctx.ref.first_moment(), ctx.flow->cfg.alpha);
}

void run_check_sigma(const Context& ctx, Writer& w) {
  if (ctx.problem.game) {
    const GameConstants k = ctx.problem.game->constants();
    w.report["game_constants"] = {{"C_F", k.c_nu}, {"L_F", k.l_nu}, {"C_F_bar", k.c_mu}, {"L_F_bar", k.l_mu}};
    if (ctx.game) {
      auto r = game_contraction_report(k, ctx.game->cfg);
      w.report["game_contraction"] = to_json(r);
      w.line(fmt("sigma_nu threshold %.6g, sigma_mu threshold %.6g, L_psi + L_phi = %.6g (%s)",
                 r.sigma_nu_threshold_adjusted, r.sigma_mu_threshold_adjusted, r.l_sum,
                 r.contractive ? "contractive" : "not contractive"));
    }
    return;
  }
  const auto k = ctx.problem.objective->constants();
  const double m1 = ctx.ref.first_moment();
  const double sigma_min = sigma_threshold(k.c_f, k.l_f, m1);
  w.report["constants"] = to_json(k);
  w.report["m1"] = m1;
  w.report["sigma_min"] = sigma_min;
  w.line(fmt("C_F = %.6g, L_F = %.6g, m1 = %.6g, sigma_min = %.6g", k.c_f, k.l_f, m1, sigma_min));
  if (ctx.flow->sigma) {
    auto r = single_report(ctx, *ctx.flow->sigma);
    w.report["contraction"] = to_json(r);
    w.line(fmt("sigma = %.6g: L_psi = %.6g (%s)", r.sigma, r.l_psi,
               r.contractive ? "contractive" : "not contractive"));
  }
}

std::optional<FixedPointResult> grid_fixed_point(const Context& ctx, Writer& w) {
  const FlowSection& f = *ctx.flow;
  if (!f.to_fixed_point) return std::nullopt;
  auto fp = picard_fixed_point(*ctx.problem.objective, ctx.ref, f.cfg.sigma, f.cfg.tol, f.cfg.max_iter);
  w.density("fixed_point.csv", fp.density);
  w.report["fixed_point"] = {{"iterations", fp.iterations}, {"residual", fp.residual}, {"warnings", fp.warnings}};
  w.line(fmt("fixed point: %zu Picard iterations, residual %.3g", fp.iterations, fp.residual));
  return fp;
}

// Returns the fixed point when one was computed, else the terminal density.
GridDensity run_solve_grid(const Context& ctx, Writer& w) {
  const FlowSection& f = *ctx.flow;
  w.report["contraction"] = to_json(single_report(ctx, f.cfg.sigma));
  auto fp = grid_fixed_point(ctx, w);
  auto trace = euler_flow_grid(*ctx.problem.objective, ctx.ref, f.cfg, initial_density(f.init, ctx.ref),
                               fp ? &fp->density : nullptr);
  write_trace_csv(w.path("trace.csv"), trace);
  w.density("final_density.csv", *trace.final_density);
  w.snapshots(trace, "density");
  w.report["trace"] = trace_summary(trace);
  w.report["terminal_w1_to_reference"] = w1_grid(*trace.final_density, ctx.ref.density());
  w.line(fmt("%zu Euler steps, terminal W1 %.3g", f.cfg.steps, trace.w1.empty() ? 0.0 : trace.w1.back()));
  return fp ? fp->density : *trace.final_density;
}

void run_solve_particle(const Context& ctx, Writer& w) {
  const FlowSection& f = *ctx.flow;
  w.report["contraction"] = to_json(single_report(ctx, f.cfg.sigma));
  std::optional<FixedPointResult> fp;
  if (ctx.ref.has_grid()) fp = grid_fixed_point(ctx, w);
  const std::uint64_t init_seed = derive_seed(ctx.seed, StreamTag::kSampling);
  ParticleEnsemble ens0 = f.init.name == "gaussian"
                              ? sample_density(initial_density(f.init, ctx.ref), f.cfg.particles, init_seed)
                              : sample_reference(ctx.ref, f.cfg.particles, init_seed);
  auto trace = particle_flow(*ctx.problem.objective, ctx.ref, f.cfg, ens0, fp ? &fp->density : nullptr);
  write_trace_csv(w.path("trace.csv"), trace);
  write_ensemble_csv(w.path("final_ensemble.csv"), *trace.final_ensemble);
  w.snapshots(trace, "ensemble");
  w.report["trace"] = trace_summary(trace);
  w.line(fmt("%zu outer steps with %zu particles, terminal W1 %.3g", f.cfg.steps, f.cfg.particles,
             trace.w1.empty() ? 0.0 : trace.w1.back()));
}

Json policy_json(const PolicyTable& pi) {
  Json rows = Json::array();
  for (std::size_t s = 0; s < pi.n_states; ++s) {
    const auto first = pi.pi.begin() + static_cast<std::ptrdiff_t>(s * pi.n_actions);
    rows.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(pi.n_actions)));
  }
  return rows;
}

void run_mdp(const Context& ctx, Writer& w) {
  const GridDensity nu = run_solve_grid(ctx, w);
  const MDPSpec& mdp = *ctx.problem.mdp;
  auto pi = policy_from_params(mdp, nu);
  auto vq = value_q(mdp, pi);
  Json m = {{"policy", policy_json(pi)},
            {"value_bellman", policy_value(mdp, pi)},
            {"value_occupancy", occupancy_route_value(mdp, pi)},
            {"bellman_residual", bellman_residual(mdp, pi, vq)},
            {"occupancy_identity_residual", occupancy_identity_residual(mdp, pi, occupancy(mdp, pi))}};
  if (mdp.tau > 0.0) {
    m["optimal_policy_residual"] = optimal_policy_residual(mdp, pi);
    auto svi = soft_value_iteration(mdp);
    m["soft_value_iteration"] = {{"iterations", svi.iterations},
                                 {"value", policy_value(mdp, svi.policy)},
                                 {"optimal_policy_residual", optimal_policy_residual(mdp, svi.policy)},
                                 {"policy", policy_json(svi.policy)}};
  }
  w.report["mdp"] = m;
  w.line(fmt("policy value %.10g (Bellman) vs %.10g (occupancy)", m["value_bellman"].get<double>(),
             m["value_occupancy"].get<double>()));
}

void run_game(const Context& ctx, Writer& w) {
  const GameSection& g = *ctx.game;
  const GameObjective& game = *ctx.problem.game;
  auto report = game_contraction_report(game.constants(), g.cfg);
  w.report["game_contraction"] = to_json(report);
  auto mne = mne_fixed_point(game, g.cfg, g.tol, g.max_iter);
  w.density("mne_nu.csv", mne.state.nu);
  w.density("mne_mu.csv", mne.state.mu);
  auto trace = coupled_flow_grid(game, g.cfg, initial_density(g.init_nu, g.cfg.xi),
                                 initial_density(g.init_mu, g.cfg.rho), g.h, g.steps, &mne.state,
                                 g.snapshot_stride);
  FlowTrace joint;
  joint.steps = trace.nu.steps;
  joint.times = trace.nu.times;
  joint.w1 = trace.joint_w1;
  joint.kl.assign(joint.w1.size(), std::numeric_limits<double>::quiet_NaN());
  joint.w1_to_target = true;
  write_trace_csv(w.path("trace.csv"), joint);
  write_trace_csv(w.path("trace_nu.csv"), trace.nu);
  write_trace_csv(w.path("trace_mu.csv"), trace.mu);
  w.density("final_nu.csv", trace.final_state.nu);
  w.density("final_mu.csv", trace.final_state.mu);
  w.snapshots(trace.nu, "nu");
  w.snapshots(trace.mu, "mu");
  auto ex = exploitability(game, g.cfg, mne.state.nu, mne.state.mu, std::min(g.tol, 1e-12), g.max_iter);
  auto [rn, rm] = mne_residuals(game, g.cfg, mne.state.nu, mne.state.mu);
  w.report["mne"] = {{"iterations", mne.iterations},
                     {"residual", mne.residual},
                     {"residual_nu", rn},
                     {"residual_mu", rm},
                     {"value", regularized_game_value(game, g.cfg, mne.state.nu, mne.state.mu)},
                     {"warnings", mne.warnings}};
  w.report["exploitability"] = {{"nu_gain", ex.nu_gain}, {"mu_gain", ex.mu_gain}, {"total", ex.total}};
  w.report["trace"] = trace_summary(joint);
  w.line(fmt("MNE after %zu iterations (residual %.3g), exploitability %.3g", mne.iterations, mne.residual,
             ex.total));
  w.line(fmt("coupled flow: joint W1 %.3g -> %.3g over %zu steps", joint.w1.front(), joint.w1.back(), g.steps));
}

void run_stability(const Context& ctx, Writer& w) {
  const auto sigmas = ctx.stability["sigmas"].get<std::vector<double>>();
  auto rows = sigma_stability_experiment(*ctx.problem.objective, ctx.ref, sigmas,
                                         ctx.stability["tol"].get<double>(), ctx.flow->cfg.max_iter);
  std::string csv = "sigma,sigma_prime,measured,bound,l_psi\n";
  Json out = Json::array();
  int violations = 0;
  for (const auto& r : rows) {
    csv += format_double(r.sigma) + "," + format_double(r.sigma_prime) + "," + format_double(r.measured) + "," +
           format_double(r.bound) + "," + format_double(r.l_psi) + "\n";
    out.push_back({{"sigma", r.sigma},
                   {"sigma_prime", r.sigma_prime},
                   {"measured", r.measured},
                   {"bound", nan_to_null(r.bound)},
                   {"l_psi", nan_to_null(r.l_psi)}});
    if (!(r.measured <= r.bound)) ++violations;
  }
  write_text(w.path("stability.csv"), csv);
  w.report["stability"] = out;
  w.report["violations"] = violations;
  w.line(fmt("%zu sigma pairs, %d above the stability bound", rows.size(), violations));
}

struct Terminal {
  std::optional<GridDensity> density;
  std::optional<ParticleEnsemble> ensemble;
  std::optional<GridPair> pair;
};

[[noreturn]] void incompatible(const std::string& what) { fail(ErrorCode::kIncompatibleRuns, what); }

Terminal load_terminal(const fs::path& dir) {
  Terminal t;
  if (fs::exists(dir / "final_nu.csv") && fs::exists(dir / "final_mu.csv")) {
    t.pair = GridPair{read_density_csv(dir / "final_nu.csv"), read_density_csv(dir / "final_mu.csv")};
  } else if (fs::exists(dir / "final_density.csv")) {
    t.density = read_density_csv(dir / "final_density.csv");
  } else if (fs::exists(dir / "final_ensemble.csv")) {
    t.ensemble = read_ensemble_csv(dir / "final_ensemble.csv");
  } else {
    incompatible(dir.string() + " has no terminal state (final_density.csv, final_ensemble.csv or final_nu.csv)");
  }
  return t;
}

double grid_w1(const GridDensity& a, const GridDensity& b) {
  if (!(a.grid() == b.grid())) incompatible("terminal densities live on different grids");
  return w1_grid(a, b);
}

double terminal_w1(const Terminal& a, const Terminal& b) {
  if (bool(a.pair) != bool(b.pair)) incompatible("cannot compare a game run with a single-player run");
  if (a.pair) return grid_w1(a.pair->nu, b.pair->nu) + grid_w1(a.pair->mu, b.pair->mu);
  if (a.density && b.density) return grid_w1(*a.density, *b.density);
  if (a.ensemble && b.ensemble) {
    if (a.ensemble->dim() != b.ensemble->dim()) incompatible("ensembles have different dimensions");
    if (a.ensemble->dim() == 1) return w1_particles_1d(*a.ensemble, *b.ensemble);
    return sliced_w1(*a.ensemble, *b.ensemble, 64, 0);
  }
  const ParticleEnsemble& e = a.ensemble ? *a.ensemble : *b.ensemble;
  const GridDensity& p = a.density ? *a.density : *b.density;
  if (e.dim() != 1) incompatible("a grid density can only be compared with a one-dimensional ensemble");
  return w1_particles_grid(e, p);
}

Json load_report(const fs::path& dir) {
  const fs::path p = dir / "report.json";
  return fs::exists(p) ? read_json(p) : Json::object();
}

std::optional<double> theory_rate(const Json& report) {
  for (const char* key : {"contraction", "game_contraction"}) {
    if (report.contains(key) && report[key].contains("rate") && report[key]["rate"].is_number()) {
      return report[key]["rate"].get<double>();
    }
  }
  return std::nullopt;
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kValidation:
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kConfigViolation:
    case ErrorCode::kNonpositiveSigma:
      return 2;
    case ErrorCode::kNoConvergence:
      return 3;
    case ErrorCode::kIncompatibleRuns:
      return 4;
    default:
      return 1;
  }
}

Json resolve_config(std::string_view mode, const RunOptions& opts) { return load(mode, opts).resolved; }

int run(std::string_view mode, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    const auto t0 = std::chrono::steady_clock::now();
    const Context ctx = load(mode, opts);
    fs::create_directories(ctx.out_dir);
    Writer w(ctx);
    if (ctx.mode == "check-sigma") {
      run_check_sigma(ctx, w);
    } else if (ctx.mode == "solve-grid") {
      run_solve_grid(ctx, w);
    } else if (ctx.mode == "solve-particle") {
      run_solve_particle(ctx, w);
    } else if (ctx.mode == "mdp") {
      run_mdp(ctx, w);
    } else if (ctx.mode == "game") {
      run_game(ctx, w);
    } else {
      run_stability(ctx, w);
    }
    w.report["timings"] = {
        {"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
    write_json(w.path("report.json"), w.report);
    if (!opts.quiet) {
      for (const auto& s : w.summary) out << s << "\n";
      out << "wrote " << w.path("report.json").string() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    err << "brflow: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "brflow: " << e.what() << "\n";
    return 1;
  }
}

Json compare_runs(const CompareOptions& opts) {
  for (const auto& dir : {opts.run_a, opts.run_b}) {
    if (!fs::is_directory(dir)) incompatible(dir.string() + " is not a run directory");
    if (!fs::exists(dir / "trace.csv")) incompatible(dir.string() + " has no trace.csv");
  }
  const Terminal ta = load_terminal(opts.run_a);
  const Terminal tb = load_terminal(opts.run_b);
  const TraceTable a = read_trace_csv(opts.run_a / "trace.csv");
  const TraceTable b = read_trace_csv(opts.run_b / "trace.csv");
  const Json ra = load_report(opts.run_a);
  const Json rb = load_report(opts.run_b);

  Json j = {{"run_a", opts.run_a.string()},
            {"run_b", opts.run_b.string()},
            {"terminal_w1", terminal_w1(ta, tb)},
            {"fraction", opts.fraction}};
  auto side = [&](const TraceTable& t, const Json& report) {
    const double rate = fit_exponential_rate(t.times, t.w1, opts.fraction);
    Json s = {{"fitted_rate", nan_to_null(rate)}, {"records", t.w1.size()}};
    if (!t.w1.empty()) s["terminal_trace_w1"] = t.w1.back();
    if (auto theory = theory_rate(report)) {
      s["theory_rate"] = *theory;
      s["fitted_over_theory"] = nan_to_null(rate / *theory);
    }
    return s;
  };
  j["a"] = side(a, ra);
  j["b"] = side(b, rb);
  const double fa = fit_exponential_rate(a.times, a.w1, opts.fraction);
  const double fb = fit_exponential_rate(b.times, b.w1, opts.fraction);
  j["rate_difference"] = nan_to_null(fa - fb);
  j["rate_relative_difference"] = nan_to_null(std::abs(fa - fb) / std::max(std::abs(fa), std::abs(fb)));
  if (fa == fb) j["rate_relative_difference"] = 0.0;
  return j;
}

int compare(const CompareOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    Json j = compare_runs(opts);
    if (opts.out) write_json(*opts.out, j);
    if (!opts.quiet) out << j.dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    err << "brflow: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "brflow: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace brflow::cli
