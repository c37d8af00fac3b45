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


#include "brflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>

#include "brflow/error.hpp"

namespace brflow {
namespace {

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  fail(ErrorCode::kValidation, path + " " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

const Json& require(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) invalid(path, "must be an object");
  auto it = j.find(key);
  if (it == j.end()) invalid(join(path, key), "is required");
  return *it;
}

double as_number(const Json& j, const std::string& path) {
  if (!j.is_number()) invalid(path, "must be a number");
  return j.get<double>();
}

double number(const Json& j, const std::string& key, const std::string& path) {
  return as_number(require(j, key, path), join(path, key));
}

double number_or(const Json& j, const std::string& key, double fallback, const std::string& path) {
  auto it = j.find(key);
  return it == j.end() ? fallback : as_number(*it, join(path, key));
}

std::size_t count(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = require(j, key, path);
  if (!v.is_number_integer() || v.get<long long>() < 1) invalid(join(path, key), "must be a positive integer");
  return v.get<std::size_t>();
}

// Flattens a nested array of numbers, checking the expected shape.
void flatten_into(const Json& j, std::span<const std::size_t> shape, const std::string& path,
                  std::vector<double>& out) {
  if (shape.empty()) {
    out.push_back(as_number(j, path));
    return;
  }
  if (!j.is_array() || j.size() != shape[0]) {
    invalid(path, "must be an array of length " + std::to_string(shape[0]));
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    flatten_into(j[i], shape.subspan(1), path + "[" + std::to_string(i) + "]", out);
  }
}

std::vector<double> tensor(const Json& j, const std::string& key, std::vector<std::size_t> shape,
                           const std::string& path) {
  std::vector<double> out;
  flatten_into(require(j, key, path), shape, join(path, key), out);
  return out;
}

void collect_leaves(const Json& j, const std::string& path, std::vector<double>& out) {
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) collect_leaves(j[i], path + "[" + std::to_string(i) + "]", out);
  } else {
    out.push_back(as_number(j, path));
  }
}

std::vector<double> uniform_weights(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

std::vector<double> vector_or_uniform(const Json& j, const std::string& key, std::size_t n,
                                      const std::string& path) {
  if (!j.contains(key)) return uniform_weights(n);
  return tensor(j, key, {n}, path);
}

// Re-throws spec validation failures with the JSON path prepended.
template <typename Fn>
void validate_at(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kValidation) throw;
    fail(ErrorCode::kValidation, join(path, e.detail()));
  }
}

void read_constants(const Json& j, const std::string& path, std::optional<double>& c_f,
                    std::optional<double>& l_f) {
  auto it = j.find("constants");
  if (it == j.end()) return;
  const std::string p = join(path, "constants");
  if (it->contains("C_F")) c_f = number(*it, "C_F", p);
  if (it->contains("L_F")) l_f = number(*it, "L_F", p);
}

Json constants_json(const std::optional<double>& c_f, const std::optional<double>& l_f) {
  Json j = Json::object();
  if (c_f) j["C_F"] = *c_f;
  if (l_f) j["L_F"] = *l_f;
  return j;
}

Json nan_to_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (first) {
      header = std::move(cells);
      first = false;
    } else {
      rows.push_back(std::move(cells));
    }
  }
  return rows;
}

double parse_cell(const std::string& s, const std::filesystem::path& path) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    if (s == "nan" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
    fail(ErrorCode::kIo, path.string() + ": cannot parse \"" + s + "\" as a number");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// JSON

Grid grid_from_json(const Json& j, const std::string& path) {
  const double lo = number(j, "x_min", path);
  const double hi = number(j, "x_max", path);
  const std::size_t n = count(j, "n", path);
  if (!(lo < hi)) invalid(join(path, "x_min"), "must be below x_max");
  if (n < 2) invalid(join(path, "n"), "must be >= 2");
  return Grid(lo, hi, n);
}

Json to_json(const Grid& g) { return {{"x_min", g.x_min()}, {"x_max", g.x_max()}, {"n", g.size()}}; }

ReferenceMeasure reference_from_json(const Json& j, const std::string& path) {
  const Json& name_node = require(j, "name", path);
  if (!name_node.is_string()) invalid(join(path, "name"), "must be a string");
  const std::string name = name_node.get<std::string>();
  const double scale = number_or(j, "scale", 1.0, path);
  if (!(scale > 0.0)) invalid(join(path, "scale"), "must be positive");
  std::size_t dim = 1;
  if (j.contains("dim")) dim = count(j, "dim", path);
  std::optional<Grid> grid;
  if (dim == 1) grid = j.contains("grid") ? grid_from_json(j["grid"], join(path, "grid")) : Grid::standard();
  try {
    if (name == "gaussian") return ReferenceMeasure::gaussian(scale, grid, dim);
    if (name == "laplace") return ReferenceMeasure::laplace(scale, grid, dim);
    if (name == "quartic") {
      if (dim != 1) invalid(join(path, "dim"), "must be 1 for the quartic reference");
      return ReferenceMeasure::quartic(scale, grid);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kValidation) throw;
    fail(ErrorCode::kValidation, path + ": " + e.detail());
  }
  invalid(join(path, "name"), "must be one of gaussian, laplace, quartic (got \"" + name + "\")");
}

FeatureMap feature_map_from_json(const Json& j, std::size_t entries, const std::string& path) {
  if (!j.is_object()) invalid(path, "must be an object");
  Activation act = Activation::kTanh;
  if (j.contains("activation")) {
    if (!j["activation"].is_string()) invalid(join(path, "activation"), "must be a string");
    validate_at(path, [&] { act = parse_activation(j["activation"].get<std::string>()); });
  }
  if (j.contains("phi")) {
    std::vector<double> leaves;
    collect_leaves(j["phi"], join(path, "phi"), leaves);
    if (leaves.empty() || leaves.size() % entries != 0) {
      invalid(join(path, "phi"), "must hold " + std::to_string(entries) + " embeddings of equal dimension");
    }
    const std::size_t dim = leaves.size() / entries;
    if (j.contains("dim") && count(j, "dim", path) != dim) {
      invalid(join(path, "dim"), "does not match the embeddings in phi");
    }
    return FeatureMap(act, dim, std::move(leaves));
  }
  const std::size_t dim = j.contains("dim") ? count(j, "dim", path) : 1;
  const Json& seed = require(j, "seed", path);
  if (!seed.is_number_integer() || seed.get<long long>() < 0) invalid(join(path, "seed"), "must be a non-negative integer");
  const double scale = number_or(j, "scale", 1.0, path);
  return FeatureMap::random(act, dim, entries, scale, seed.get<std::uint64_t>());
}

Json to_json(const FeatureMap& f) {
  Json phi = Json::array();
  for (std::size_t k = 0; k < f.entries(); ++k) {
    const auto e = f.embedding(k);
    phi.push_back(std::vector<double>(e.begin(), e.end()));
  }
  return {{"activation", std::string(to_string(f.activation()))}, {"dim", f.dim()}, {"phi", phi}};
}

BanditSpec bandit_spec_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) invalid(path, "must be an object");
  const std::string cost_key = j.contains("cost") ? "cost" : "c";
  const Json& cost_node = require(j, cost_key, path);
  if (!cost_node.is_array() || cost_node.empty()) invalid(join(path, cost_key), "must be a non-empty array");
  const std::size_t n = cost_node.size();
  std::vector<double> cost = tensor(j, cost_key, {n}, path);
  std::vector<double> eta = vector_or_uniform(j, "eta", n, path);
  const double tau = number(j, "tau", path);
  if (!(tau >= 0.0)) invalid(join(path, "tau"), "must be >= 0");
  BanditSpec spec{std::move(cost), std::move(eta), tau,
                  feature_map_from_json(require(j, "features", path), n, join(path, "features")),
                  {}, {}};
  read_constants(j, path, spec.c_f_override, spec.l_f_override);
  validate_at(path, [&] { spec.validate(); });
  return spec;
}

Json to_json(const BanditSpec& spec) {
  Json j = {{"cost", spec.cost}, {"eta", spec.eta}, {"tau", spec.tau}, {"features", to_json(spec.features)}};
  Json k = constants_json(spec.c_f_override, spec.l_f_override);
  if (!k.empty()) j["constants"] = k;
  return j;
}

MDPSpec mdp_spec_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) invalid(path, "must be an object");
  const std::size_t ns = count(j, "nS", path);
  const std::size_t na = count(j, "nA", path);
  const double tau = number(j, "tau", path);
  if (!(tau >= 0.0)) invalid(join(path, "tau"), "must be >= 0");
  MDPSpec spec{
      ns,
      na,
      tensor(j, "P", {ns, na, ns}, path),
      tensor(j, "c", {ns, na}, path),
      number(j, "delta", path),
      tau,
      vector_or_uniform(j, "eta", na, path),
      vector_or_uniform(j, "gamma", ns, path),
      feature_map_from_json(require(j, "features", path), ns * na, join(path, "features")),
      2000,
      {},
      {},
  };
  if (j.contains("dense_threshold")) spec.dense_threshold = count(j, "dense_threshold", path);
  read_constants(j, path, spec.c_f_override, spec.l_f_override);
  validate_at(path, [&] { spec.validate(); });
  return spec;
}

Json to_json(const MDPSpec& spec) {
  const std::size_t ns = spec.n_states, na = spec.n_actions;
  Json p = Json::array();
  Json c = Json::array();
  for (std::size_t s = 0; s < ns; ++s) {
    Json ps = Json::array();
    Json cs = Json::array();
    for (std::size_t a = 0; a < na; ++a) {
      const auto first = spec.transition.begin() + static_cast<std::ptrdiff_t>((s * na + a) * ns);
      ps.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(ns)));
      cs.push_back(spec.cost[s * na + a]);
    }
    p.push_back(ps);
    c.push_back(cs);
  }
  Json j = {{"nS", ns},        {"nA", na},          {"P", p},
            {"c", c},          {"delta", spec.discount}, {"tau", spec.tau},
            {"eta", spec.eta}, {"gamma", spec.gamma}, {"features", to_json(spec.features)}};
  Json k = constants_json(spec.c_f_override, spec.l_f_override);
  if (!k.empty()) j["constants"] = k;
  return j;
}

MarkovGameSpec markov_game_spec_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) invalid(path, "must be an object");
  const std::size_t ns = count(j, "nS", path);
  const std::size_t na = count(j, "nA", path);
  const std::size_t nb = count(j, "nB", path);
  const double tau_a = number_or(j, "tau_a", 0.0, path);
  const double tau_b = number_or(j, "tau_b", 0.0, path);
  if (!(tau_a >= 0.0)) invalid(join(path, "tau_a"), "must be >= 0");
  if (!(tau_b >= 0.0)) invalid(join(path, "tau_b"), "must be >= 0");
  std::vector<double> p;
  if (j.contains("P")) {
    p = tensor(j, "P", {ns, na, nb, ns}, path);
  } else if (ns == 1) {
    p.assign(na * nb, 1.0);
  } else {
    invalid(join(path, "P"), "is required when nS > 1");
  }
  MarkovGameSpec spec{
      ns,
      na,
      nb,
      std::move(p),
      tensor(j, "c", {ns, na, nb}, path),
      number_or(j, "delta", 0.0, path),
      tau_a,
      tau_b,
      vector_or_uniform(j, "eta_a", na, path),
      vector_or_uniform(j, "eta_b", nb, path),
      vector_or_uniform(j, "gamma", ns, path),
      feature_map_from_json(require(j, "features_a", path), ns * na, join(path, "features_a")),
      feature_map_from_json(require(j, "features_b", path), ns * nb, join(path, "features_b")),
      2000,
  };
  validate_at(path, [&] { spec.validate(); });
  return spec;
}

Json to_json(const MarkovGameSpec& spec) {
  const std::size_t ns = spec.n_states, na = spec.n_actions_a, nb = spec.n_actions_b;
  Json p = Json::array();
  Json c = Json::array();
  for (std::size_t s = 0; s < ns; ++s) {
    Json ps = Json::array();
    Json cs = Json::array();
    for (std::size_t a = 0; a < na; ++a) {
      Json pa = Json::array();
      Json ca = Json::array();
      for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t idx = (s * na + a) * nb + b;
        const auto first = spec.transition.begin() + static_cast<std::ptrdiff_t>(idx * ns);
        pa.push_back(std::vector<double>(first, first + static_cast<std::ptrdiff_t>(ns)));
        ca.push_back(spec.cost[idx]);
      }
      ps.push_back(pa);
      cs.push_back(ca);
    }
    p.push_back(ps);
    c.push_back(cs);
  }
  return {{"nS", ns},
          {"nA", na},
          {"nB", nb},
          {"P", p},
          {"c", c},
          {"delta", spec.discount},
          {"tau_a", spec.tau_a},
          {"tau_b", spec.tau_b},
          {"eta_a", spec.eta_a},
          {"eta_b", spec.eta_b},
          {"gamma", spec.gamma},
          {"features_a", to_json(spec.features_a)},
          {"features_b", to_json(spec.features_b)}};
}

Json to_json(const ContractionReport& r) {
  return {{"C_F", r.c_f},
          {"L_F", r.l_f},
          {"m1", r.m1},
          {"sigma", r.sigma},
          {"alpha", r.alpha},
          {"L_psi", nan_to_null(r.l_psi)},
          {"sigma_min", r.sigma_min},
          {"contractive", r.contractive},
          {"rate", nan_to_null(r.rate)}};
}

Json to_json(const GameContractionReport& r) {
  return {{"C_F", r.constants.c_nu},
          {"L_F", r.constants.l_nu},
          {"C_F_bar", r.constants.c_mu},
          {"L_F_bar", r.constants.l_mu},
          {"m1_xi", r.m1_xi},
          {"m1_rho", r.m1_rho},
          {"sigma_nu", r.sigma_nu},
          {"sigma_mu", r.sigma_mu},
          {"alpha_nu", r.alpha_nu},
          {"alpha_mu", r.alpha_mu},
          {"L_psi", nan_to_null(r.l_psi)},
          {"L_phi", nan_to_null(r.l_phi)},
          {"L_sum", nan_to_null(r.l_sum)},
          {"sigma_nu_threshold", r.sigma_nu_threshold},
          {"sigma_mu_threshold", r.sigma_mu_threshold},
          {"sigma_nu_threshold_adjusted", r.sigma_nu_threshold_adjusted},
          {"sigma_mu_threshold_adjusted", r.sigma_mu_threshold_adjusted},
          {"thresholds_hold", r.thresholds_hold},
          {"adjusted_thresholds_hold", r.adjusted_thresholds_hold},
          {"contractive", r.contractive},
          {"rate", nan_to_null(r.rate)}};
}

Json to_json(const RegularityConstants& k) { return {{"C_F", k.c_f}, {"L_F", k.l_f}}; }

// ---------------------------------------------------------------------------
// Files

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorCode::kValidation, path.string() + " is not valid JSON: " + e.what());
  }
}

void write_density_csv(const std::filesystem::path& path, const GridDensity& p) {
  std::string text = "x,density\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    text += format_double(p.grid().node(i)) + "," + format_double(p[i]) + "\n";
  }
  write_text(path, text);
}

GridDensity read_density_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  if (header.size() < 2 || header[0] != "x" || header[1] != "density") {
    fail(ErrorCode::kIo, path.string() + ": expected header x,density");
  }
  if (rows.size() < 2) fail(ErrorCode::kIo, path.string() + ": need at least two rows");
  std::vector<double> xs, vs;
  for (const auto& r : rows) {
    if (r.size() < 2) fail(ErrorCode::kIo, path.string() + ": short row");
    xs.push_back(parse_cell(r[0], path));
    vs.push_back(parse_cell(r[1], path));
  }
  Grid g(xs.front(), xs.back(), xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::abs(xs[i] - g.node(i)) > 1e-9 * std::max(1.0, std::abs(xs[i]))) {
      fail(ErrorCode::kIo, path.string() + ": x column is not a uniform grid");
    }
  }
  return GridDensity(g, std::move(vs));
}

void write_ensemble_csv(const std::filesystem::path& path, const ParticleEnsemble& e) {
  std::string text = "particle_id";
  for (std::size_t k = 0; k < e.dim(); ++k) text += ",coord_" + std::to_string(k);
  text += "\n";
  for (std::size_t i = 0; i < e.size(); ++i) {
    text += std::to_string(i);
    for (double v : e.point(i)) text += "," + format_double(v);
    text += "\n";
  }
  write_text(path, text);
}

ParticleEnsemble read_ensemble_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  if (header.size() < 2 || header[0] != "particle_id") {
    fail(ErrorCode::kIo, path.string() + ": expected header particle_id,coord_0,...");
  }
  const std::size_t dim = header.size() - 1;
  std::vector<double> pos;
  pos.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.size() != dim + 1) fail(ErrorCode::kIo, path.string() + ": row width differs from header");
    for (std::size_t k = 1; k <= dim; ++k) pos.push_back(parse_cell(r[k], path));
  }
  if (pos.empty()) fail(ErrorCode::kIo, path.string() + ": no particles");
  return ParticleEnsemble(dim, std::move(pos));
}

std::string trace_csv(const FlowTrace& trace) {
  std::string text = "step,time,w1,kl\n";
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    text += std::to_string(trace.steps[i]) + "," + format_double(trace.times[i]) + "," +
            format_double(trace.w1[i]) + ",";
    if (i < trace.kl.size() && !std::isnan(trace.kl[i])) text += format_double(trace.kl[i]);
    text += "\n";
  }
  return text;
}

void write_trace_csv(const std::filesystem::path& path, const FlowTrace& trace) {
  write_text(path, trace_csv(trace));
}

TraceTable read_trace_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, header);
  if (header.size() < 3 || header[0] != "step" || header[1] != "time" || header[2] != "w1") {
    fail(ErrorCode::kIo, path.string() + ": expected header step,time,w1[,kl]");
  }
  TraceTable t;
  for (const auto& r : rows) {
    if (r.size() < 3) fail(ErrorCode::kIo, path.string() + ": short row");
    t.steps.push_back(static_cast<std::size_t>(parse_cell(r[0], path)));
    t.times.push_back(parse_cell(r[1], path));
    t.w1.push_back(parse_cell(r[2], path));
    t.kl.push_back(r.size() > 3 ? parse_cell(r[3], path) : std::numeric_limits<double>::quiet_NaN());
  }
  return t;
}

}  // namespace brflow
