#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "estimates.hpp"
#include "geometry.hpp"
#include "nonlinearity.hpp"
#include "solver.hpp"

namespace hbr {

inline constexpr const char* kModuleVersion = "0.1.0";

// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

struct DomainBlock {
  std::string kind = "half_space";
  double l = 0.1;          // zigzag slope when no table is given
  std::string table;       // resolved path, empty when unused
  Vec2 lo{-2.5, 0.0}, hi{2.5, 2.5};
  Vec2 center{};
  double radius = 0.5;
  bool keep_ball_side = false;
  double r_in = 1.0, r_out = 2.0, a0 = 0.0, a1 = 3.141592653589793;
  DomainSpec spec;
  double effective_l = 0.0;  // Lipschitz constant of the graph actually used
};

struct OperatorBlock {
  OperatorKind kind = OperatorKind::pucci_minus_drift;
  double lambda = 1.0, Lambda = 2.0;
  double p0 = 2.0, p1 = 0.0, p2 = 0.0;  // p(x) = p0 + p1 x1 + p2 x2
};

struct SolverBlock {
  double h = 1.0 / 64.0;
  std::optional<int> nx, ny;
  double tol_solve = 1e-8;
  int max_iters = 200;
  int orientations = 16;
};

struct ScenarioBlock {
  std::vector<double> R{1.0, 0.5, 0.25};
  std::vector<std::uint64_t> seeds{11, 23, 37};
  // instance family
  std::vector<std::string> family_domains{"half_space", "lipschitz_graph", "cube"};
  std::vector<std::string> family_nls{"homogeneous", "linear", "log_model"};
  double family_h = 1.0 / 64.0;
  double spread_limit = 0.3;
  double alpha = 0.0;
  // interior Harnack
  std::optional<Vec2> harnack_center;
  std::optional<double> harnack_r;
  // Holder
  double holder_r = 1.0;
  double flatten_to = 0.005;
  double osc_r = 0.5;
  // blow-up
  double blowup_alpha = 0.5, delta_trial = 0.5, C2 = 16.0;
  // boundary Harnack
  double bharnack_C = 2.0;
  // sharpness
  std::vector<double> H{1e4, 1e6};
  double eps = 0.03;
  std::vector<double> lemma61_eps{0.05, 0.1, 0.2};
  // variable-exponent bounds
  double px_C = 4.0;
  double px_H = 2.0;
};

struct OutputBlock {
  std::string directory = "out";
  std::vector<std::string> formats{"json", "csv"};
};

struct ExperimentConfig {
  std::string path;
  std::string hash;  // FNV-1a of the canonical JSON
  nlohmann::json raw;
  DomainBlock domain;
  Nonlinearity nl;
  std::string nl_kind = "log_model";
  OperatorBlock op;
  SolverBlock solver;
  ScenarioBlock scenario;
  OutputBlock output;

  Problem problem(double R = 1.0) const {
    Problem p;
    p.op = op.kind;
    p.ell = EllipticityPair(op.lambda, op.Lambda);
    p.nl = RescaledNonlinearity(nl, R);
    if (op.kind == OperatorKind::px_laplace) {
      double a = op.p0, b = op.p1, c = op.p2;
      p.p_field = [a, b, c](Vec2 x) { return a + b * x.x + c * x.y; };
      p.grad_p = [b, c](Vec2) { return Vec2{b, c}; };
    }
    return p;
  }

  SolverOptions solver_options() const {
    SolverOptions o;
    o.tol = solver.tol_solve;
    o.max_iters = solver.max_iters;
    o.orientations = solver.orientations;
    return o;
  }

  std::vector<Nonlinearity> family_nonlinearities() const;
};

namespace detail {

inline void allow_keys(const nlohmann::json& j, const std::string& where, std::set<std::string> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!keys.count(it.key())) throw ConfigError("unknown key '" + where + "." + it.key() + "'");
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

inline Vec2 get_vec(const nlohmann::json& j, const std::string& key, const std::string& where, Vec2 fallback) {
  if (!j.contains(key)) return fallback;
  auto v = get_or<std::vector<double>>(j, key, where, {});
  if (v.size() != 2) throw ConfigError(where + "." + key + " must be a pair [x, y]");
  return {v[0], v[1]};
}

inline std::string resolve_path(const std::string& base_dir, const std::string& p, const std::string& what) {
  namespace fs = std::filesystem;
  fs::path q(p);
  if (q.is_relative()) q = fs::path(base_dir) / q;
  if (!fs::exists(q)) throw ConfigError(what + " '" + q.string() + "' does not exist");
  return q.string();
}

inline Nonlinearity nonlinearity_from(const std::string& kind, double c, const std::string& table) {
  switch (phi_kind_from_string(kind)) {
    case PhiKind::homogeneous: return Nonlinearity::homogeneous();
    case PhiKind::linear: return Nonlinearity::linear();
    case PhiKind::log_model: return Nonlinearity::log_model(c);
    case PhiKind::tabulated:
      if (table.empty()) throw ConfigError("nonlinearity.kind = tabulated needs nonlinearity.table");
      return load_phi_table(table);
  }
  throw ConfigError("unknown nonlinearity kind '" + kind + "'");
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

}  // namespace detail

inline std::vector<Nonlinearity> ExperimentConfig::family_nonlinearities() const {
  std::vector<Nonlinearity> out;
  for (auto& k : scenario.family_nls) out.push_back(detail::nonlinearity_from(k, nl.c, ""));
  return out;
}

inline ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".",
                                     const std::string& path = "<string>") {
  using namespace detail;
  ExperimentConfig cfg;
  cfg.path = path;
  try {
    cfg.raw = nlohmann::json::parse(text, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSONC: " + e.what());
  }
  const auto& j = cfg.raw;
  allow_keys(j, "config", {"version", "domain", "nonlinearity", "operator", "solver", "scenario", "output"});
  require(get_or<int>(j, "version", "config", 1) == 1, "config.version must be 1");
  cfg.hash = hex64(fnv1a(j.dump()));

  if (j.contains("domain")) {
    const auto& d = j["domain"];
    allow_keys(d, "domain",
               {"kind", "l", "table", "window", "center", "radius", "keep_ball_side", "r_in", "r_out", "a0", "a1"});
    auto& D = cfg.domain;
    D.kind = get_or<std::string>(d, "kind", "domain", D.kind);
    D.l = get_or<double>(d, "l", "domain", D.l);
    if (d.contains("table")) D.table = resolve_path(base_dir, get_or<std::string>(d, "table", "domain", ""), "domain.table");
    if (d.contains("window")) {
      const auto& w = d["window"];
      allow_keys(w, "domain.window", {"lo", "hi"});
      D.lo = get_vec(w, "lo", "domain.window", D.lo);
      D.hi = get_vec(w, "hi", "domain.window", D.hi);
    }
    D.center = get_vec(d, "center", "domain", D.center);
    D.radius = get_or<double>(d, "radius", "domain", D.radius);
    D.keep_ball_side = get_or<bool>(d, "keep_ball_side", "domain", D.keep_ball_side);
    D.r_in = get_or<double>(d, "r_in", "domain", D.r_in);
    D.r_out = get_or<double>(d, "r_out", "domain", D.r_out);
    D.a0 = get_or<double>(d, "a0", "domain", D.a0);
    D.a1 = get_or<double>(d, "a1", "domain", D.a1);
  }
  {
    auto& D = cfg.domain;
    require(D.hi.x > D.lo.x && D.hi.y > D.lo.y, "domain.window needs hi > lo in both coordinates");
    switch (domain_kind_from_string(D.kind)) {
      case DomainKind::half_space: D.spec = DomainSpec::half_space(); break;
      case DomainKind::lipschitz_graph:
        require(D.l >= 0.0, "domain.l must be >= 0");
        D.spec = D.table.empty() ? zigzag_graph(D.l) : load_graph_table(D.table);
        break;
      case DomainKind::cube: D.spec = DomainSpec::cube(D.lo.x, D.hi.x, D.lo.y, D.hi.y); break;
      case DomainKind::cube_minus_ball:
        D.spec = DomainSpec::cube_minus_ball(D.lo.x, D.hi.x, D.lo.y, D.hi.y, D.center, D.radius, D.keep_ball_side);
        break;
      case DomainKind::annulus_sector: D.spec = DomainSpec::annulus_sector(D.center, D.r_in, D.r_out, D.a0, D.a1); break;
    }
    D.effective_l = D.spec.kind == DomainKind::lipschitz_graph ? D.spec.l : 0.0;
  }

  {
    std::string table;
    double c = 1.0;
    if (j.contains("nonlinearity")) {
      const auto& n = j["nonlinearity"];
      allow_keys(n, "nonlinearity", {"kind", "c", "table"});
      cfg.nl_kind = get_or<std::string>(n, "kind", "nonlinearity", cfg.nl_kind);
      c = get_or<double>(n, "c", "nonlinearity", c);
      if (n.contains("table"))
        table = resolve_path(base_dir, get_or<std::string>(n, "table", "nonlinearity", ""), "nonlinearity.table");
    }
    require(c > 0.0, "nonlinearity.c must be > 0");
    cfg.nl = nonlinearity_from(cfg.nl_kind, c, table);
  }

  if (j.contains("operator")) {
    const auto& o = j["operator"];
    allow_keys(o, "operator", {"kind", "lambda", "Lambda", "p"});
    cfg.op.kind = operator_kind_from_string(get_or<std::string>(o, "kind", "operator", "pucci_minus_drift"));
    cfg.op.lambda = get_or<double>(o, "lambda", "operator", cfg.op.lambda);
    cfg.op.Lambda = get_or<double>(o, "Lambda", "operator", cfg.op.Lambda);
    if (o.contains("p")) {
      auto p = get_or<std::vector<double>>(o, "p", "operator", {});
      require(p.size() == 3, "operator.p must be [p0, p1, p2] for p(x) = p0 + p1 x1 + p2 x2");
      cfg.op.p0 = p[0];
      cfg.op.p1 = p[1];
      cfg.op.p2 = p[2];
    }
  }
  require(cfg.op.lambda > 0.0 && cfg.op.Lambda >= cfg.op.lambda, "operator needs 0 < lambda <= Lambda");

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    allow_keys(s, "solver", {"h", "nx", "ny", "tol_solve", "max_iters", "orientations"});
    cfg.solver.h = get_or<double>(s, "h", "solver", cfg.solver.h);
    if (s.contains("nx")) cfg.solver.nx = get_or<int>(s, "nx", "solver", 0);
    if (s.contains("ny")) cfg.solver.ny = get_or<int>(s, "ny", "solver", 0);
    cfg.solver.tol_solve = get_or<double>(s, "tol_solve", "solver", cfg.solver.tol_solve);
    cfg.solver.max_iters = get_or<int>(s, "max_iters", "solver", cfg.solver.max_iters);
    cfg.solver.orientations = get_or<int>(s, "orientations", "solver", cfg.solver.orientations);
  }
  {
    auto& S = cfg.solver;
    require(S.h > 0.0 && S.h <= 0.5, "solver.h must lie in (0, 1/2]");
    require(S.tol_solve > 0.0, "solver.tol_solve must be > 0");
    require(S.max_iters >= 1, "solver.max_iters must be >= 1");
    require(S.orientations >= 4, "solver.orientations must be >= 4");
    auto check_n = [&](const std::optional<int>& n, double extent, const char* name) {
      if (!n) return;
      int expect = int(std::lround(extent / S.h)) + 1;
      require(*n == expect, std::string("solver.") + name + " = " + std::to_string(*n) +
                                " disagrees with the window and h (expected " + std::to_string(expect) + ")");
    };
    check_n(S.nx, cfg.domain.hi.x - cfg.domain.lo.x, "nx");
    check_n(S.ny, cfg.domain.hi.y - cfg.domain.lo.y, "ny");
  }

  if (j.contains("scenario")) {
    const auto& s = j["scenario"];
    allow_keys(s, "scenario",
               {"R", "seeds", "family", "harnack", "holder", "blowup", "bharnack", "sharpness", "px"});
    auto& S = cfg.scenario;
    S.R = get_or<std::vector<double>>(s, "R", "scenario", S.R);
    S.seeds = get_or<std::vector<std::uint64_t>>(s, "seeds", "scenario", S.seeds);
    if (s.contains("family")) {
      const auto& f = s["family"];
      allow_keys(f, "scenario.family", {"domains", "nonlinearities", "h", "spread_limit", "alpha"});
      S.family_domains = get_or<std::vector<std::string>>(f, "domains", "scenario.family", S.family_domains);
      S.family_nls = get_or<std::vector<std::string>>(f, "nonlinearities", "scenario.family", S.family_nls);
      S.family_h = get_or<double>(f, "h", "scenario.family", S.family_h);
      S.spread_limit = get_or<double>(f, "spread_limit", "scenario.family", S.spread_limit);
      S.alpha = get_or<double>(f, "alpha", "scenario.family", S.alpha);
    }
    if (s.contains("harnack")) {
      const auto& h = s["harnack"];
      allow_keys(h, "scenario.harnack", {"center", "r"});
      if (h.contains("center")) S.harnack_center = get_vec(h, "center", "scenario.harnack", {});
      if (h.contains("r")) S.harnack_r = get_or<double>(h, "r", "scenario.harnack", 0.0);
    }
    if (s.contains("holder")) {
      const auto& h = s["holder"];
      allow_keys(h, "scenario.holder", {"r", "flatten_to", "osc_r"});
      S.holder_r = get_or<double>(h, "r", "scenario.holder", S.holder_r);
      S.flatten_to = get_or<double>(h, "flatten_to", "scenario.holder", S.flatten_to);
      S.osc_r = get_or<double>(h, "osc_r", "scenario.holder", S.osc_r);
    }
    if (s.contains("blowup")) {
      const auto& b = s["blowup"];
      allow_keys(b, "scenario.blowup", {"alpha", "delta_trial", "C2"});
      S.blowup_alpha = get_or<double>(b, "alpha", "scenario.blowup", S.blowup_alpha);
      S.delta_trial = get_or<double>(b, "delta_trial", "scenario.blowup", S.delta_trial);
      S.C2 = get_or<double>(b, "C2", "scenario.blowup", S.C2);
    }
    if (s.contains("bharnack")) {
      const auto& b = s["bharnack"];
      allow_keys(b, "scenario.bharnack", {"C"});
      S.bharnack_C = get_or<double>(b, "C", "scenario.bharnack", S.bharnack_C);
    }
    if (s.contains("sharpness")) {
      const auto& b = s["sharpness"];
      allow_keys(b, "scenario.sharpness", {"H", "eps", "lemma61_eps"});
      S.H = get_or<std::vector<double>>(b, "H", "scenario.sharpness", S.H);
      S.eps = get_or<double>(b, "eps", "scenario.sharpness", S.eps);
      S.lemma61_eps = get_or<std::vector<double>>(b, "lemma61_eps", "scenario.sharpness", S.lemma61_eps);
    }
    if (s.contains("px")) {
      const auto& b = s["px"];
      allow_keys(b, "scenario.px", {"C", "H"});
      S.px_C = get_or<double>(b, "C", "scenario.px", S.px_C);
      S.px_H = get_or<double>(b, "H", "scenario.px", S.px_H);
    }
  }
  {
    const auto& S = cfg.scenario;
    require(!S.R.empty(), "scenario.R must not be empty");
    for (double R : S.R) require(R > 0.0 && R <= 1.0, "scenario.R entries must lie in (0, 1]");
    require(!S.seeds.empty(), "scenario.seeds must not be empty");
    for (auto& d : S.family_domains)
      require(d == "half_space" || d == "lipschitz_graph" || d == "cube", "scenario.family.domains: unknown '" + d + "'");
    for (auto& n : S.family_nls) {
      require(n != "tabulated", "scenario.family.nonlinearities cannot use a tabulated phi");
      phi_kind_from_string(n);
    }
    require(S.family_h > 0.0 && S.family_h <= 0.25, "scenario.family.h must lie in (0, 1/4]");
    require(S.spread_limit >= 0.0, "scenario.family.spread_limit must be >= 0");
    require(S.alpha >= 0.0 && S.alpha < 1.0, "scenario.family.alpha must lie in [0, 1)");
    if (S.harnack_r) require(*S.harnack_r > 0.0 && *S.harnack_r <= 1.0, "scenario.harnack.r must lie in (0, 1]");
    require(S.holder_r > 0.0 && S.holder_r <= 1.0, "scenario.holder.r must lie in (0, 1]");
    require(S.flatten_to > 0.0 && S.flatten_to < 0.01, "scenario.holder.flatten_to must lie in (0, 0.01)");
    require(S.osc_r > 0.0 && S.osc_r < 1.0, "scenario.holder.osc_r must lie in (0, 1)");
    require(S.blowup_alpha > 0.0 && S.blowup_alpha < 1.0, "scenario.blowup.alpha must lie in (0, 1)");
    require(S.delta_trial > 0.0, "scenario.blowup.delta_trial must be > 0");
    require(S.C2 > 1.0, "scenario.blowup.C2 must be > 1");
    require(S.bharnack_C >= 1.0, "scenario.bharnack.C must be >= 1");
    require(!S.H.empty(), "scenario.sharpness.H must not be empty");
    for (double H : S.H) require(H >= 1e4, "scenario.sharpness.H entries must be >= 1e4");
    require(S.eps > 0.0 && S.eps < 0.25, "scenario.sharpness.eps must lie in (0, 1/4)");
    for (double e : S.lemma61_eps) require(e > 0.0 && e < 0.25, "scenario.sharpness.lemma61_eps entries must lie in (0, 1/4)");
    require(S.px_C >= 1.0, "scenario.px.C must be >= 1");
    require(S.px_H > 0.0, "scenario.px.H must be > 0");
  }

  if (j.contains("output")) {
    const auto& o = j["output"];
    allow_keys(o, "output", {"directory", "formats"});
    cfg.output.directory = get_or<std::string>(o, "directory", "output", cfg.output.directory);
    cfg.output.formats = get_or<std::vector<std::string>>(o, "formats", "output", cfg.output.formats);
  }
  for (auto& f : cfg.output.formats) require(f == "json" || f == "csv", "output.formats entries must be json or csv");
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  auto dir = std::filesystem::path(path).parent_path().string();
  return parse_config(ss.str(), dir.empty() ? "." : dir, path);
}

// Checks that need the subcommand: flatness hypotheses for geometry and Holder runs.
inline void validate_for(const ExperimentConfig& cfg, const std::string& subcommand) {
  if ((subcommand == "geometry" || subcommand == "holder") && cfg.domain.spec.kind == DomainKind::lipschitz_graph) {
    double l = cfg.domain.effective_l;
    if (!(l < 0.125)) {
      std::ostringstream m;
      m << "domain.l = " << l << " violates the flatness hypothesis l < 1/8";
      throw PreconditionError(m.str());
    }
  }
  if (subcommand == "bharnack" && cfg.domain.spec.kind != DomainKind::half_space)
    throw PreconditionError("bharnack runs on the flat half-space; set domain.kind = half_space");
  if (cfg.op.kind == OperatorKind::px_laplace && subcommand != "solve" && subcommand != "harnack" &&
      subcommand != "suite" && subcommand != "structure" && subcommand != "geometry" && subcommand != "sharpness")
    throw PreconditionError("operator.kind = px_laplace is only supported by solve, harnack, suite and the solver-free subcommands");
}

}  // namespace hbr
