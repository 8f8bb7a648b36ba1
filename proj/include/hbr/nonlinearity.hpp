#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "quadrature.hpp"

namespace hbr {

enum class PhiKind { homogeneous, linear, log_model, tabulated };

inline std::string to_string(PhiKind k) {
  switch (k) {
    case PhiKind::homogeneous: return "homogeneous";
    case PhiKind::linear: return "linear";
    case PhiKind::log_model: return "log_model";
    case PhiKind::tabulated: return "tabulated";
  }
  return "?";
}

inline PhiKind phi_kind_from_string(const std::string& s) {
  if (s == "homogeneous") return PhiKind::homogeneous;
  if (s == "linear") return PhiKind::linear;
  if (s == "log_model" || s == "log-model") return PhiKind::log_model;
  if (s == "tabulated" || s == "user-tabulated") return PhiKind::tabulated;
  throw ConfigError("unknown phi.kind '" + s + "'");
}

// Drift profile phi(t) = eta(t) t.
struct Nonlinearity {
  PhiKind kind = PhiKind::homogeneous;
  double c = 1.0;
  double lambda0 = 1.0;
  double eps_floor = 1e-6;
  std::vector<double> table_t;
  std::vector<double> table_phi;

  static Nonlinearity homogeneous() { return {}; }
  static Nonlinearity linear() {
    Nonlinearity n;
    n.kind = PhiKind::linear;
    return n;
  }
  static Nonlinearity log_model(double c = 1.0) {
    if (!(c > 0.0)) throw ConfigError("phi.c must be positive");
    Nonlinearity n;
    n.kind = PhiKind::log_model;
    n.c = c;
    return n;
  }
  // Rows (t, phi(t)) with strictly increasing t >= 0 and phi >= 0.
  static Nonlinearity tabulated(std::vector<double> t, std::vector<double> phi) {
    if (t.size() != phi.size() || t.size() < 2)
      throw ConfigError("phi table needs at least two (t, phi) rows");
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!(t[i] >= 0.0) || !(phi[i] >= 0.0) || !std::isfinite(t[i]) || !std::isfinite(phi[i]))
        throw ConfigError("phi table row " + std::to_string(i) + " is not a non-negative finite pair");
      if (i > 0 && !(t[i] > t[i - 1]))
        throw ConfigError("phi table t column is not strictly increasing at row " + std::to_string(i));
    }
    Nonlinearity n;
    n.kind = PhiKind::tabulated;
    n.table_t = std::move(t);
    n.table_phi = std::move(phi);
    return n;
  }

  bool has_drift() const { return kind != PhiKind::homogeneous; }

  // Points where phi is not smooth.
  std::vector<double> kinks() const {
    if (kind == PhiKind::log_model) return {1.0};
    if (kind == PhiKind::tabulated) return table_t;
    return {};
  }

  double table_min() const { return table_t.front(); }
  double table_max() const { return table_t.back(); }

  double phi(double t) const {
    if (!(t >= 0.0)) throw DomainError("phi evaluated at negative or NaN t");
    switch (kind) {
      case PhiKind::homogeneous: return 0.0;
      case PhiKind::linear: return t;
      case PhiKind::log_model:
        if (t == 0.0) return 0.0;
        if (std::isinf(t)) return t;
        return c * (std::abs(std::log(t)) + 1.0) * t;
      case PhiKind::tabulated: return interpolate(t);
    }
    return 0.0;
  }

  // eta(t) = phi(t)/t for t > 0.
  double eta(double t) const {
    if (!(t > 0.0)) throw DomainError("eta needs t > 0");
    switch (kind) {
      case PhiKind::homogeneous: return 0.0;
      case PhiKind::linear: return 1.0;
      case PhiKind::log_model: return c * (std::abs(std::log(t)) + 1.0);
      case PhiKind::tabulated: return interpolate(t) / t;
    }
    return 0.0;
  }

  // One-sided derivative estimate used by the solver's Newton step.
  double dphi(double t) const {
    switch (kind) {
      case PhiKind::homogeneous: return 0.0;
      case PhiKind::linear: return 1.0;
      case PhiKind::log_model: {
        double tt = std::max(t, 1e-300);
        double lg = std::log(tt);
        return lg >= 0.0 ? c * (lg + 2.0) : c * (-lg);
      }
      case PhiKind::tabulated: {
        double lo = std::max(table_min(), t * (1.0 - 1e-6));
        double hi = std::min(table_max(), t * (1.0 + 1e-6) + 1e-300);
        if (hi <= lo) return 0.0;
        return (interpolate(hi) - interpolate(lo)) / (hi - lo);
      }
    }
    return 0.0;
  }

private:
  double interpolate(double t) const {
    if (t < table_t.front() || t > table_t.back())
      throw DomainError("phi table does not cover t = " + std::to_string(t) + " (no extrapolation)");
    auto it = std::upper_bound(table_t.begin(), table_t.end(), t);
    std::size_t j = static_cast<std::size_t>(it - table_t.begin());
    if (j == table_t.size()) return table_phi.back();
    if (j == 0) return table_phi.front();
    std::size_t i = j - 1;
    double t0 = table_t[i], t1 = table_t[j], p0 = table_phi[i], p1 = table_phi[j];
    if (t == t0) return p0;
    if (t0 > 0.0 && p0 > 0.0 && p1 > 0.0) {
      double w = std::log(t / t0) / std::log(t1 / t0);
      return std::exp((1.0 - w) * std::log(p0) + w * std::log(p1));
    }
    double w = (t - t0) / (t1 - t0);
    return (1.0 - w) * p0 + w * p1;
  }
};

inline double eval_phi(const Nonlinearity& nl, double t) { return nl.phi(t); }

// Phi_R(t) = R phi(t) + t and eta_R = R eta + 1.
struct RescaledNonlinearity {
  Nonlinearity base;
  double R = 1.0;

  RescaledNonlinearity() = default;
  RescaledNonlinearity(Nonlinearity b, double r) : base(std::move(b)), R(r) {
    if (!(R > 0.0 && R <= 1.0)) throw ConfigError("R must lie in (0, 1]");
  }

  double Phi(double t) const { return R * base.phi(t) + t; }
  double eta_R(double t) const { return R * base.eta(t) + 1.0; }
  // drift of the rescaled equation, phi_R = R phi
  double drift(double t) const { return R * base.phi(t); }
  double ddrift(double t) const { return R * base.dphi(t); }
};

inline double eval_phi_R(const RescaledNonlinearity& rnl, double t) {
  if (!(t >= 0.0)) throw DomainError("Phi_R evaluated at negative t");
  return rnl.Phi(t);
}

// Two-column CSV "t,phi" with optional header line.
inline Nonlinearity load_phi_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open phi table '" + path + "'");
  std::vector<double> t, p;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    double a = 0.0, b = 0.0;
    if (!(ss >> a >> b)) {
      if (t.empty() && lineno == 1) continue;
      throw ConfigError("malformed phi table line " + std::to_string(lineno) + " in '" + path + "'");
    }
    t.push_back(a);
    p.push_back(b);
  }
  return Nonlinearity::tabulated(std::move(t), std::move(p));
}

inline std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw ArgumentError("log_grid needs 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * double(i) / double(n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

struct StructureReport {
  bool homogeneous = false;
  bool p1_phi_ge_t = true;
  bool p1_eta_monotone = true;
  std::optional<std::pair<double, double>> p1_first_violation;
  bool p2_tail_decreasing = true;
  double p2_tail_value = 0.0;
  double lambda0_sampled = 0.0;
  double lambda0 = 0.0;
  bool passed() const { return homogeneous || (p1_phi_ge_t && p1_eta_monotone && p2_tail_decreasing); }
};

// Thrown when a tabulated phi is not increasing.
class StructureError : public ConfigError {
public:
  StructureError(const std::string& what, double t0, double t1) : ConfigError(what), pair_{t0, t1} {}
  std::pair<double, double> pair() const { return pair_; }

private:
  std::pair<double, double> pair_;
};

inline StructureReport check_structure(const Nonlinearity& nl, const std::vector<double>& grid,
                                       double safety = 1.05) {
  if (grid.size() < 3) throw ArgumentError("structure grid needs at least three points");
  if (grid.front() > 1e-8 * (1 + 1e-12) || grid.back() < 1e8 * (1 - 1e-12))
    throw ArgumentError("structure grid must span [1e-8, 1e8]");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ArgumentError("structure grid must be increasing");

  StructureReport rep;
  if (!nl.has_drift()) {
    rep.homogeneous = true;
    return rep;
  }
  std::vector<double> ph(grid.size()), et(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ph[i] = nl.phi(grid[i]);
    et[i] = ph[i] / grid[i];
  }
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (ph[i] < ph[i - 1])
      throw StructureError("phi is not increasing between t = " + std::to_string(grid[i - 1]) +
                               " and t = " + std::to_string(grid[i]),
                           grid[i - 1], grid[i]);

  const double rtol = 1e-12;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (ph[i] < grid[i] * (1.0 - rtol)) rep.p1_phi_ge_t = false;
  for (std::size_t i = 1; i < grid.size() && rep.p1_eta_monotone; ++i) {
    double a = et[i - 1], b = et[i];
    bool bad = grid[i] <= 1.0 ? b > a * (1.0 + rtol) : (grid[i - 1] >= 1.0 && b < a * (1.0 - rtol));
    if (bad) {
      rep.p1_eta_monotone = false;
      rep.p1_first_violation = std::make_pair(grid[i - 1], grid[i]);
    }
  }

  // tail of q(t) = t eta'(t)/eta(t) log eta(t), eta' by centred differences in log t
  std::vector<double> q;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    if (grid[i] <= 1.0) continue;
    double dl = std::log(et[i + 1]) - std::log(et[i - 1]);
    double ds = std::log(grid[i + 1]) - std::log(grid[i - 1]);
    q.push_back(dl / ds * std::log(et[i]));
  }
  std::size_t tail = std::max<std::size_t>(q.size() / 4, 2);
  if (q.size() >= tail) {
    std::size_t start = q.size() - tail;
    for (std::size_t i = start + 1; i < q.size(); ++i)
      if (std::abs(q[i]) > std::abs(q[i - 1]) * (1.0 + 1e-9) + 1e-14) rep.p2_tail_decreasing = false;
    rep.p2_tail_value = q.back();
  }

  // brute-force submultiplicativity on a 50 x 50 subgrid of the sample range
  auto sub = log_grid(grid.front(), grid.back(), 50);
  double worst = 0.0;
  for (double s : sub)
    for (double t : sub) {
      double st = s * t;
      if (nl.kind == PhiKind::tabulated && (st < nl.table_min() || st > nl.table_max())) continue;
      worst = std::max(worst, nl.eta(st) / (nl.eta(s) * nl.eta(t)));
    }
  rep.lambda0_sampled = worst;
  rep.lambda0 = worst * safety;
  return rep;
}

enum class OsgoodVerdict { diverges, converges, indeterminate };

inline std::string to_string(OsgoodVerdict v) {
  switch (v) {
    case OsgoodVerdict::diverges: return "diverges";
    case OsgoodVerdict::converges: return "converges";
    case OsgoodVerdict::indeterminate: return "indeterminate";
  }
  return "?";
}

struct OsgoodEnd {
  OsgoodVerdict verdict = OsgoodVerdict::indeterminate;
  std::vector<double> truncations;
  std::vector<double> partial;  // integral up to each truncation
  std::string note;
};

struct OsgoodReport {
  OsgoodEnd at_zero;
  OsgoodEnd at_infinity;
};

namespace detail {

// Increments J_k between consecutive truncations decide the verdict.
inline OsgoodVerdict classify_increments(const std::vector<double>& partial) {
  std::vector<double> J;
  double prev = 0.0;
  for (double p : partial) {
    J.push_back(p - prev);
    prev = p;
  }
  const std::size_t n = J.size();
  if (n < 4) return OsgoodVerdict::indeterminate;
  bool harmonic = true, geometric = true;
  for (std::size_t k = n - 3; k < n; ++k) {
    double a = double(k) * J[k - 1], b = double(k + 1) * J[k];
    if (!(b >= 0.9 * a) || !(J[k] > 0.0)) harmonic = false;
    if (!(J[k] <= 0.5 * J[k - 1])) geometric = false;
  }
  if (harmonic) return OsgoodVerdict::diverges;
  if (geometric) return OsgoodVerdict::converges;
  return OsgoodVerdict::indeterminate;
}

}  // namespace detail

// Classifies int_0^1 dt/phi and int_1^inf dt/phi on truncations 1e-2..1e-12 and 1e2..1e12.
inline OsgoodReport osgood_classify(const Nonlinearity& nl) {
  OsgoodReport rep;
  if (!nl.has_drift()) {
    for (auto* e : {&rep.at_zero, &rep.at_infinity}) {
      e->verdict = OsgoodVerdict::diverges;
      e->note = "phi vanishes identically; 1/phi is not integrable";
    }
    return rep;
  }
  auto inv = [&](double t) { return 1.0 / nl.phi(t); };
  auto run = [&](OsgoodEnd& e, bool zero) {
    double acc = 0.0;
    double last = 1.0;
    try {
      for (int k = 1; k <= 6; ++k) {
        double cut = zero ? std::pow(10.0, -2.0 * k) : std::pow(10.0, 2.0 * k);
        double lo = zero ? cut : last, hi = zero ? last : cut;
        acc += integrate_log_split(inv, lo, hi, nl.kinks()).value;
        e.truncations.push_back(cut);
        e.partial.push_back(acc);
        last = cut;
      }
      e.verdict = detail::classify_increments(e.partial);
    } catch (const DomainError& ex) {
      e.verdict = OsgoodVerdict::indeterminate;
      e.note = ex.what();
    }
  };
  run(rep.at_zero, true);
  run(rep.at_infinity, false);
  return rep;
}

}  // namespace hbr
