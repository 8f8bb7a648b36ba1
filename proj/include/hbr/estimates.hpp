#pragma once

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "barriers.hpp"
#include "errors.hpp"
#include "geometry.hpp"
#include "grid.hpp"
#include "harnack.hpp"
#include "nonlinearity.hpp"
#include "solver.hpp"

namespace hbr {

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json to_json(const Extended& e) {
  if (e.is_infinite()) return "inf";
  return e.value();
}

inline nlohmann::json to_json(Vec2 p) { return nlohmann::json::array({p.x, p.y}); }

// View of a grid solution u at scale s: x -> u(s x) / s.
struct ScaledField {
  const GridField* g = nullptr;
  double s = 1.0;

  ScaledField(const GridField& f, double scale = 1.0) : g(&f), s(scale) {  // NOLINT: implicit on purpose
    if (!(s > 0.0)) throw ArgumentError("field scale must be > 0");
  }

  double h() const { return g->h / s; }
  Vec2 pos(std::size_t k) const { return g->pos(k) * (1.0 / s); }
  double value(std::size_t k) const { return g->values[k] / s; }
  NodeMask mask(std::size_t k) const { return g->mask[k]; }

  std::optional<double> sample(Vec2 x) const {
    try {
      return g->sample(x * s) / s;
    } catch (const ArgumentError&) {
      return std::nullopt;
    }
  }

  bool covers(Vec2 c, double r) const {
    Vec2 lo = g->origin, hi = g->pos(g->nx - 1, g->ny - 1);
    Vec2 cs = c * s;
    double rs = r * s;
    return cs.x - rs >= lo.x - 1e-12 && cs.x + rs <= hi.x + 1e-12 && cs.y - rs >= lo.y - 1e-12 &&
           cs.y + rs <= hi.y + 1e-12;
  }

  // Window covers every point of the closed ball that keep() accepts (checked on rings of samples).
  template <class Keep>
  bool covers_part(Vec2 c, double r, Keep&& keep) const {
    Vec2 lo = g->origin * (1.0 / s), hi = g->pos(g->nx - 1, g->ny - 1) * (1.0 / s);
    const double tol = 1e-12 * std::max(1.0, r);
    for (int ring = 0; ring <= 8; ++ring)
      for (int q = 0; q < 128; ++q) {
        double a = 2.0 * std::numbers::pi * q / 128.0;
        Vec2 x = c + Vec2{std::cos(a), std::sin(a)} * (r * ring / 8.0);
        if (!keep(x)) continue;
        if (x.x < lo.x - tol || x.x > hi.x + tol || x.y < lo.y - tol || x.y > hi.y + tol) return false;
      }
    return true;
  }

  // Calls fn(k) for every node index with |pos(k) - c| <= r.
  template <class Fn>
  void for_nodes_in_ball(Vec2 c, double r, Fn&& fn) const {
    Vec2 cs = c * s;
    double rs = r * s;
    int i0 = std::max(0, int(std::floor((cs.x - rs - g->origin.x) / g->h)));
    int i1 = std::min(g->nx - 1, int(std::ceil((cs.x + rs - g->origin.x) / g->h)));
    int j0 = std::max(0, int(std::floor((cs.y - rs - g->origin.y) / g->h)));
    int j1 = std::min(g->ny - 1, int(std::ceil((cs.y + rs - g->origin.y) / g->h)));
    const double r2 = rs * rs * (1.0 + 1e-12);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) {
        Vec2 d = g->pos(i, j) - cs;
        if (d.dot(d) <= r2) fn(g->idx(i, j));
      }
  }
};

struct BallExtrema {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  std::size_t nodes = 0;
  std::size_t circle_points = 0;

  void add(double v) {
    min = std::min(min, v);
    max = std::max(max, v);
  }
  bool empty() const { return nodes + circle_points == 0; }
};

// Extremes over the closed ball: non-exterior nodes plus bilinear samples on the circle.
// keep(x) filters points (e.g. domain membership); nodes on the domain boundary always count.
template <class Keep>
BallExtrema ball_extrema(const ScaledField& u, Vec2 c, double r, Keep&& keep, int circle = 256) {
  BallExtrema e;
  u.for_nodes_in_ball(c, r, [&](std::size_t k) {
    if (u.mask(k) == NodeMask::exterior) return;
    if (u.mask(k) == NodeMask::interior && !keep(u.pos(k))) return;
    e.add(u.value(k));
    ++e.nodes;
  });
  for (int q = 0; q < circle; ++q) {
    double a = 2.0 * std::numbers::pi * q / circle;
    Vec2 x = c + Vec2{std::cos(a), std::sin(a)} * r;
    if (!keep(x)) continue;
    if (auto v = u.sample(x)) {
      e.add(*v);
      ++e.circle_points;
    }
  }
  return e;
}

inline BallExtrema ball_extrema(const ScaledField& u, Vec2 c, double r, int circle = 256) {
  return ball_extrema(u, c, r, [](Vec2) { return true; }, circle);
}

// (max - min) / max |v|; 0 for an empty or all-zero list.
inline double relative_spread(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  double scale = std::max(std::abs(*lo), std::abs(*hi));
  if (scale == 0.0) return 0.0;
  return (*hi - *lo) / scale;
}

// ---------------------------------------------------------------------------------------------

enum class Theorem {
  interior_harnack,
  carleson,
  interior_holder,
  osc_decay,
  boundary_holder,
  blowup,
  boundary_harnack,
  px_carleson,
  px_bharnack
};

inline std::string to_string(Theorem t) {
  switch (t) {
    case Theorem::interior_harnack: return "interior_harnack";
    case Theorem::carleson: return "carleson";
    case Theorem::interior_holder: return "interior_holder";
    case Theorem::osc_decay: return "osc_decay";
    case Theorem::boundary_holder: return "boundary_holder";
    case Theorem::blowup: return "blowup";
    case Theorem::boundary_harnack: return "boundary_harnack";
    case Theorem::px_carleson: return "px_carleson";
    case Theorem::px_bharnack: return "px_bharnack";
  }
  return "?";
}

struct InstanceDescriptor {
  std::string domain;
  std::string nl;
  double R = 1.0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const { return {{"domain", domain}, {"nl", nl}, {"R", R}, {"seed", seed}}; }
};

struct EstimateReport {
  Theorem theorem = Theorem::carleson;
  std::vector<InstanceDescriptor> instances;
  std::vector<double> per_instance_values;
  double fitted_constant = 0.0;  // >= every per-instance value
  double independence_spread = 0.0;
  std::vector<std::string> notes;

  void fit() {
    fitted_constant = 0.0;
    for (double v : per_instance_values) fitted_constant = std::max(fitted_constant, v);
  }

  nlohmann::json to_json() const {
    nlohmann::json inst = nlohmann::json::array();
    for (std::size_t i = 0; i < instances.size(); ++i) {
      auto j = instances[i].to_json();
      if (i < per_instance_values.size()) j["value"] = per_instance_values[i];
      inst.push_back(j);
    }
    return {{"theorem", to_string(theorem)},
            {"instances", inst},
            {"fitted_constant", fitted_constant},
            {"independence_spread", independence_spread},
            {"notes", notes}};
  }
};

// ---------------------------------------------------------------------------------------------
// interior Harnack

inline nlohmann::json to_json(const HarnackCertificate& c) {
  nlohmann::json j{{"m", c.m},       {"M", to_json(c.M)}, {"r", c.r}, {"R", c.R}, {"alpha", c.alpha},
                   {"value", to_json(c.value)}};
  j["budget"] = c.budget ? nlohmann::json(*c.budget) : nlohmann::json(nullptr);
  j["passed"] = c.passed ? nlohmann::json(*c.passed) : nlohmann::json(nullptr);
  return j;
}

// m, M over B(center, r); every node of B(center, 2r) must be interior.
inline HarnackCertificate verify_interior_harnack(const ScaledField& u, Vec2 center, double r, double R,
                                                  const Nonlinearity& nl, double alpha,
                                                  std::optional<double> budget = std::nullopt) {
  if (!(r > 0.0 && r <= 1.0)) throw ArgumentError("interior Harnack needs 0 < r <= 1");
  if (!u.covers(center, 2.0 * r)) throw ArgumentError("B(center, 2r) leaves the grid window");
  bool interior = true;
  u.for_nodes_in_ball(center, 2.0 * r, [&](std::size_t k) {
    if (dist(u.pos(k), center) < 2.0 * r * (1.0 - 1e-12)) interior = interior && u.mask(k) == NodeMask::interior;
  });
  if (!interior) throw ArgumentError("B(center, 2r) is not inside the domain");
  auto e = ball_extrema(u, center, r);
  if (e.empty()) throw ArgumentError("ball contains no grid nodes");
  if (e.min < 0.0) throw ArgumentError("field is negative inside the Harnack ball");
  if (e.max - e.min <= 1e-14 * std::abs(e.max)) e.min = e.max;  // interpolation rounding on flat data
  HarnackCertificate c;
  c.m = e.min;
  c.M = Extended(e.max);
  c.r = r;
  c.R = R;
  c.alpha = alpha;
  c.value = harnack_integral_rescaled(e.min, e.max, r, R, alpha, nl);
  c.budget = budget;
  if (budget) c.passed = !c.value.is_infinite() && c.value.value() <= *budget;
  return c;
}

// ---------------------------------------------------------------------------------------------
// Carleson

inline std::vector<double> carleson_trial_grid() { return {2, 4, 8, 16, 32, 64, 128, 256}; }

struct CarlesonTrial {
  double C = 0.0;
  double M = 0.0;      // sup over B(w, 1/C) and the domain
  double value = 0.0;  // int_{u(A)}^{M} dt / Phi_R, negative when M < u(A)
  bool infinite = false;
  bool passes = false;  // value <= C
};

struct CarlesonResult {
  double R = 1.0;
  Vec2 w{};
  Vec2 A{};
  double A_clearance = 0.0;
  double uA = 0.0;
  std::vector<CarlesonTrial> trials;
  std::optional<double> C_fit;  // smallest passing trial constant
  double probe_M = 0.0;         // sup over B(w, 1)
  double probe_value = 0.0;     // signed integral from u(A) to probe_M
  bool strong_min_caveat = false;
  std::vector<std::string> notes;

  nlohmann::json to_json() const {
    nlohmann::json t = nlohmann::json::array();
    for (auto& x : trials)
      t.push_back({{"C", x.C},
                   {"M", x.M},
                   {"value", x.infinite ? nlohmann::json("inf") : nlohmann::json(x.value)},
                   {"passes", x.passes}});
    return {{"R", R},
            {"w", hbr::to_json(w)},
            {"A", hbr::to_json(A)},
            {"A_clearance", A_clearance},
            {"uA", uA},
            {"trials", t},
            {"C_fit", C_fit ? nlohmann::json(*C_fit) : nlohmann::json(nullptr)},
            {"probe", {{"M", probe_M}, {"value", probe_value}}},
            {"strong_min_caveat", strong_min_caveat},
            {"notes", notes}};
  }
};

namespace detail {

// int_a^b dt / Phi_R with orientation; infinite results reported through `inf`.
inline double signed_carleson(double a, double b, const RescaledNonlinearity& rnl, bool& inf) {
  inf = false;
  if (a == b) return 0.0;
  double lo = std::min(a, b), hi = std::max(a, b);
  auto e = carleson_integral(lo, hi, rnl);
  if (e.is_infinite()) {
    inf = true;
    return b > a ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
  }
  return b > a ? e.value() : -e.value();
}

}  // namespace detail

// u is the rescaled solution u_R; A is the corkscrew point of w at scale 1 in rescaled coordinates.
// dom_original is the domain before rescaling, so the corkscrew is taken at radius R and divided by R.
inline CarlesonResult verify_carleson(const ScaledField& u, const DomainSpec& dom_original, double R,
                                      const Nonlinearity& nl, Vec2 w_original = {},
                                      std::vector<double> C_grid = carleson_trial_grid()) {
  RescaledNonlinearity rnl(nl, R);
  CarlesonResult res;
  res.R = R;
  res.w = w_original * (1.0 / R);
  auto ck = corkscrew(dom_original, w_original, R);
  res.A = ck.point * (1.0 / R);
  res.A_clearance = ck.clearance / R;
  auto uA = u.sample(res.A);
  if (!uA) throw ArgumentError("corkscrew point is not covered by the field");
  res.uA = *uA;
  if (res.uA < 0.0) throw ArgumentError("u(A) < 0: Carleson needs a non-negative solution");
  if (res.uA == 0.0) {
    res.strong_min_caveat = true;
    auto osg = osgood_classify(nl);
    if (osg.at_zero.verdict != OsgoodVerdict::diverges)
      res.notes.push_back("u(A) = 0 with a non-Osgood phi: the strong minimum principle may fail");
    else
      res.notes.push_back("u(A) = 0 although phi is Osgood at 0; u vanishes identically near A");
  }
  auto inside = [&](Vec2 x) { return dom_original.inside(x * R); };
  auto sup_over = [&](double rad) {
    if (!u.covers_part(res.w, rad, inside)) throw ArgumentError("Carleson ball leaves the grid window");
    auto e = ball_extrema(u, res.w, rad, inside);
    return e.empty() ? 0.0 : std::max(0.0, e.max);
  };
  for (double C : C_grid) {
    if (!(C > 0.0)) throw ArgumentError("trial constants must be positive");
    CarlesonTrial t;
    t.C = C;
    t.M = sup_over(1.0 / C);
    t.value = detail::signed_carleson(res.uA, t.M, rnl, t.infinite);
    t.passes = !(t.infinite && t.value > 0.0) && t.value <= C;
    res.trials.push_back(t);
  }
  for (auto& t : res.trials)
    if (t.passes && (!res.C_fit || t.C < *res.C_fit)) res.C_fit = t.C;
  if (!res.C_fit) res.notes.push_back("no trial constant passes");
  res.probe_M = sup_over(1.0);
  bool inf = false;
  res.probe_value = detail::signed_carleson(res.uA, res.probe_M, rnl, inf);
  if (inf) res.notes.push_back("probe integral is infinite");
  return res;
}

// ---------------------------------------------------------------------------------------------
// oscillation decay

struct OscRung {
  double rho = 0.0;
  double osc = 0.0, osc_half = 0.0;
  double ratio = 0.0;  // osc_half / osc
  double drift = 0.0;  // Phi_R(M) sqrt(rho)
  double slack = 0.0;  // tau osc + C drift - osc_half
};

struct OscDecayFit {
  double tau = 0.0, C = 0.0;
  double C_at_half = 0.0;  // C needed with tau = 1/2
  double M = 0.0;
  double min_rung = 0.0;
  std::vector<OscRung> rungs;

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (auto& x : rungs)
      r.push_back({{"rho", x.rho}, {"osc", x.osc}, {"osc_half", x.osc_half}, {"ratio", x.ratio}, {"drift", x.drift},
                   {"slack", x.slack}});
    return {{"tau", tau}, {"C", C}, {"C_at_half", C_at_half}, {"M", M}, {"min_rung", min_rung}, {"rungs", r}};
  }
};

// Rungs rho_k = r 2^-k with rho_k >= min_rung (default 8h). tau is the largest rung ratio, C = 0.
inline OscDecayFit verify_osc_decay(const ScaledField& u, Vec2 x0, double r, double R, const Nonlinearity& nl,
                                    std::optional<double> min_rung = std::nullopt) {
  RescaledNonlinearity rnl(nl, R);
  OscDecayFit fit;
  fit.min_rung = min_rung.value_or(8.0 * u.h());
  if (!(r >= fit.min_rung)) throw ArgumentError("ladder start r is below the rung floor");
  bool interior = true;
  if (!u.covers(x0, r)) throw ArgumentError("oscillation ball leaves the grid window");
  u.for_nodes_in_ball(x0, r, [&](std::size_t k) { interior = interior && u.mask(k) == NodeMask::interior; });
  if (!interior) throw ArgumentError("oscillation ball is not interior");
  auto top = ball_extrema(u, x0, r);
  fit.M = top.max;
  const double PhiM = rnl.Phi(std::max(0.0, fit.M));
  for (double rho = r; rho >= fit.min_rung; rho /= 2.0) {
    auto a = ball_extrema(u, x0, rho), b = ball_extrema(u, x0, rho / 2.0);
    OscRung g;
    g.rho = rho;
    // rounding-level oscillation counts as none
    const double noise = 1e-13 * std::max(1.0, std::abs(fit.M));
    g.osc = a.max - a.min > noise ? a.max - a.min : 0.0;
    g.osc_half = b.max - b.min > noise ? b.max - b.min : 0.0;
    g.ratio = g.osc > 0.0 ? g.osc_half / g.osc : 0.0;
    g.drift = PhiM * std::sqrt(rho);
    fit.rungs.push_back(g);
  }
  for (auto& g : fit.rungs) {
    fit.tau = std::max(fit.tau, g.ratio);
    if (g.drift > 0.0) fit.C_at_half = std::max(fit.C_at_half, (g.osc_half - 0.5 * g.osc) / g.drift);
  }
  if (!(fit.tau < 1.0))
    throw NumericalFailure("oscillation decay: no tau < 1 fits (largest rung ratio " + std::to_string(fit.tau) + ")");
  for (auto& g : fit.rungs) g.slack = fit.tau * g.osc + fit.C * g.drift - g.osc_half;
  return fit;
}

// ---------------------------------------------------------------------------------------------
// boundary Holder

struct HolderRung {
  double rho = 0.0;
  double sup = 0.0;
  double bound_unit = 0.0;  // M (rho/r)^alpha + Phi_R(M) rho^{2 alpha} r^{2 alpha}
  double slack = 0.0;       // C1 bound_unit - sup
};

struct HolderFit {
  double C1 = 0.0, alpha = 0.0, alpha_raw = 0.0;
  bool alpha_at_upper_edge = false, alpha_at_lower_edge = false;
  bool trivial = false;  // u vanishes on every rung
  double M = 0.0;
  double delta = 0.0;
  std::vector<HolderRung> rungs;

  nlohmann::json to_json() const {
    nlohmann::json r = nlohmann::json::array();
    for (auto& x : rungs) r.push_back({{"rho", x.rho}, {"sup", x.sup}, {"bound_unit", x.bound_unit}, {"slack", x.slack}});
    return {{"C1", C1},
            {"alpha", alpha},
            {"alpha_raw", alpha_raw},
            {"alpha_window", {0.0, 0.125}},
            {"alpha_at_upper_edge", alpha_at_upper_edge},
            {"alpha_at_lower_edge", alpha_at_lower_edge},
            {"trivial", trivial},
            {"M", M},
            {"delta", delta},
            {"rungs", r}};
  }
};

inline constexpr double kHolderAlphaLo = 0.005, kHolderAlphaHi = 0.12;

// u is the solution at unit scale of dom; x0 on the boundary. alpha is the least-squares slope of
// log(sup/M) against log(rho/r), clipped to [0.005, 0.12]; C1 is the smallest constant passing every rung.
inline HolderFit verify_boundary_holder(const ScaledField& u, const DomainSpec& dom, Vec2 x0, double r, double R,
                                        const Nonlinearity& nl, std::optional<double> min_rung = std::nullopt,
                                        double flatness_ds = 1e-3) {
  RescaledNonlinearity rnl(nl, R);
  HolderFit fit;
  fit.delta = reifenberg_delta(dom, x0, r, flatness_ds * r).delta;
  if (fit.delta > 0.01)
    throw PreconditionError("boundary Holder needs delta <= 1/100; measured delta = " + std::to_string(fit.delta));
  auto inside = [&](Vec2 x) { return dom.inside(x); };
  if (!u.covers_part(x0, r, inside)) throw ArgumentError("Holder ball leaves the grid window");
  bool zero = true;
  u.for_nodes_in_ball(x0, r, [&](std::size_t k) {
    if (u.mask(k) == NodeMask::boundary && !dom.inside(u.pos(k)) && std::abs(u.value(k)) > 1e-12) zero = false;
  });
  if (!zero) throw PreconditionError("boundary data does not vanish on the boundary inside B(x0, r)");
  fit.M = std::max(0.0, ball_extrema(u, x0, r, inside).max);
  const double floor = min_rung.value_or(2.0 * u.h());
  std::vector<double> xs, ys;
  for (double rho = r / 2.0; rho >= floor; rho /= 2.0) {
    HolderRung g;
    g.rho = rho;
    g.sup = std::max(0.0, ball_extrema(u, x0, rho, inside).max);
    fit.rungs.push_back(g);
    if (g.sup > 0.0 && fit.M > 0.0) {
      xs.push_back(std::log(rho / r));
      ys.push_back(std::log(g.sup / fit.M));
    }
  }
  if (fit.rungs.empty()) throw ArgumentError("no Holder rungs above the floor");
  fit.trivial = fit.M == 0.0;
  if (xs.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= double(xs.size());
    my /= double(xs.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    fit.alpha_raw = sxx > 0.0 ? sxy / sxx : 0.0;
  } else {
    fit.alpha_raw = fit.trivial ? 1.0 : 0.0;
  }
  fit.alpha = std::clamp(fit.alpha_raw, kHolderAlphaLo, kHolderAlphaHi);
  fit.alpha_at_upper_edge = fit.alpha_raw >= kHolderAlphaHi;
  fit.alpha_at_lower_edge = fit.alpha_raw <= kHolderAlphaLo;
  const double PhiM = rnl.Phi(fit.M);
  for (auto& g : fit.rungs) {
    g.bound_unit = fit.M * std::pow(g.rho / r, fit.alpha) + PhiM * std::pow(g.rho, 2 * fit.alpha) * std::pow(r, 2 * fit.alpha);
    if (g.bound_unit > 0.0) fit.C1 = std::max(fit.C1, g.sup / g.bound_unit);
  }
  for (auto& g : fit.rungs) g.slack = fit.C1 * g.bound_unit - g.sup;
  return fit;
}

// ---------------------------------------------------------------------------------------------
// blow-up profile

struct BlowupReport {
  double R = 1.0, alpha = 0.0, delta_trial = 0.0, C2 = 0.0;
  Vec2 A{};
  double uA = 0.0;
  double M = 0.0;  // sup over the cap
  Extended integral_to_M;
  std::vector<double> s, M_s;
  bool monotone = true;
  std::optional<double> S;  // largest ladder s with s^alpha eta_R(M_s) <= delta_trial
  double M_S = 0.0;
  double gamma = 0.0;  // smallest gamma with M_s <= (S/s)^gamma M_S for ladder s < S
  std::string alternative;  // "S0", "S1-S3", "none"
  bool S1 = false, S3 = false;
  std::vector<std::string> notes;

  nlohmann::json to_json() const {
    return {{"R", R},
            {"alpha", alpha},
            {"delta_trial", delta_trial},
            {"C2", C2},
            {"A", hbr::to_json(A)},
            {"uA", uA},
            {"M", M},
            {"integral_to_M", hbr::to_json(integral_to_M)},
            {"s", s},
            {"M_s", M_s},
            {"monotone", monotone},
            {"S", S ? nlohmann::json(*S) : nlohmann::json(nullptr)},
            {"M_S", M_S},
            {"gamma", gamma},
            {"alternative", alternative},
            {"S1", S1},
            {"S3", S3},
            {"notes", notes}};
  }
};

// u at unit scale of dom (boundary point 0). Ladder s_k = s_tilde 2^-k down to the grid spacing.
inline BlowupReport blowup_profile(const ScaledField& u, const DomainSpec& dom, double R, const Nonlinearity& nl,
                                   double alpha, double delta_trial = 0.5, double C2 = 16.0) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in (0, 1)");
  if (!(delta_trial > 0.0)) throw ArgumentError("delta_trial must be > 0");
  RescaledNonlinearity rnl(nl, R);
  BlowupReport rep;
  rep.R = R;
  rep.alpha = alpha;
  rep.delta_trial = delta_trial;
  rep.C2 = C2;
  auto cap = retracted_cap(dom, 0.0);
  // distance to Gamma once per cap node, so nested sets share one node list
  std::vector<std::pair<double, double>> nodes;  // (distance to Gamma, value)
  bool clipped = false;
  for (std::size_t k = 0; k < u.g->size(); ++k) {
    if (u.mask(k) != NodeMask::interior) continue;
    Vec2 x = u.pos(k);
    if (!cap.in_cap(x)) continue;
    nodes.push_back({cap.gamma_distance(x), u.value(k)});
  }
  if (!u.covers_part({0.0, 0.0}, RetractedCap::cap_radius, [&](Vec2 x) { return dom.inside(x); })) clipped = true;
  if (clipped) rep.notes.push_back("grid window clips the cap ball; suprema use the covered part");
  if (nodes.empty()) throw ArgumentError("no grid node lies in the cap");
  for (auto& [d, v] : nodes) rep.M = std::max(rep.M, v);
  auto ck = corkscrew(dom, {0.0, 0.0}, 1.0);
  rep.A = ck.point;
  auto uA = u.sample(rep.A);
  if (!uA) throw ArgumentError("corkscrew point is not covered by the field");
  rep.uA = *uA;
  rep.integral_to_M = rep.M > rep.uA ? carleson_integral(std::max(rep.uA, 0.0), rep.M, rnl) : Extended(0.0);

  const double floor = u.h();
  for (double s = cap_s_tilde(); s >= floor; s /= 2.0) {
    double Ms = -std::numeric_limits<double>::infinity();
    for (auto& [d, v] : nodes)
      if (d >= s) Ms = std::max(Ms, v);
    if (!std::isfinite(Ms)) {
      rep.notes.push_back("retracted cap empty at s = " + std::to_string(s) + "; ladder truncated");
      continue;
    }
    rep.s.push_back(s);
    rep.M_s.push_back(Ms);
  }
  // s decreases along the ladder, so M_s must not decrease
  for (std::size_t i = 1; i < rep.M_s.size(); ++i) rep.monotone = rep.monotone && rep.M_s[i] >= rep.M_s[i - 1];

  for (std::size_t i = 0; i < rep.s.size(); ++i)
    if (std::pow(rep.s[i], alpha) * rnl.eta_R(rep.M_s[i]) <= delta_trial) {
      rep.S = rep.s[i];
      rep.M_S = rep.M_s[i];
      for (std::size_t j = i + 1; j < rep.s.size(); ++j)
        if (rep.M_S > 0.0 && rep.M_s[j] > rep.M_S)
          rep.gamma = std::max(rep.gamma, std::log(rep.M_s[j] / rep.M_S) / std::log(*rep.S / rep.s[j]));
      break;
    }

  if (!rep.integral_to_M.is_infinite() && rep.integral_to_M.value() <= C2) {
    rep.alternative = "S0";
  } else if (rep.S) {
    auto I1 = rep.M_S > rep.uA ? carleson_integral(std::max(rep.uA, 0.0), rep.M_S, rnl) : Extended(0.0);
    rep.S1 = !I1.is_infinite() && I1.value() <= C2;
    rep.S3 = true;
    for (std::size_t i = 0; i < rep.s.size(); ++i)
      if (rep.s[i] < *rep.S) rep.S3 = rep.S3 && std::pow(rep.s[i], alpha) * rnl.eta_R(rep.M_s[i]) <= C2;
    rep.alternative = rep.S1 && rep.S3 ? "S1-S3" : "none";
  } else {
    rep.alternative = "none";
    rep.notes.push_back("no ladder s satisfies s^alpha eta_R(M_s) <= delta_trial");
  }
  return rep;
}

// ---------------------------------------------------------------------------------------------
// boundary Harnack

struct BoundaryHarnackReport {
  double R = 1.0;
  double uA = 0.0, vA = 0.0;
  double A_mismatch = 0.0;  // |v(A)/u(A) - 1|
  double m_u = 0.0, M_v = 0.0;
  std::string branch;
  double Ctilde = 0.0;
  double mu0 = 0.0;
  Extended mu1;
  Extended mu_integral;
  double sup_ratio = 0.0;
  Extended ratio_bound;  // mu1 / mu0
  bool ratio_within_bound = false;
  double exclusion_threshold = 0.0;
  std::size_t excluded = 0, counted = 0;
  double ball_radius = 0.5;
  std::vector<std::string> notes;

  nlohmann::json to_json() const {
    return {{"R", R},
            {"uA", uA},
            {"vA", vA},
            {"A_mismatch", A_mismatch},
            {"m_u", m_u},
            {"M_v", M_v},
            {"branch", branch},
            {"Ctilde", Ctilde},
            {"mu0", mu0},
            {"mu1", hbr::to_json(mu1)},
            {"mu_integral", hbr::to_json(mu_integral)},
            {"sup_ratio", sup_ratio},
            {"ratio_bound", hbr::to_json(ratio_bound)},
            {"ratio_within_bound", ratio_within_bound},
            {"exclusion_threshold", exclusion_threshold},
            {"excluded_nodes", excluded},
            {"counted_nodes", counted},
            {"ball_radius", ball_radius},
            {"notes", notes}};
  }
};

// Flat geometry: dom must be the half-space. u and v are rescaled solutions on windows covering
// B(2e2, 1) and B(-e2, 3) within the domain. The ratio sup runs over B(0, 1/C) without nodes where u < 10 tol.
inline BoundaryHarnackReport verify_boundary_harnack(const ScaledField& u, const ScaledField& v, const DomainSpec& dom,
                                                     double R, const Nonlinearity& nl, const EllipticityPair& ell,
                                                     double tol_solve, double C = 2.0, int mesh = 4096) {
  if (dom.kind != DomainKind::half_space) throw ArgumentError("boundary Harnack barriers need the flat half-space");
  RescaledNonlinearity rnl(nl, R);
  BoundaryHarnackReport rep;
  rep.R = R;
  rep.ball_radius = 1.0 / C;
  auto ck = corkscrew(dom, {0.0, 0.0}, 1.0);
  auto ua = u.sample(ck.point), va = v.sample(ck.point);
  if (!ua || !va) throw ArgumentError("corkscrew point is not covered by the fields");
  rep.uA = *ua;
  rep.vA = *va;
  if (!(rep.uA > 0.0)) throw ArgumentError("u(A) must be > 0");
  rep.A_mismatch = std::abs(rep.vA / rep.uA - 1.0);
  if (rep.A_mismatch > 1e-6) rep.notes.push_back("v(A) differs from u(A); the hypothesis v(A) = u(A) is not met");

  auto inside = [&](Vec2 x) { return dom.inside(x); };
  Vec2 x1{0.0, 2.0}, x0{0.0, -1.0};
  if (!u.covers(x1, 1.0)) throw ArgumentError("u does not cover B(2 e2, 1)");
  if (!v.covers_part(x0, 3.0, inside))
    throw ArgumentError("v does not cover B(-e2, 3) within the domain");
  rep.m_u = ball_extrema(u, x1, 1.0).min;
  rep.M_v = std::max(0.0, ball_extrema(v, x0, 3.0, inside).max);
  if (!(rep.m_u > 0.0)) throw ArgumentError("m_u must be > 0");
  if (rep.M_v < rep.m_u) {
    rep.notes.push_back("M_v < m_u; M_v raised to m_u");
    rep.M_v = rep.m_u;
  }
  auto bh = boundary_harnack_barriers(rep.m_u, rep.M_v, rep.uA, ell, rnl, mesh);
  rep.branch = bh.branch;
  rep.Ctilde = bh.Ctilde;
  rep.mu0 = bh.mu0;
  rep.mu1 = bh.mu1;
  rep.mu_integral = bh.mu_integral;
  if (bh.branch == "mu0_zero") rep.notes.push_back("int_0^{m_u/3} ds/Phi_R < 4 Ct: mu0 = 0 and mu1 = u(A)");
  if (bh.branch == "mu1_infinite") rep.notes.push_back("int_{M_v}^inf ds/Phi_R < 2 Ct: mu1 = infinity");
  if (rep.mu0 == 0.0 || rep.mu1.is_infinite())
    rep.ratio_bound = Extended::infinity("mu0 = 0 or mu1 = infinity");
  else
    rep.ratio_bound = Extended(rep.mu1.value() / rep.mu0);

  rep.exclusion_threshold = 10.0 * tol_solve;
  double best = 0.0;
  u.for_nodes_in_ball({0.0, 0.0}, rep.ball_radius, [&](std::size_t k) {
    if (u.mask(k) == NodeMask::exterior) return;
    double uk = u.value(k);
    if (uk < rep.exclusion_threshold) {
      ++rep.excluded;
      return;
    }
    auto vk = v.sample(u.pos(k));
    if (!vk) return;
    ++rep.counted;
    best = std::max(best, *vk / uk);
  });
  rep.sup_ratio = best;
  rep.ratio_within_bound = rep.ratio_bound.is_infinite() || rep.sup_ratio <= rep.ratio_bound.value() * (1.0 + 1e-12);
  return rep;
}

// ---------------------------------------------------------------------------------------------
// p(x) corollaries

struct PxCorollaryReport {
  double R = 1.0, C = 1.0;
  double uA = 0.0;
  double sup = 0.0;  // over B(0, R/C) and the domain
  double carleson_bound = 0.0;
  bool carleson_passes = false;
  double carleson_margin = 0.0;
  std::optional<double> bharnack_bound;

  nlohmann::json to_json() const {
    return {{"R", R},
            {"C", C},
            {"uA", uA},
            {"sup", sup},
            {"carleson_bound", carleson_bound},
            {"carleson_passes", carleson_passes},
            {"carleson_margin", carleson_margin},
            {"bharnack_bound", bharnack_bound ? nlohmann::json(*bharnack_bound) : nlohmann::json(nullptr)}};
  }
};

// u in original coordinates (scale 1); A_R is the corkscrew of 0 at radius R.
inline PxCorollaryReport px_corollary_check(const ScaledField& u, const DomainSpec& dom, double R, double C,
                                            Vec2 w = {}) {
  PxCorollaryReport rep;
  rep.R = R;
  rep.C = C;
  auto ck = corkscrew(dom, w, R);
  auto uA = u.sample(ck.point);
  if (!uA) throw ArgumentError("corkscrew point is not covered by the field");
  rep.uA = *uA;
  if (!u.covers_part(w, R / C, [&](Vec2 x) { return dom.inside(x); })) throw ArgumentError("B(w, R/C) leaves the grid window");
  rep.sup = std::max(0.0, ball_extrema(u, w, R / C, [&](Vec2 x) { return dom.inside(x); }).max);
  rep.carleson_bound = px_carleson_bound(rep.uA, R, C);
  rep.carleson_margin = rep.carleson_bound - rep.sup;
  rep.carleson_passes = rep.carleson_margin >= 0.0;
  if (rep.uA > 0.0) rep.bharnack_bound = px_bharnack_bound(rep.uA, R, C);
  return rep;
}

// ---------------------------------------------------------------------------------------------
// instance family

struct BoundaryProfile {
  double amplitude = 1.0, wave = 1.0, phase = 0.0;
  double operator()(double x) const { return amplitude * (1.0 + 0.5 * std::sin(wave * x + phase)); }
};

inline BoundaryProfile boundary_profile(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&] { return double(rng() >> 11) * 0x1.0p-53; };
  BoundaryProfile p;
  p.amplitude = 0.5 + 1.5 * unit();
  p.wave = 1.0 + std::floor(3.0 * unit());
  p.phase = 2.0 * std::numbers::pi * unit();
  return p;
}

// Zigzag graph through 0 with slopes +-l and teeth of the given width, on [-extent, extent].
inline DomainSpec zigzag_graph(double l, double width = 0.5, double extent = 4.0) {
  std::vector<double> xs, ys;
  int n = int(std::lround(extent / width));
  for (int i = -n; i <= n; ++i) {
    xs.push_back(i * width);
    ys.push_back((std::abs(i) % 2) ? l * width : 0.0);
  }
  return DomainSpec::graph(xs, ys);
}

struct FamilyDomain {
  std::string name;
  DomainSpec dom;
  Vec2 lo, hi;
  // zero on the boundary within B(0, 2), positive on the rest of the window frame
  std::function<double(Vec2, const BoundaryProfile&)> data;
};

inline FamilyDomain family_domain(const std::string& name, double graph_l = 0.1, double half_width = 2.5,
                                  double height = 2.5) {
  FamilyDomain f;
  f.name = name;
  if (name == "half_space" || name == "lipschitz_graph") {
    f.dom = name == "half_space" ? DomainSpec::half_space() : zigzag_graph(graph_l);
    double gmin = 0.0;
    if (name == "lipschitz_graph")
      for (double y : f.dom.gy) gmin = std::min(gmin, y);
    f.lo = {-half_width, gmin};
    f.hi = {half_width, height};
    DomainSpec d = f.dom;
    f.data = [d, height](Vec2 p, const BoundaryProfile& a) {
      double g = d.kind == DomainKind::half_space ? 0.0 : d.g(p.x);
      return a(p.x) * std::clamp((p.y - g) / (height - g), 0.0, 1.0);
    };
  } else if (name == "cube") {
    f.dom = DomainSpec::cube(-1.5, 1.5, 0.0, 3.0);
    f.lo = {-1.5, 0.0};
    f.hi = {1.5, 3.0};
    const double far = std::hypot(1.5, 3.0);
    f.data = [far](Vec2 p, const BoundaryProfile& a) {
      return a(p.x) * std::clamp((p.norm() - 2.0) / (far - 2.0), 0.0, 1.0);
    };
  } else {
    throw ConfigError("unknown family domain '" + name + "'");
  }
  return f;
}

struct FamilyConfig {
  double h = 1.0 / 64.0;
  EllipticityPair ell{1.0, 2.0};
  OperatorKind op = OperatorKind::pucci_minus_drift;
  std::vector<std::string> domains{"half_space", "lipschitz_graph", "cube"};
  std::vector<Nonlinearity> nls{Nonlinearity::homogeneous(), Nonlinearity::linear(), Nonlinearity::log_model()};
  std::vector<double> Rs{1.0, 0.5, 0.25};
  std::vector<std::uint64_t> seeds{11, 23, 37};
  double graph_l = 0.1;
  double alpha = 0.0;  // Harnack exponent
  double spread_limit = 0.3;
  SolverOptions solver{};
};

struct FamilyInstance {
  InstanceDescriptor d;
  CarlesonResult carleson;
  HarnackCertificate harnack;
  Vec2 harnack_center{};
};

struct FamilyGroup {
  std::string domain, nl;
  std::uint64_t seed = 0;
  std::vector<double> Rs;
  std::vector<double> carleson_C;       // smallest passing trial constant per R
  std::vector<double> carleson_probe;   // raw integral over B(0, 1) per R
  std::vector<double> harnack;          // certificate value per R
  double spread_carleson = 0.0, spread_harnack = 0.0, spread_probe = 0.0;
  bool independent = false;  // both constant spreads within the limit
};

struct FamilyReport {
  FamilyConfig config;
  std::vector<FamilyInstance> instances;
  std::vector<FamilyGroup> groups;
  std::vector<nlohmann::json> solves;
  EstimateReport carleson, harnack;
  bool independence_holds = false;
  double worst_spread = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json inst = nlohmann::json::array(), grp = nlohmann::json::array();
    for (auto& i : instances)
      inst.push_back({{"instance", i.d.to_json()},
                      {"carleson", i.carleson.to_json()},
                      {"harnack", hbr::to_json(i.harnack)},
                      {"harnack_center", hbr::to_json(i.harnack_center)}});
    for (auto& g : groups)
      grp.push_back({{"domain", g.domain},
                     {"nl", g.nl},
                     {"seed", g.seed},
                     {"R", g.Rs},
                     {"carleson_C", g.carleson_C},
                     {"carleson_probe", g.carleson_probe},
                     {"harnack", g.harnack},
                     {"spread_carleson_C", g.spread_carleson},
                     {"spread_harnack", g.spread_harnack},
                     {"spread_carleson_probe", g.spread_probe},
                     {"independent", g.independent}});
    return {{"h", config.h},
            {"spread_limit", config.spread_limit},
            {"instances", inst},
            {"groups", grp},
            {"solves", solves},
            {"carleson", carleson.to_json()},
            {"harnack", harnack.to_json()},
            {"independence_holds", independence_holds},
            {"worst_spread", worst_spread}};
  }

  // one row per instance
  std::string csv() const {
    std::ostringstream out;
    out << std::setprecision(12);
    out << "domain,nl,seed,R,uA,carleson_C_fit,carleson_probe,harnack_m,harnack_M,harnack_value\n";
    for (auto& i : instances) {
      out << i.d.domain << ',' << i.d.nl << ',' << i.d.seed << ',' << i.d.R << ',' << i.carleson.uA << ','
          << (i.carleson.C_fit ? std::to_string(*i.carleson.C_fit) : std::string("none")) << ','
          << i.carleson.probe_value << ',' << i.harnack.m << ',' << i.harnack.M.value_or(-1) << ','
          << i.harnack.value.value_or(-1) << '\n';
    }
    return out.str();
  }
};

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  threads = std::max(1, std::min<int>(threads, int(n)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errs(n);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          errs[i] = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
}

// One solve per (domain, nl, seed) at unit scale; each R reads the rescaled view u(R x) / R.
inline FamilyReport run_instance_family(const FamilyConfig& cfg, int threads = 1) {
  struct Job {
    std::size_t d, n, s;
  };
  std::vector<Job> jobs;
  for (std::size_t d = 0; d < cfg.domains.size(); ++d)
    for (std::size_t n = 0; n < cfg.nls.size(); ++n)
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) jobs.push_back({d, n, s});

  FamilyReport rep;
  rep.config = cfg;
  std::vector<std::vector<FamilyInstance>> per_job(jobs.size());
  std::vector<nlohmann::json> solve_diag(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t q) {
    const auto& job = jobs[q];
    auto fd = family_domain(cfg.domains[job.d], cfg.graph_l);
    const auto& nl = cfg.nls[job.n];
    auto prof = boundary_profile(cfg.seeds[job.s]);
    auto grid = rasterize(fd.dom, fd.lo, fd.hi, cfg.h, [&](Vec2 p) { return fd.data(p, prof); });
    Problem prob;
    prob.op = cfg.op;
    prob.ell = cfg.ell;
    prob.nl = RescaledNonlinearity(nl, 1.0);
    auto sol = solve_dirichlet(prob, grid, cfg.solver);
    solve_diag[q] = {{"domain", fd.name},
                     {"nl", to_string(nl.kind)},
                     {"seed", cfg.seeds[job.s]},
                     {"iterations", sol.diag.iterations},
                     {"final_residual", sol.diag.final_residual},
                     {"nodes", sol.field.count(NodeMask::interior)}};
    for (double R : cfg.Rs) {
      FamilyInstance fi;
      fi.d = {fd.name, to_string(nl.kind), R, cfg.seeds[job.s]};
      ScaledField uR(sol.field, R);
      fi.carleson = verify_carleson(uR, fd.dom, R, nl);
      fi.harnack_center = fi.carleson.A;
      double r = std::min(1.0, 0.4 * fi.carleson.A_clearance);
      fi.harnack = verify_interior_harnack(uR, fi.harnack_center, r, R, nl, cfg.alpha);
      per_job[q].push_back(std::move(fi));
    }
  });

  rep.carleson.theorem = Theorem::carleson;
  rep.harnack.theorem = Theorem::interior_harnack;
  rep.independence_holds = true;
  for (std::size_t q = 0; q < jobs.size(); ++q) {
    rep.solves.push_back(solve_diag[q]);
    FamilyGroup g;
    g.domain = per_job[q].front().d.domain;
    g.nl = per_job[q].front().d.nl;
    g.seed = per_job[q].front().d.seed;
    bool all_fit = true;
    for (auto& fi : per_job[q]) {
      g.Rs.push_back(fi.d.R);
      all_fit = all_fit && fi.carleson.C_fit.has_value();
      g.carleson_C.push_back(fi.carleson.C_fit.value_or(std::numeric_limits<double>::infinity()));
      g.carleson_probe.push_back(fi.carleson.probe_value);
      g.harnack.push_back(fi.harnack.value.value_or(std::numeric_limits<double>::infinity()));
      rep.carleson.instances.push_back(fi.d);
      rep.carleson.per_instance_values.push_back(g.carleson_C.back());
      rep.harnack.instances.push_back(fi.d);
      rep.harnack.per_instance_values.push_back(g.harnack.back());
      rep.instances.push_back(std::move(fi));
    }
    g.spread_carleson = all_fit ? relative_spread(g.carleson_C) : std::numeric_limits<double>::infinity();
    g.spread_harnack = relative_spread(g.harnack);
    g.spread_probe = relative_spread(g.carleson_probe);
    g.independent = g.spread_carleson <= cfg.spread_limit && g.spread_harnack <= cfg.spread_limit;
    rep.independence_holds = rep.independence_holds && g.independent;
    rep.worst_spread = std::max({rep.worst_spread, g.spread_carleson, g.spread_harnack});
    rep.carleson.independence_spread = std::max(rep.carleson.independence_spread, g.spread_carleson);
    rep.harnack.independence_spread = std::max(rep.harnack.independence_spread, g.spread_harnack);
    rep.groups.push_back(std::move(g));
  }
  rep.carleson.fit();
  rep.harnack.fit();
  rep.carleson.notes.push_back("per-instance value: smallest passing C from {2, 4, ..., 256}");
  rep.harnack.notes.push_back("per-instance value: certificate on B(A_R, 0.4 d(A_R)) in rescaled coordinates");
  return rep;
}

}  // namespace hbr
