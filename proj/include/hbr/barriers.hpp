#pragma once

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "harnack.hpp"
#include "nonlinearity.hpp"
#include "quadrature.hpp"
#include "solver.hpp"

namespace hbr {

namespace detail {

// int_a^inf 1/den; +infinity sentinel unless the truncations a*10^(2k) settle.
template <class Den>
Extended integral_to_infinity(Den&& den, double a, const std::vector<double>& cuts = {}) {
  if (!(a > 0.0)) throw ArgumentError("integral_to_infinity needs a > 0");
  std::vector<double> partial;
  double acc = 0.0, lo = a;
  for (int k = 1; k <= 6; ++k) {
    double hi = a * std::pow(10.0, 2.0 * k);
    acc += integrate_log_split([&](double s) { return 1.0 / den(s); }, lo, hi, cuts).value;
    partial.push_back(acc);
    lo = hi;
  }
  auto v = classify_increments(partial);
  if (v == OsgoodVerdict::converges) return Extended(acc + (partial.back() - partial[partial.size() - 2]));
  return Extended::infinity(v == OsgoodVerdict::diverges ? "integrand is not integrable at infinity"
                                                         : "tail integral is indeterminate on the truncation budget");
}

// X with int_a^X 1/den = T (up) or int_X^a 1/den = T (down); nullopt when unreachable.
template <class Den>
std::optional<double> solve_level(Den&& den, double a, double T, bool up, const std::vector<double>& cuts = {}) {
  if (!(a > 0.0) || !(T >= 0.0)) throw ArgumentError("solve_level needs a > 0 and T >= 0");
  if (T == 0.0) return a;
  const double la = std::log(a);
  auto point = [&](double s) { return std::exp(up ? la + s : la - s); };
  auto I = [&](double s) {
    double x = point(s);
    auto inv = [&](double t) { return 1.0 / den(t); };
    return up ? integrate_log_split(inv, a, x, cuts).value : integrate_log_split(inv, x, a, cuts).value;
  };
  const double s_cap = up ? std::log(std::numeric_limits<double>::max()) - la - 1.0
                          : la - std::log(std::numeric_limits<double>::min()) - 1.0;
  // first guess from the local rate
  double s_hi = std::max(1e-12, std::min(T * den(a) / a, 1.0));
  double s_lo = 0.0, I_lo = 0.0, I_hi = I(s_hi);
  while (I_hi < T) {
    double nxt = std::min(2.0 * s_hi, s_cap);
    if (nxt <= s_hi) return std::nullopt;
    double inc = up ? integrate_log_split([&](double t) { return 1.0 / den(t); }, point(s_hi), point(nxt), cuts).value
                    : integrate_log_split([&](double t) { return 1.0 / den(t); }, point(nxt), point(s_hi), cuts).value;
    s_lo = s_hi;
    I_lo = I_hi;
    s_hi = nxt;
    I_hi += inc;
    if (I_hi < T && inc <= 1e-15 * T && s_hi > 50.0) return std::nullopt;
  }
  auto F = [&](double s) { return I_lo + (s == s_lo ? 0.0 : integrate_log_split(
                                                                [&](double t) { return 1.0 / den(t); },
                                                                std::min(point(s_lo), point(s)),
                                                                std::max(point(s_lo), point(s)), cuts)
                                                                .value) -
                                  T; };
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(52);
  double flo = I_lo - T, fhi = I_hi - T;
  if (flo == 0.0) return point(s_lo);
  if (fhi == 0.0) return point(s_hi);
  auto [x0, x1] = boost::math::tools::toms748_solve(F, s_lo, s_hi, flo, fhi, tol, iters);
  return point(0.5 * (x0 + x1));
}

inline std::vector<double> uniform_mesh(double a, double b, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) t[std::size_t(i)] = a + (b - a) * double(i) / double(n - 1);
  return t;
}

// t_0 = 0, then geometric from b * 1e-6 to b
inline std::vector<double> graded_mesh(double b, int n) {
  std::vector<double> t{0.0};
  auto g = log_grid(b * 1e-6, b, std::size_t(n - 1));
  t.insert(t.end(), g.begin(), g.end());
  t.back() = b;
  return t;
}

}  // namespace detail

// (1 + eps) max{phi(t), phi(eps)}
struct RegularizedPhi {
  std::function<double(double)> base;
  double eps = 0.0;
  double at_eps = 0.0;
  double operator()(double t) const { return (1.0 + eps) * std::max(t <= eps ? at_eps : base(t), at_eps); }
};

inline RegularizedPhi build_phi_eps(std::function<double(double)> phi, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("eps must be > 0");
  RegularizedPhi r;
  r.eps = eps;
  try {
    r.at_eps = phi(eps);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("phi has no value at eps: ") + e.what());
  }
  r.base = std::move(phi);
  return r;
}

inline RegularizedPhi build_phi_eps(const Nonlinearity& nl, double eps) {
  if (nl.kind == PhiKind::tabulated && nl.table_t.front() > 0.0 && nl.table_t.front() > eps)
    throw ConfigError("tabulated phi does not cover eps = " + std::to_string(eps));
  return build_phi_eps([nl](double t) { return nl.phi(t); }, eps);
}

enum class Orientation { increasing_outward, increasing_inward };

// w(x) = offset + sign * W(t0 + ts |x - center|), W tabulated with W' and W''.
struct RadialBarrier {
  Vec2 center{};
  double inner_radius = 0.0, outer_radius = 0.0;
  Orientation orientation = Orientation::increasing_outward;
  double offset = 0.0, sign = 1.0, t0 = 0.0, ts = 1.0;
  std::vector<double> t, W, dW, d2W;
  double certificate = 0.0;   // min slack of the target inequality over the mesh
  double ode_residual = 0.0;  // max relative mismatch of divided differences of W' against W''
  bool shape_ok = true;       // second differences single-signed

  double profile(double s) const {
    if (s <= t.front()) return W.front() + dW.front() * (s - t.front());
    if (s >= t.back()) return W.back() + dW.back() * (s - t.back());
    auto it = std::upper_bound(t.begin(), t.end(), s);
    std::size_t j = std::size_t(it - t.begin()), i = j - 1;
    double h = t[j] - t[i], u = (s - t[i]) / h;
    double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u, h01 = -2 * u * u * u + 3 * u * u,
           h11 = u * u * u - u * u;
    return h00 * W[i] + h10 * h * dW[i] + h01 * W[j] + h11 * h * dW[j];
  }
  // |W'| at profile coordinate s, linear between mesh points
  double slope(double s) const {
    if (s <= t.front()) return std::abs(dW.front());
    if (s >= t.back()) return std::abs(dW.back());
    auto it = std::upper_bound(t.begin(), t.end(), s);
    std::size_t j = std::size_t(it - t.begin()), i = j - 1;
    double u = (s - t[i]) / (t[j] - t[i]);
    return std::abs((1 - u) * dW[i] + u * dW[j]);
  }
  double value(Vec2 x) const { return offset + sign * profile(t0 + ts * dist(x, center)); }
  double gradient_norm(Vec2 x) const { return slope(t0 + ts * dist(x, center)); }
  bool in_annulus(Vec2 x) const {
    double r = dist(x, center);
    return r > inner_radius && r < outer_radius;
  }
};

namespace detail {

inline void finish_profile(RadialBarrier& b, bool convex) {
  double worst = 0.0;
  for (std::size_t i = 1; i < b.t.size(); ++i) {
    double dd = (b.dW[i] - b.dW[i - 1]) / (b.t[i] - b.t[i - 1]);
    double mid = 0.5 * (b.d2W[i] + b.d2W[i - 1]);
    if (mid != 0.0) worst = std::max(worst, std::abs(dd - mid) / std::abs(mid));
  }
  b.ode_residual = worst;
  b.shape_ok = true;
  for (std::size_t i = 1; i + 1 < b.t.size(); ++i) {
    double h1 = b.t[i] - b.t[i - 1], h2 = b.t[i + 1] - b.t[i];
    double sd = (b.W[i + 1] - b.W[i]) / h2 - (b.W[i] - b.W[i - 1]) / h1;
    if (convex ? sd < -1e-14 * std::abs(b.W[i]) : sd > 1e-14 * std::abs(b.W[i])) b.shape_ok = false;
  }
}

inline void hermite_accumulate(RadialBarrier& b) {
  b.W.assign(b.t.size(), 0.0);
  for (std::size_t i = 1; i < b.t.size(); ++i) {
    double h = b.t[i] - b.t[i - 1];
    b.W[i] = b.W[i - 1] + 0.5 * h * (b.dW[i - 1] + b.dW[i]) + h * h / 12.0 * (b.d2W[i - 1] - b.d2W[i]);
  }
}

}  // namespace detail

struct RadialMaxBarrier {
  RadialBarrier barrier;
  double r0 = 0.0;       // largest admissible radius
  double f_at_r = 0.0;   // f_eps(r) < 1
  double g_at_r = 0.0;   // sup w - M
  double quad_exponent = 0.0;
};

// lambda int_0^1 ds / phi_{1/2}(s) / 2
inline double radial_r0(const RescaledNonlinearity& rnl, double lambda) {
  auto pe = build_phi_eps([rnl](double t) { return rnl.Phi(t); }, 0.5);
  double I = 0.5 / pe(0.5) + integrate_log_split([&](double s) { return 1.0 / pe(s); }, 0.5, 1.0, rnl.base.kinks()).value;
  return lambda * I / 2.0;
}

// g_eps'' = phi_eps(g_eps') / lambda with g_eps(0) = g_eps'(0) = 0; w(x) = g(r) + M - g(|x|).
inline RadialMaxBarrier radial_max_barrier(double M, double r, const RescaledNonlinearity& rnl, double eps,
                                           double lambda = 1.0, int mesh = 4096) {
  if (!(eps > 0.0 && eps <= 0.5)) throw ArgumentError("eps must lie in (0, 1/2]");
  if (!(r > 0.0)) throw ArgumentError("r must be > 0");
  RadialMaxBarrier out;
  out.r0 = radial_r0(rnl, lambda);
  if (!(r < out.r0) || r > 1.0)
    throw PreconditionError("radial_max_barrier needs lambda int_0^1 ds/phi_{1/2}(s) > 2r and r <= 1 (r = " +
                            std::to_string(r) + ", bound " + std::to_string(out.r0) + ")");
  auto pe = build_phi_eps([rnl](double t) { return rnl.Phi(t); }, eps);
  const double c = pe(eps);  // phi_eps on [0, eps]
  const double t1 = lambda * eps / c;
  auto den = [&](double s) { return pe(s) / lambda; };
  const auto cuts = rnl.base.kinks();
  auto f_of = [&](double t) -> double {
    if (t <= t1) return c * t / lambda;
    auto x = detail::solve_level(den, eps, t - t1, true, cuts);
    if (!x) throw NumericalFailure("radial barrier profile blows up before r");
    return *x;
  };
  const double g1 = c * t1 * t1 / (2.0 * lambda);
  auto g_of = [&](double t, double f) -> double {
    if (t <= t1) return c * t * t / (2.0 * lambda);
    return g1 + integrate_log_split([&](double s) { return lambda * s / pe(s); }, eps, f, cuts).value;
  };

  auto& b = out.barrier;
  b.t = detail::graded_mesh(r, mesh);
  b.dW.resize(b.t.size());
  b.d2W.resize(b.t.size());
  for (std::size_t i = 0; i < b.t.size(); ++i) {
    b.dW[i] = f_of(b.t[i]);
    b.d2W[i] = pe(b.dW[i]) / lambda;
  }
  b.W.resize(b.t.size());
  for (std::size_t i = 0; i < b.t.size(); ++i) b.W[i] = g_of(b.t[i], b.dW[i]);
  out.f_at_r = b.dW.back();
  out.g_at_r = b.W.back();
  if (!(out.f_at_r < 1.0)) throw NumericalFailure("f_eps(r) >= 1 despite r < r0");
  b.center = {0.0, 0.0};
  b.inner_radius = 0.0;
  b.outer_radius = r;
  b.orientation = Orientation::increasing_inward;
  b.offset = out.g_at_r + M;
  b.sign = -1.0;
  // P-(D^2 w) - phi_eps(|Dw|) = lambda (g'' + g'/rho) - phi_eps(g') = lambda g'/rho
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < b.t.size(); ++i)
    slack = std::min(slack, lambda * (b.d2W[i] + b.dW[i] / b.t[i]) - pe(b.dW[i]));
  b.certificate = slack;
  detail::finish_profile(b, true);
  // exponent of g near 0 from the first two positive mesh points
  out.quad_exponent = std::log(b.W[2] / b.W[1]) / std::log(b.t[2] / b.t[1]);
  return out;
}

struct AlmostMaxReport {
  double threshold = 0.0;
  double c0 = 0.0;
  double sigma = 0.0;
  double g_at_threshold = 0.0;
  bool verified = false;
  bool maximum_principle_exact = false;
  double eps = 0.0;
};

// Calibrated c0 / eta_R(M)^2 with g_eps(r) <= (sigma - 1) M checked at the threshold.
inline AlmostMaxReport almost_max_threshold(double M, const RescaledNonlinearity& rnl, double sigma,
                                            double lambda = 1.0, double eps = 1e-3,
                                            std::vector<double> calibration = {1e-2, 1e-1, 1.0, 10.0, 100.0}) {
  if (!(sigma > 1.0)) throw ArgumentError("sigma must be > 1");
  if (!(M > 0.0)) throw ArgumentError("M must be > 0");
  AlmostMaxReport rep;
  rep.sigma = sigma;
  rep.eps = eps;
  auto osg = osgood_classify(rnl.base);
  rep.maximum_principle_exact = osg.at_zero.verdict == OsgoodVerdict::diverges;
  const double r0 = radial_r0(rnl, lambda);
  const double rmax = std::min(1.0, r0) * (1.0 - 1e-9);
  // largest r <= rmax with g_eps(r) <= (sigma - 1) Mc
  auto rstar = [&](double Mc) {
    auto bar = radial_max_barrier(Mc, rmax, rnl, eps, lambda, 512);
    double target = (sigma - 1.0) * Mc;
    if (bar.g_at_r <= target) return rmax;
    double lo = 0.0, hi = rmax;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * rmax; ++it) {
      double mid = 0.5 * (lo + hi);
      if (bar.barrier.profile(mid) <= target)
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  };
  double c0 = std::numeric_limits<double>::infinity();
  for (double Mc : calibration) {
    double e = rnl.eta_R(Mc);
    c0 = std::min(c0, rstar(Mc) * e * e);
  }
  c0 *= 0.5;
  if (!(c0 > 0.0)) throw NumericalFailure("c0 calibration found no admissible radius");
  rep.c0 = c0;
  double eR = rnl.eta_R(M);
  rep.threshold = std::min(c0 / (eR * eR), rmax);
  auto bar = radial_max_barrier(M, rep.threshold, rnl, eps, lambda, 512);
  rep.g_at_threshold = bar.g_at_r;
  rep.verified = bar.g_at_r <= (sigma - 1.0) * M;
  return rep;
}

struct ShootResult {
  RadialBarrier barrier;
  double mu = 0.0;          // mu0 for w1, mu1 for w2
  double sphere_value = 0.0;  // w1 on the inner sphere or w2 on the outer sphere
};

namespace detail {

inline double w1_inner_value(double mu0, double Ct, const RescaledNonlinearity& rnl) {
  auto den = [&](double s) { return Ct * rnl.Phi(s); };
  const auto cuts = rnl.base.kinks();
  if (mu0 == 0.0) {
    auto from0 = integral_from_zero(den, 1.0, cuts);
    if (from0.is_infinite()) return 0.0;  // g stays at 0
    throw ArgumentError("w1 with mu0 = 0 and an integrable 1/Phi_R at 0 is not unique");
  }
  auto g1 = solve_level(den, mu0, 1.0, true, cuts);
  if (!g1) return std::numeric_limits<double>::infinity();
  return integrate_log_split([&](double s) { return s / den(s); }, mu0, *g1, cuts).value;
}

inline double w2_outer_value(double mu1, double Ct, const RescaledNonlinearity& rnl) {
  auto den = [&](double s) { return Ct * rnl.Phi(s); };
  const auto cuts = rnl.base.kinks();
  auto f2 = solve_level(den, mu1, 2.0, false, cuts);
  if (!f2) {
    // below double range but positive when 1/Phi_R is not integrable at 0; the tail of s/den is below DBL_MIN
    if (!integral_from_zero(den, mu1, cuts).is_infinite()) throw NumericalFailure("w2 profile reaches 0 before t = 2");
    f2 = std::numeric_limits<double>::min();
  }
  return integrate_log_split([&](double s) { return s / den(s); }, std::min(*f2, mu1), mu1, cuts).value;
}

}  // namespace detail

// g' = Ct Phi_R(g), g(0) = mu0 on [0, 1]; w1(x) = int_0^{2 - |x - x1|} g, x1 = 2 e_2.
inline ShootResult lower_barrier_w1(double m_u, const RescaledNonlinearity& rnl, double Ct,
                                    const EllipticityPair& ell = {}, int mesh = 4096) {
  if (!(m_u > 0.0)) throw ArgumentError("m_u must be > 0");
  auto S = [&](double lmu) { return detail::w1_inner_value(std::exp(lmu), Ct, rnl) - m_u; };
  double hi = std::log(m_u), fhi = S(hi);
  double lo = hi, flo = fhi;
  for (int k = 1; k <= 40 && flo >= 0.0; ++k) {
    lo = hi - 17.0 * k;
    if (lo < std::log(std::numeric_limits<double>::min()) + 10) break;
    flo = S(lo);
  }
  if (!(flo < 0.0 && fhi > 0.0))
    throw NumericalFailure("w1 shooting bracket failed: S(lo) = " + std::to_string(flo) +
                           ", S(hi) = " + std::to_string(fhi));
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  if (std::isinf(fhi)) fhi = std::numeric_limits<double>::max();
  auto Sf = [&](double x) {
    double v = S(x);
    return std::isinf(v) ? std::numeric_limits<double>::max() : v;
  };
  auto [a, b] = boost::math::tools::toms748_solve(Sf, lo, hi, flo, fhi, tol, iters);
  ShootResult out;
  out.mu = std::exp(0.5 * (a + b));

  auto den = [&](double s) { return Ct * rnl.Phi(s); };
  const auto cuts = rnl.base.kinks();
  auto& B = out.barrier;
  B.t = detail::uniform_mesh(0.0, 1.0, mesh);
  B.dW.resize(B.t.size());
  B.d2W.resize(B.t.size());
  B.dW[0] = out.mu;
  for (std::size_t i = 1; i < B.t.size(); ++i) {
    auto x = detail::solve_level(den, B.dW[i - 1], B.t[i] - B.t[i - 1], true, cuts);
    if (!x) throw NumericalFailure("w1 profile blows up inside (0, 1)");
    B.dW[i] = *x;
  }
  for (std::size_t i = 0; i < B.t.size(); ++i) B.d2W[i] = den(B.dW[i]);
  detail::hermite_accumulate(B);
  out.sphere_value = detail::w1_inner_value(out.mu, Ct, rnl);
  B.center = {0.0, 2.0};
  B.inner_radius = 1.0;
  B.outer_radius = 2.0;
  B.orientation = Orientation::increasing_inward;
  B.t0 = 2.0;
  B.ts = -1.0;
  // -2 Phi_R(g) - P+(D^2 w1) with P+ = -lambda Ct Phi_R(g) + Lambda g / rho, rho = 2 - t
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < B.t.size(); ++i) {
    double g = B.dW[i], rho = 2.0 - B.t[i];
    double P = -ell.lambda * Ct * rnl.Phi(g) + ell.Lambda * g / rho;
    slack = std::min(slack, -2.0 * rnl.Phi(g) - P);
  }
  B.certificate = slack;
  detail::finish_profile(B, true);
  return out;
}

// f' = -Ct Phi_R(f), f(0) = mu1 on [0, 2]; w2(x) = int_0^{|x - x0| - 1} f, x0 = -e_2.
inline ShootResult upper_barrier_w2(double M_v, const RescaledNonlinearity& rnl, double Ct,
                                    const EllipticityPair& ell = {}, int mesh = 4096) {
  if (!(M_v > 0.0)) throw ArgumentError("M_v must be > 0");
  auto S = [&](double lmu) { return detail::w2_outer_value(std::exp(lmu), Ct, rnl) - M_v; };
  double lo = std::log(M_v / 3.0), flo = S(lo);
  double hi = lo, fhi = flo;
  for (int k = 1; k <= 60 && fhi <= 0.0; ++k) {
    hi = lo + 2.0 * k;
    if (hi > std::log(std::numeric_limits<double>::max()) - 10) break;
    fhi = S(hi);
  }
  if (!(flo < 0.0 && fhi > 0.0))
    throw NumericalFailure("w2 shooting bracket failed: S(lo) = " + std::to_string(flo) +
                           ", S(hi) = " + std::to_string(fhi));
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  auto [a, b] = boost::math::tools::toms748_solve(S, lo, hi, flo, fhi, tol, iters);
  ShootResult out;
  out.mu = std::exp(0.5 * (a + b));

  auto den = [&](double s) { return Ct * rnl.Phi(s); };
  const auto cuts = rnl.base.kinks();
  auto& B = out.barrier;
  B.t = detail::uniform_mesh(0.0, 2.0, mesh);
  B.dW.resize(B.t.size());
  B.d2W.resize(B.t.size());
  B.dW[0] = out.mu;
  const bool positive = detail::integral_from_zero(den, out.mu, cuts).is_infinite();
  for (std::size_t i = 1; i < B.t.size(); ++i) {
    auto x = B.dW[i - 1] > 0.0 ? detail::solve_level(den, B.dW[i - 1], B.t[i] - B.t[i - 1], false, cuts)
                               : std::optional<double>(0.0);
    if (!x && !positive) throw NumericalFailure("w2 profile reaches 0 inside (0, 2)");
    B.dW[i] = x ? *x : 0.0;  // 0 stands for values below DBL_MIN
  }
  for (std::size_t i = 0; i < B.t.size(); ++i) B.d2W[i] = -den(B.dW[i]);
  detail::hermite_accumulate(B);
  out.sphere_value = detail::w2_outer_value(out.mu, Ct, rnl);
  B.center = {0.0, -1.0};
  B.inner_radius = 1.0;
  B.outer_radius = 3.0;
  B.orientation = Orientation::increasing_outward;
  B.t0 = -1.0;
  B.ts = 1.0;
  // P-(D^2 w2) - 2 Phi_R(f) with P- = lambda Ct Phi_R(f) - Lambda f / rho, rho = 1 + t
  double slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < B.t.size(); ++i) {
    double f = B.dW[i], rho = 1.0 + B.t[i];
    double P = ell.lambda * Ct * rnl.Phi(f) - ell.Lambda * f / rho;
    slack = std::min(slack, P - 2.0 * rnl.Phi(f));
  }
  B.certificate = slack;
  detail::finish_profile(B, false);
  return out;
}

// Smallest Ct = 2^k >= 2 with lambda Ct Phi_R(s) - Lambda s - 2 Phi_R(s) >= 0 on a log grid of s.
inline double choose_ctilde(const EllipticityPair& ell, const RescaledNonlinearity& rnl) {
  auto grid = log_grid(1e-12, 1e12, 481);
  for (double Ct = 2.0; Ct <= 1048576.0; Ct *= 2.0) {
    bool ok = true;
    for (double s : grid)
      if (ell.lambda * Ct * rnl.Phi(s) - ell.Lambda * s - 2.0 * rnl.Phi(s) < 0.0) {
        ok = false;
        break;
      }
    if (ok) return Ct;
  }
  throw NumericalFailure("no Ct up to 2^20 satisfies the radial inequalities");
}

struct BoundaryHarnackBarriers {
  double Ctilde = 0.0;
  bool assume_mu = false, assume_Mv = false;
  Extended int_low;   // int_0^{m_u/3} ds / Phi_R
  Extended int_high;  // int_{M_v}^inf ds / Phi_R
  double mu0 = 0.0;
  Extended mu1;
  std::string branch;  // "barriers", "mu0_zero", "mu1_infinite"
  std::optional<ShootResult> w1, w2;
  Extended mu_integral;  // int_{mu0}^{mu1} dt / Phi_R
};

inline BoundaryHarnackBarriers boundary_harnack_barriers(double m_u, double M_v, double uA, const EllipticityPair& ell,
                                                         const RescaledNonlinearity& rnl, int mesh = 4096) {
  if (!(m_u > 0.0) || !(M_v >= m_u) || !(uA > 0.0)) throw ArgumentError("need 0 < m_u <= M_v and u(A) > 0");
  BoundaryHarnackBarriers out;
  out.Ctilde = choose_ctilde(ell, rnl);
  auto den = [&](double s) { return rnl.Phi(s); };
  const auto cuts = rnl.base.kinks();
  out.int_low = detail::integral_from_zero(den, m_u / 3.0, cuts);
  out.int_high = detail::integral_to_infinity(den, M_v, cuts);
  out.assume_mu = out.int_low.is_infinite() || out.int_low.value() >= 4.0 * out.Ctilde;
  out.assume_Mv = out.int_high.is_infinite() || out.int_high.value() >= 2.0 * out.Ctilde;
  auto mu_int = [&](double a, const Extended& b) -> Extended {
    if (b.is_infinite()) {
      if (a == 0.0) return Extended::infinity("mu0 = 0 and mu1 = infinity");
      return detail::integral_to_infinity(den, a, cuts);
    }
    return carleson_integral(a, b.value(), rnl);
  };
  if (!out.assume_mu) {
    out.branch = "mu0_zero";
    out.mu0 = 0.0;
    out.mu1 = Extended(uA);
  } else if (!out.assume_Mv) {
    out.branch = "mu1_infinite";
    out.mu0 = uA;
    out.mu1 = Extended::infinity("int_{M_v}^inf ds/Phi_R < 2 Ct");
  } else {
    out.branch = "barriers";
    out.w1 = lower_barrier_w1(m_u, rnl, out.Ctilde, ell, mesh);
    out.w2 = upper_barrier_w2(M_v, rnl, out.Ctilde, ell, mesh);
    out.mu0 = out.w1->mu;
    out.mu1 = Extended(out.w2->mu);
  }
  out.mu_integral = mu_int(out.mu0, out.mu1);
  return out;
}

// Rasterizes a barrier's annulus with the barrier itself as data and values.
inline GridField rasterize_barrier(const RadialBarrier& b, double h, double margin = 0.0) {
  double R = b.outer_radius;
  Vec2 lo{b.center.x - R, b.center.y - R}, hi{b.center.x + R, b.center.y + R};
  auto inside = [&](Vec2 p) {
    double r = dist(p, b.center);
    return r > b.inner_radius + margin && r < b.outer_radius - margin;
  };
  auto g = rasterize(inside, [](Vec2 p) { return p; }, lo, hi, h, [&](Vec2 p) { return b.value(p); });
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!g.is(k, NodeMask::exterior)) g.values[k] = b.value(g.pos(k));
  return g;
}

}  // namespace hbr
