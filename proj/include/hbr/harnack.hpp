#pragma once

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "errors.hpp"
#include "nonlinearity.hpp"
#include "quadrature.hpp"

namespace hbr {

// Non-negative real or a tagged +infinity; never an IEEE infinity.
class Extended {
public:
  Extended() = default;
  explicit Extended(double v) : value_(v) {
    if (!std::isfinite(v)) throw NumericalFailure("Extended constructed from a non-finite double");
  }
  static Extended infinity(std::string note = {}) {
    Extended e;
    e.inf_ = true;
    e.note_ = std::move(note);
    return e;
  }
  bool is_infinite() const { return inf_; }
  double value() const {
    if (inf_) throw NumericalFailure("value() requested from the +infinity sentinel");
    return value_;
  }
  double value_or(double fallback) const { return inf_ ? fallback : value_; }
  const std::string& note() const { return note_; }

private:
  double value_ = 0.0;
  bool inf_ = false;
  std::string note_;
};

struct HarnackCertificate {
  double m = 0.0;
  Extended M;
  double r = 1.0;
  double R = 1.0;
  double alpha = 0.0;
  Extended value;
  std::optional<double> budget;
  std::optional<bool> passed;
};

namespace detail {

// int_m^M of 1/den(t), m > 0, in log coordinates.
template <class Den>
double integral_positive(Den&& den, double m, double M, const std::vector<double>& cuts = {}) {
  if (m == M) return 0.0;
  return integrate_log_split([&](double t) { return 1.0 / den(t); }, m, M, cuts).value;
}

inline std::vector<double> scaled_kinks(const Nonlinearity& nl, double scale) {
  auto k = nl.kinks();
  for (double& x : k) x *= scale;
  return k;
}

// int_0^M 1/den(t): +infinity sentinel when the truncations diverge.
template <class Den>
Extended integral_from_zero(Den&& den, double M, const std::vector<double>& cuts = {}) {
  if (M == 0.0) return Extended(0.0);
  std::vector<double> partial;
  double acc = 0.0, hi = M;
  for (int k = 1; k <= 6; ++k) {
    double lo = M * std::pow(10.0, -2.0 * k);
    acc += integral_positive(den, lo, hi, cuts);
    partial.push_back(acc);
    hi = lo;
  }
  auto v = classify_increments(partial);
  if (v == OsgoodVerdict::converges) {
    double tail = partial.back() - partial[partial.size() - 2];
    return Extended(acc + tail);
  }
  return Extended::infinity(v == OsgoodVerdict::diverges
                                ? "integrand is not integrable at 0"
                                : "integral from 0 is indeterminate on the truncation budget");
}

inline void check_interval(double m, double M) {
  if (!(m >= 0.0) || !std::isfinite(M)) throw ArgumentError("need 0 <= m <= M < inf");
  if (m > M) throw ArgumentError("m > M");
}

inline void check_radius(double r, const char* name) {
  if (!(r > 0.0 && r <= 1.0)) throw ArgumentError(std::string(name) + " must lie in (0, 1]");
}

}  // namespace detail

// int_m^M dt / (rho^2 phi(t/rho) + t)
inline Extended harnack_integral_original(double m, double M, double rho, const Nonlinearity& nl) {
  detail::check_interval(m, M);
  detail::check_radius(rho, "rho");
  auto den = [&](double t) { return rho * rho * nl.phi(t / rho) + t; };
  auto cuts = detail::scaled_kinks(nl, rho);
  if (m == M) return Extended(0.0);
  if (m == 0.0) return detail::integral_from_zero(den, M, cuts);
  return Extended(detail::integral_positive(den, m, M, cuts));
}

// int_m^M dt / (r^alpha Phi_R(t) + t)
inline Extended harnack_integral_rescaled(double m, double M, double r, double R, double alpha,
                                          const Nonlinearity& nl) {
  detail::check_interval(m, M);
  detail::check_radius(r, "r");
  detail::check_radius(R, "R");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ArgumentError("alpha must lie in [0, 1)");
  RescaledNonlinearity rnl(nl, R);
  double ra = std::pow(r, alpha);
  auto den = [&](double t) { return ra * rnl.Phi(t) + t; };
  auto cuts = nl.kinks();
  if (m == M) return Extended(0.0);
  if (m == 0.0) return detail::integral_from_zero(den, M, cuts);
  return Extended(detail::integral_positive(den, m, M, cuts));
}

// int_m^M dt / Phi_R(t), the Carleson and boundary Harnack functional.
inline Extended carleson_integral(double m, double M, const RescaledNonlinearity& rnl) {
  detail::check_interval(m, M);
  auto den = [&](double t) { return rnl.Phi(t); };
  auto cuts = rnl.base.kinks();
  if (m == M) return Extended(0.0);
  if (m == 0.0) return detail::integral_from_zero(den, M, cuts);
  return Extended(detail::integral_positive(den, m, M, cuts));
}

// |int_{Rm}^{RM} ds/(rho^2 phi(s/rho)+s) - int_m^M dt/(R r^2 phi(t/r)+t)|, rho = rR.
inline double scaling_identity_residual(double m, double M, double r, double R, const Nonlinearity& nl) {
  detail::check_interval(m, M);
  detail::check_radius(r, "r");
  detail::check_radius(R, "R");
  if (m == 0.0) throw ArgumentError("scaling residual needs m > 0");
  double rho = r * R;
  auto lhs_den = [&](double s) { return rho * rho * nl.phi(s / rho) + s; };
  auto rhs_den = [&](double t) { return R * r * r * nl.phi(t / r) + t; };
  double lhs = detail::integral_positive(lhs_den, R * m, R * M, detail::scaled_kinks(nl, rho));
  double rhs = detail::integral_positive(rhs_den, m, M, detail::scaled_kinks(nl, r));
  return std::abs(lhs - rhs);
}

// Solves int_a^M dt/(R^2 phi(t/R) + t) = budget for M.
inline Extended invert_upper(double a, double budget, double R, const Nonlinearity& nl) {
  if (!(budget >= 0.0) || !std::isfinite(budget)) throw ArgumentError("budget must be finite and >= 0");
  if (!(a >= 0.0) || !std::isfinite(a)) throw ArgumentError("a must be finite and >= 0");
  detail::check_radius(R, "R");
  if (budget == 0.0) return Extended(a);
  auto den = [&](double t) { return R * R * nl.phi(t / R) + t; };
  const auto cuts = detail::scaled_kinks(nl, R);
  if (a == 0.0) {
    auto probe = detail::integral_from_zero(den, 1e-300, cuts);
    if (probe.is_infinite())
      throw ArgumentError("integral from a = 0 diverges; no M > 0 attains a finite budget");
    a = 1e-300;
  }
  // s = log(M/a); the integral is at most s, so the root satisfies s >= budget
  const double s_max = std::log(std::numeric_limits<double>::max()) - std::log(a) - 1.0;
  double s_lo = std::min(budget, s_max), I_lo = detail::integral_positive(den, a, a * std::exp(s_lo), cuts);
  if (I_lo >= budget) return Extended(a * std::exp(s_lo));
  double s_hi = s_lo;
  double I_hi = I_lo;
  for (int it = 0; it < 64; ++it) {
    double s_next = std::min(2.0 * s_hi, s_max);
    if (s_next <= s_hi)
      throw NumericalFailure("invert_upper: solution exceeds the largest representable double");
    double inc = detail::integral_positive(den, a * std::exp(s_hi), a * std::exp(s_next), cuts);
    if (I_hi + inc >= budget) {
      s_lo = s_hi;
      I_lo = I_hi;
      s_hi = s_next;
      I_hi = I_hi + inc;
      break;
    }
    if (inc < 1e-12)
      return Extended::infinity("integral to infinity converges below the budget");
    s_hi = s_next;
    I_hi += inc;
  }
  if (I_hi < budget) throw NumericalFailure("invert_upper: bracket growth exhausted");
  const double base = I_lo, s0 = s_lo;
  auto F = [&](double s) { return base + detail::integral_positive(den, a * std::exp(s0), a * std::exp(s), cuts) - budget; };
  std::uintmax_t iters = 200;
  auto tol = boost::math::tools::eps_tolerance<double>(50);
  auto [x0, x1] = boost::math::tools::toms748_solve(F, s_lo, s_hi, I_lo - budget, I_hi - budget, tol, iters);
  return Extended(a * std::exp(0.5 * (x0 + x1)));
}

// C max{uA^(1+CR), uA^(1/(1+CR))}
inline double px_carleson_bound(double uA, double R, double C) {
  if (!(uA >= 0.0)) throw ArgumentError("uA must be >= 0");
  if (!(C >= 1.0)) throw ArgumentError("C must be >= 1");
  double e = 1.0 + C * R;
  return C * std::max(std::pow(uA, e), std::pow(uA, 1.0 / e));
}

// C max{uA^(CR), uA^(-CR)}
inline double px_bharnack_bound(double uA, double R, double C) {
  if (!(uA > 0.0)) throw ArgumentError("uA must be > 0");
  if (!(C >= 1.0)) throw ArgumentError("C must be >= 1");
  double e = C * R;
  return C * std::max(std::pow(uA, e), std::pow(uA, -e));
}

}  // namespace hbr
