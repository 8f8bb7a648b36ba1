#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "errors.hpp"

namespace hbr {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  unsigned max_depth = 15;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive Gauss-Kronrod on [a, b] in ordinary coordinates.
template <class F>
QuadratureResult integrate_linear(F&& f, double a, double b, const QuadratureOptions& opt = {},
                                  int splits = 8) {
  if (a == b) return {};
  if (std::abs(b - a) <= 1e-13 * std::max(std::abs(a), std::abs(b))) return {f(0.5 * (a + b)) * (b - a), 0.0};
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double err = 0.0;
  double l1 = 0.0;
  // the Kronrod error estimate bottoms out near 1e-16 absolute, so cap the relative target there
  GK::integrate(f, a, b, 0, opt.rel_tol, &err, &l1);
  double tol = l1 > 0.0 ? std::max(opt.rel_tol, 1e-15 / l1) : opt.rel_tol;
  double v = GK::integrate(f, a, b, opt.max_depth, tol, &err, &l1);
  if (!std::isfinite(v)) throw NumericalFailure("quadrature produced a non-finite value");
  // split once more when the absolute target is missed
  if (splits > 0 && err > opt.abs_tol && err > opt.rel_tol * std::abs(v)) {
    double mid = 0.5 * (a + b);
    auto left = integrate_linear(f, a, mid, opt, splits - 1);
    auto right = integrate_linear(f, mid, b, opt, splits - 1);
    return {left.value + right.value, left.error + right.error};
  }
  return {v, err};
}

// Integral of f over [a, b] with 0 < a <= b, substituting t = e^s.
template <class F>
QuadratureResult integrate_log(F&& f, double a, double b, const QuadratureOptions& opt = {}) {
  if (!(a > 0.0) || !(b >= a)) throw ArgumentError("integrate_log needs 0 < a <= b");
  if (a == b) return {};
  auto g = [&](double s) {
    double t = std::exp(s);
    return f(t) * t;
  };
  return integrate_linear(g, std::log(a), std::log(b), opt);
}

// integrate_log split at the interior points of `cuts`.
template <class F>
QuadratureResult integrate_log_split(F&& f, double a, double b, const std::vector<double>& cuts,
                                     const QuadratureOptions& opt = {}) {
  QuadratureResult acc;
  double lo = a;
  for (double c : cuts) {
    if (c <= lo || c >= b) continue;
    auto r = integrate_log(f, lo, c, opt);
    acc.value += r.value;
    acc.error += r.error;
    lo = c;
  }
  auto r = integrate_log(f, lo, b, opt);
  acc.value += r.value;
  acc.error += r.error;
  return acc;
}

}  // namespace hbr
