#pragma once

#include <boost/math/special_functions/expint.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>

#include "errors.hpp"

namespace hbr {

enum class LogLevel { plain = 0, single_log = 1, double_log = 2 };

inline std::string to_string(LogLevel l) {
  switch (l) {
    case LogLevel::plain: return "plain";
    case LogLevel::single_log: return "single_log";
    case LogLevel::double_log: return "double_log";
  }
  return "?";
}

namespace detail {
inline constexpr double kMaxLog = 709.782712893384;  // log(DBL_MAX)

// log(e^a + e^b)
inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  double hi = std::max(a, b), lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}
}  // namespace detail

// A positive real x stored as x, log x or log log x.
struct LogLogValue {
  LogLevel level = LogLevel::plain;
  double payload = 0.0;

  static LogLogValue plain(double x) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("plain LogLogValue needs a finite x >= 0");
    return {LogLevel::plain, x};
  }
  static LogLogValue from_log(double lx) {
    if (std::isnan(lx) || lx == std::numeric_limits<double>::infinity())
      throw DomainError("single_log payload must be finite or -inf");
    return {LogLevel::single_log, lx};
  }
  static LogLogValue from_loglog(double llx) {
    if (!std::isfinite(llx)) throw DomainError("double_log payload must be finite");
    return {LogLevel::double_log, llx};
  }

  // log x; +inf when it overflows
  double log_value() const {
    switch (level) {
      case LogLevel::plain: return std::log(payload);
      case LogLevel::single_log: return payload;
      case LogLevel::double_log: return payload > detail::kMaxLog ? std::numeric_limits<double>::infinity()
                                                                  : std::exp(payload);
    }
    return 0.0;
  }

  // log log x; nullopt when x <= 1
  std::optional<double> loglog_value() const {
    if (level == LogLevel::double_log) return payload;
    double l = log_value();
    if (!(l > 0.0)) return std::nullopt;
    return std::log(l);
  }

  std::optional<double> to_plain() const {
    double l = log_value();
    if (level == LogLevel::plain) return payload;
    if (l > detail::kMaxLog) return std::nullopt;
    return std::exp(l);
  }

  // Downward conversion throws on overflow; upward conversion needs x > 0 (x > 1 for double_log).
  LogLogValue at_level(LogLevel to) const {
    if (to == level) return *this;
    if (to == LogLevel::plain) {
      auto p = to_plain();
      if (!p) throw DomainError("LogLogValue does not fit a plain double");
      return plain(*p);
    }
    if (to == LogLevel::single_log) {
      double l = log_value();
      if (std::isinf(l) && l > 0) throw DomainError("LogLogValue does not fit a single_log payload");
      return from_log(l);
    }
    auto ll = loglog_value();
    if (!ll) throw DomainError("double_log needs x > 1");
    return from_loglog(*ll);
  }

  LogLogValue pow(double g) const {
    if (!(g > 0.0)) throw DomainError("pow needs a positive exponent");
    if (level == LogLevel::double_log) return from_loglog(payload + std::log(g));
    return from_log(g * log_value());
  }

  LogLogValue times(double c) const {
    if (!(c > 0.0)) throw DomainError("times needs a positive factor");
    if (level == LogLevel::double_log) {
      // log(cx) = e^p + log c = e^p (1 + log c / e^p)
      double l = std::log(c), e = payload > detail::kMaxLog ? std::numeric_limits<double>::infinity() : std::exp(payload);
      double r = l / e;
      if (!(r > -1.0)) return from_log(e + l);
      return from_loglog(payload + std::log1p(r));
    }
    return from_log(log_value() + std::log(c));
  }

  LogLogValue divided_by(const LogLogValue& o) const;

  std::string decimal() const {
    auto p = to_plain();
    std::ostringstream ss;
    ss << std::setprecision(12);
    if (p) {
      ss << *p;
      return ss.str();
    }
    double l = log_value();
    if (std::isfinite(l)) {
      double e10 = l / std::log(10.0);
      double ip = std::floor(e10);
      ss << std::pow(10.0, e10 - ip) << "e+" << std::fixed << std::setprecision(0) << ip;
      return ss.str();
    }
    ss << "exp(exp(" << payload << "))";
    return ss.str();
  }
};

// Total order on represented values.
inline int compare(const LogLogValue& a, const LogLogValue& b) {
  LogLevel top = std::max(a.level, b.level);
  auto key = [&](const LogLogValue& v) -> double {
    if (top == LogLevel::plain) return v.payload;
    if (top == LogLevel::single_log) return v.log_value();
    auto ll = v.loglog_value();
    return ll ? *ll : -std::numeric_limits<double>::infinity();
  };
  if (top == LogLevel::double_log) {
    // values at or below 1 sit under every double_log value; order them in the log domain
    auto la = a.loglog_value(), lb = b.loglog_value();
    if (!la && !lb) {
      double x = a.log_value(), y = b.log_value();
      return x < y ? -1 : (x > y ? 1 : 0);
    }
  }
  double x = key(a), y = key(b);
  return x < y ? -1 : (x > y ? 1 : 0);
}
inline bool operator<(const LogLogValue& a, const LogLogValue& b) { return compare(a, b) < 0; }
inline bool operator>(const LogLogValue& a, const LogLogValue& b) { return compare(a, b) > 0; }
inline bool operator<=(const LogLogValue& a, const LogLogValue& b) { return compare(a, b) <= 0; }
inline bool operator>=(const LogLogValue& a, const LogLogValue& b) { return compare(a, b) >= 0; }

inline LogLogValue LogLogValue::divided_by(const LogLogValue& o) const {
  double a = log_value(), b = o.log_value();
  if (std::isfinite(a) && std::isfinite(b)) return from_log(a - b);
  throw DomainError("quotient of LogLogValues overflows the single_log payload");
}

// Sum at the coarsest level that holds both terms.
inline LogLogValue operator+(const LogLogValue& a, const LogLogValue& b) {
  if (a.level == LogLevel::plain && b.level == LogLevel::plain && std::isfinite(a.payload + b.payload))
    return LogLogValue::plain(a.payload + b.payload);
  double la = a.log_value(), lb = b.log_value();
  if (std::isfinite(la) && std::isfinite(lb)) return LogLogValue::from_log(detail::log_add(la, lb));
  // both huge: log(x + y) = log x + log1p(y/x) with x the larger
  const LogLogValue& big = a >= b ? a : b;
  const LogLogValue& small = a >= b ? b : a;
  auto lb_ll = big.loglog_value(), ls_ll = small.loglog_value();
  if (!ls_ll) return big;
  // log y - log x = e^{ls} - e^{lb} = e^{lb} expm1(ls - lb)
  double d = *ls_ll - *lb_ll;
  double diff = *lb_ll > detail::kMaxLog ? -std::numeric_limits<double>::infinity()
                                         : std::exp(*lb_ll) * std::expm1(d);
  if (!(diff > -745.0)) return big;
  double inc = std::log1p(std::exp(diff));
  return big.times(std::exp(inc));
}

// ---------------------------------------------------------------------------------------------
// I = int_p^q exp(exp(alpha + beta s)) ds, carried as log I = w_top + offset with w_top the
// largest value of exp(alpha + beta s) on [p, q]. Lower/upper offsets bracket the exact value.

struct DoubleExpBracket {
  double u_top = 0.0;  // alpha + beta s at the heavy endpoint
  double off_lo = 0.0, off_hi = 0.0, off_point = 0.0;
  std::size_t pieces = 0;

  double w_top() const { return std::exp(u_top); }
  // log log I, or nullopt when I <= 1
  static std::optional<double> loglog_of(double u_top, double off) {
    double w = std::exp(u_top);
    if (std::isinf(w)) return u_top;  // offset is negligible against w
    double l = w + off;
    if (!(l > 0.0)) return std::nullopt;
    return u_top + std::log1p(off / w);
  }
  LogLogValue as_value(double off) const {
    double w = std::exp(u_top);
    if (std::isfinite(w) && w + off <= detail::kMaxLog) return LogLogValue::from_log(w + off);
    auto ll = loglog_of(u_top, off);
    if (!ll) return LogLogValue::from_log(w + off);
    return LogLogValue::from_loglog(*ll);
  }
  LogLogValue lower() const { return as_value(off_lo); }
  LogLogValue upper() const { return as_value(off_hi); }
  LogLogValue point() const { return as_value(off_point); }
  // relative width of the bracket, i.e. log(upper / lower)
  double log_gap() const { return off_hi - off_lo; }
};

namespace detail {

// e^{-w} Ei(w) for w > 0
inline double scaled_ei(double w) {
  if (w <= 0.0) throw DomainError("scaled_ei needs w > 0");
  if (w < 40.0) return std::exp(-w) * boost::math::expint(w);
  // asymptotic series, truncated at its smallest term
  double term = 1.0 / w, sum = term, prev = std::abs(term);
  for (int k = 1; k < 200; ++k) {
    double nxt = term * double(k) / w;
    if (std::abs(nxt) >= prev) break;
    term = nxt;
    sum += term;
    prev = std::abs(term);
    if (prev < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace detail

// rel_tol is the target relative width of the bracket.
inline DoubleExpBracket double_exp_integral(double alpha, double beta, double p, double q, double rel_tol = 1e-12) {
  if (!(q > p)) throw ArgumentError("double_exp_integral needs p < q");
  if (beta == 0.0) {
    double w = std::exp(alpha);
    DoubleExpBracket b;
    b.u_top = alpha;
    b.off_lo = b.off_hi = b.off_point = std::log(q - p);
    b.pieces = 1;
    (void)w;
    return b;
  }
  const double ua = alpha + beta * p, ub = alpha + beta * q;
  const double u_hi = std::max(ua, ub), u_lo = std::min(ua, ub);
  const double log_jac = -std::log(std::abs(beta));
  const double w_top = std::exp(u_hi);
  if (!std::isfinite(w_top)) throw DomainError("double_exp_integral: exp(alpha + beta s) overflows");
  const double step0 = std::sqrt(12.0 * rel_tol);
  const double ninf = -std::numeric_limits<double>::infinity();
  double acc_lo = ninf, acc_hi = ninf;
  double u_c = u_hi;
  std::size_t pieces = 0;
  // gap of w_top over w at u: w_top - w = w expm1(u_hi - u)
  auto drop = [&](double u) { return std::exp(u) * std::expm1(u_hi - u); };
  while (u_c > u_lo) {
    double dc = drop(u_c);  // >= 0
    // remaining mass is below (u_c - u_lo) e^{w_c}; stop once it cannot move the sum
    if (pieces > 0) {
      double rest_hi = std::log(u_c - u_lo) - dc;  // relative to w_top, in u-space
      if (rest_hi < acc_lo - 60.0) {
        acc_hi = detail::log_add(acc_hi, rest_hi);
        break;
      }
    }
    double du = std::min({u_c - u_lo, 0.25, step0 * std::exp(std::min(dc, 50.0) / 2.0)});
    double u_n = u_c - du;
    double w_c = std::exp(u_c), w_n = std::exp(u_n);
    double d = w_c - w_n;
    // mass int e^w dw over [w_n, w_c] relative to e^{w_top}
    double lmass = -dc + std::log(-std::expm1(-d));
    // E[w] under e^w dw: w_n + d / (1 - e^{-d}) - 1
    double mean = d < 1e-8 ? w_n + 0.5 * d : w_n + d / (-std::expm1(-d)) - 1.0;
    mean = std::clamp(mean, w_n, w_c);
    // 1/w convex: Jensen below, chord above
    double inv_lo = 1.0 / mean;
    double inv_hi = d > 0.0 ? 1.0 / w_n + (1.0 / w_c - 1.0 / w_n) * (mean - w_n) / d : 1.0 / w_n;
    inv_hi = std::max(inv_hi, inv_lo);
    acc_lo = detail::log_add(acc_lo, lmass + std::log(inv_lo));
    acc_hi = detail::log_add(acc_hi, lmass + std::log(inv_hi));
    u_c = u_n;
    ++pieces;
    if (pieces > 50'000'000) throw NumericalFailure("double_exp_integral exceeded its piece budget");
  }
  DoubleExpBracket b;
  b.u_top = u_hi;
  b.off_lo = acc_lo + log_jac;
  b.off_hi = acc_hi + log_jac;
  b.pieces = pieces;
  // Ei(w_top) - Ei(w_bot) in scaled form
  const double w_bot = std::exp(u_lo);
  if (w_bot > 0.0 && u_lo > -30.0) {
    double s_top = detail::scaled_ei(w_top);
    double s_bot = detail::scaled_ei(w_bot);
    double v = s_top - std::exp(-drop(u_lo)) * s_bot;
    b.off_point = v > 0.0 ? std::log(v) + log_jac : 0.5 * (b.off_lo + b.off_hi);
  } else {
    b.off_point = 0.5 * (b.off_lo + b.off_hi);
  }
  return b;
}

}  // namespace hbr
