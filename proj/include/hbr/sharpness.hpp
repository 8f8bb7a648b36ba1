#pragma once

#include <boost/math/tools/roots.hpp>

#include <json.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "loglog.hpp"

namespace hbr {

inline nlohmann::json to_json(const LogLogValue& v) {
  nlohmann::json j{{"level", to_string(v.level)}, {"payload", v.payload}};
  if (v.to_plain()) j["decimal"] = v.decimal();
  else j["decimal"] = nullptr;
  return j;
}

namespace detail {

inline void check_sharpness_eps(double eps) {
  if (!(eps > 0.0 && eps < 0.25)) throw PreconditionError("eps must lie in (0, 1/4)");
}

// F(s) = int_0^s e^{e^{K + x/2}} dx
inline DoubleExpBracket upper_profile(double K, double s, double rel = 1e-12) {
  return double_exp_integral(K, 0.5, 0.0, s, rel);
}

// int_a^b e^{e^{R - (1 + eps) x}} dx
inline DoubleExpBracket lower_profile(double R, double eps, double a, double b, double rel = 1e-12) {
  return double_exp_integral(R, -(1.0 + eps), a, b, rel);
}

enum class Side { point, lower, upper };

inline std::optional<double> loglog_side(const DoubleExpBracket& b, Side s) {
  double off = s == Side::point ? b.off_point : (s == Side::lower ? b.off_lo : b.off_hi);
  return DoubleExpBracket::loglog_of(b.u_top, off);
}

// x with f(x) = target for increasing f, starting from [lo, hi] and widening upward.
inline double solve_increasing(const std::function<double(double)>& f, double target, double lo, double hi,
                               const char* what) {
  double flo = f(lo) - target, fhi = f(hi) - target;
  for (int k = 0; k < 60 && flo > 0.0; ++k) {
    hi = lo;
    fhi = flo;
    lo -= 1.0;
    flo = f(lo) - target;
  }
  for (int k = 0; k < 60 && fhi < 0.0; ++k) {
    lo = hi;
    flo = fhi;
    hi += 1.0;
    fhi = f(hi) - target;
  }
  if (!(flo <= 0.0 && fhi >= 0.0)) throw NumericalFailure(std::string(what) + ": root bracket failed");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  std::uintmax_t iters = 100;
  auto [a, b] = boost::math::tools::toms748_solve([&](double x) { return f(x) - target; }, lo, hi, flo, fhi,
                                                  boost::math::tools::eps_tolerance<double>(48), iters);
  return 0.5 * (a + b);
}

inline double loglog_or_neg_inf(const std::optional<double>& v) {
  return v ? *v : -std::numeric_limits<double>::infinity();
}

}  // namespace detail

// ---------------------------------------------------------------------------------------------

struct Lemma61Sample {
  double K = 0.0;
  double slack = 0.0;  // log log of the integral's lower bound minus (K + 1/2 - eps)
};

struct Lemma61Report {
  double eps = 0.0;
  double grid_start = 1.0, grid_step = 0.01, K_max = 200.0;
  double Khat = 0.0;
  double slack_at_Khat = 0.0;
  std::vector<Lemma61Sample> samples;  // larger K checked after Khat
  bool samples_hold = true;
  // 1/eps <= (e^{e^K})^{e^{eps/2} - 1}, i.e. log(1/eps) <= e^K (e^{eps/2} - 1)
  double sufficient_margin_at_Khat = 0.0;
  bool sufficient_holds_at_Khat = false;
  double K_sufficient = 0.0;  // least grid K where the sufficient condition holds

  nlohmann::json to_json() const {
    nlohmann::json s = nlohmann::json::array();
    for (auto& x : samples) s.push_back({{"K", x.K}, {"slack", x.slack}});
    return {{"eps", eps},
            {"grid", {{"start", grid_start}, {"step", grid_step}, {"K_max", K_max}}},
            {"Khat", Khat},
            {"slack_at_Khat", slack_at_Khat},
            {"samples", s},
            {"samples_hold", samples_hold},
            {"sufficient_margin_at_Khat", sufficient_margin_at_Khat},
            {"sufficient_holds_at_Khat", sufficient_holds_at_Khat},
            {"K_sufficient", K_sufficient}};
  }
};

// log log of a rigorous lower bound for int_0^1 e^{e^{K+s/2}} ds, minus K + 1/2 - eps
inline double lemma61_slack(double K, double eps, double rel = 1e-9) {
  auto b = detail::upper_profile(K, 1.0, rel);
  return detail::loglog_or_neg_inf(detail::loglog_side(b, detail::Side::lower)) - (K + 0.5 - eps);
}

inline double lemma61_sufficient_margin(double K, double eps) {
  return std::exp(K) * std::expm1(eps / 2.0) - std::log(1.0 / eps);
}

inline Lemma61Report lemma61_check(double eps, double step = 0.01, double K_max = 200.0) {
  detail::check_sharpness_eps(eps);
  if (!(step > 0.0)) throw ArgumentError("grid step must be > 0");
  Lemma61Report rep;
  rep.eps = eps;
  rep.grid_step = step;
  rep.K_max = K_max;
  const int n = int(std::floor((K_max - rep.grid_start) / step + 1e-9));
  std::optional<int> hit;
  for (int i = 0; i <= n; ++i) {
    double K = rep.grid_start + step * i;
    if (lemma61_slack(K, eps) > 0.0) {
      hit = i;
      break;
    }
  }
  if (!hit) throw NumericalFailure("lemma61_check: no K <= " + std::to_string(K_max) + " satisfies the inequality");
  rep.Khat = rep.grid_start + step * *hit;
  rep.slack_at_Khat = lemma61_slack(rep.Khat, eps);
  for (double k : {0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0}) {
    double K = rep.Khat + k;
    if (K > K_max) break;
    double s = lemma61_slack(K, eps);
    rep.samples.push_back({K, s});
    rep.samples_hold = rep.samples_hold && s > 0.0;
  }
  rep.sufficient_margin_at_Khat = lemma61_sufficient_margin(rep.Khat, eps);
  rep.sufficient_holds_at_Khat = rep.sufficient_margin_at_Khat >= 0.0;
  double Ks = std::log(std::log(1.0 / eps) / std::expm1(eps / 2.0));
  int is = int(std::ceil((Ks - rep.grid_start) / step - 1e-9));
  while (is > 0 && lemma61_sufficient_margin(rep.grid_start + step * (is - 1), eps) >= 0.0) --is;
  while (lemma61_sufficient_margin(rep.grid_start + step * is, eps) < 0.0) ++is;
  rep.K_sufficient = rep.grid_start + step * std::max(is, 0);
  return rep;
}

// ---------------------------------------------------------------------------------------------

struct ChainStep {
  std::string name;
  LogLogValue value;
  bool holds = true;  // value is <= the previous step's value
};

struct SharpnessReport {
  LogLogValue H;
  double eps = 0.0;
  double K = 0.0, K_lo = 0.0, K_hi = 0.0;  // K from the point estimate and its rigorous bracket
  LogLogValue M, M_lo, M_hi;
  double gamma = 0.0;
  double c = 1.0 / 16.0;
  double R_hat = 0.0, R_hat_grid_step = 1e-3;
  double R = 0.0;
  double G_slack = 0.0;  // min over [1/4, 1/2] of eps e^{R - (1+eps) t} - 4
  bool G_inequality_holds = false;
  bool estimate_for_H_holds = false;  // H <= e^{e^{K + 1/4}}
  double estimate_for_H_margin = 0.0;  // K + 1/4 - log log H
  double lemma61_slack_at_K = 0.0;
  double F_ode_residual = 0.0;  // max relative residual of F'' = (1/2) log(F') F' on a grid
  double F_half_residual = 0.0, F_one_residual = 0.0;  // log-log mismatch of F(1/2) vs H and F(1) vs M
  LogLogValue u_xhat;   // 2 H x2 at x2 = 1/2
  LogLogValue psi_xhat;  // rigorous lower bound of G(3/8)
  std::vector<ChainStep> chain;
  bool chain_valid = false;
  LogLogValue ratio_bound;         // H^{gamma - 1}
  LogLogValue ratio_bound_with_c;  // c H^{gamma - 1}
  LogLogValue psi_ratio;           // psi(xhat) / u(xhat)
  LogLogValue Hmin_from_R, Hmin_from_lemma61, Hmin;
  double lemma61_Khat = 0.0;
  bool H_below_Hmin = false;

  nlohmann::json to_json() const {
    nlohmann::json ch = nlohmann::json::array();
    for (auto& s : chain) ch.push_back({{"step", s.name}, {"value", hbr::to_json(s.value)}, {"holds", s.holds}});
    return {{"H", hbr::to_json(H)},
            {"eps", eps},
            {"K", {{"value", K}, {"bracket", {K_lo, K_hi}}}},
            {"M", {{"value", hbr::to_json(M)}, {"lower", hbr::to_json(M_lo)}, {"upper", hbr::to_json(M_hi)}}},
            {"gamma", gamma},
            {"c", c},
            {"R_hat", R_hat},
            {"R_hat_grid_step", R_hat_grid_step},
            {"R", R},
            {"G_inequality", {{"min_slack", G_slack}, {"holds", G_inequality_holds}}},
            {"estimate_for_H", {{"holds", estimate_for_H_holds}, {"loglog_margin", estimate_for_H_margin}}},
            {"lemma61", {{"slack_at_K", lemma61_slack_at_K}, {"Khat", lemma61_Khat}}},
            {"upper_barrier",
             {{"ode_residual", F_ode_residual}, {"F_half_vs_H", F_half_residual}, {"F_one_vs_M", F_one_residual}}},
            {"u_xhat", hbr::to_json(u_xhat)},
            {"psi_xhat_lower", hbr::to_json(psi_xhat)},
            {"chain", ch},
            {"chain_valid", chain_valid},
            {"ratio_bound", hbr::to_json(ratio_bound)},
            {"ratio_bound_with_c", hbr::to_json(ratio_bound_with_c)},
            {"psi_ratio_lower", hbr::to_json(psi_ratio)},
            {"Hmin",
             {{"value", hbr::to_json(Hmin)},
              {"from_R_hat", hbr::to_json(Hmin_from_R)},
              {"from_lemma61", hbr::to_json(Hmin_from_lemma61)}}},
            {"H_below_Hmin", H_below_Hmin}};
  }
};

inline double sharpness_gamma(double eps) { return std::exp(1.0 / 16.0 - 2.0 * eps); }

// smallest R on the grid with eps e^{R - (1+eps)/2} >= 4
inline double sharpness_R_hat(double eps, double step = 1e-3) {
  detail::check_sharpness_eps(eps);
  double R0 = std::log(4.0 / eps) + 0.5 * (1.0 + eps);
  long k = long(std::ceil(R0 / step));
  auto ok = [&](long i) { return eps * std::exp(step * double(i) - 0.5 * (1.0 + eps)) >= 4.0; };
  while (ok(k - 1)) --k;
  while (!ok(k)) ++k;
  return step * double(k);
}

namespace detail {

// K with int_0^{1/2} e^{e^{K+s/2}} = H, using the given side of the bracket
inline double solve_K(double llH, Side side) {
  auto f = [&](double K) { return loglog_or_neg_inf(loglog_side(upper_profile(K, 0.5), side)); };
  return solve_increasing(f, llH, llH - 0.25 - 1e-9, llH + 1.0, "K from H");
}

// K with int_0^1 e^{e^{K+s/2}} = M
inline double solve_K_from_M(double llM) {
  auto f = [&](double K) { return loglog_or_neg_inf(loglog_side(upper_profile(K, 1.0), Side::point)); };
  return solve_increasing(f, llM, llM - 0.5 - 1e-9, llM + 1.0, "K from M");
}

// R with int_{1/4}^{1/2} e^{e^{R-(1+eps)s}} = M
inline double solve_R(double llM, double eps) {
  auto f = [&](double R) { return loglog_or_neg_inf(loglog_side(lower_profile(R, eps, 0.25, 0.5), Side::point)); };
  double lo = llM + 0.25 * (1.0 + eps) - 1e-9;
  return solve_increasing(f, llM, lo, lo + 1.0, "R from M");
}

}  // namespace detail

inline SharpnessReport sharpness_example(const LogLogValue& H, double eps) {
  detail::check_sharpness_eps(eps);
  if (H < LogLogValue::plain(1e4)) throw PreconditionError("sharpness_example needs H >= 1e4");
  using detail::Side;
  SharpnessReport r;
  r.H = H;
  r.eps = eps;
  r.gamma = sharpness_gamma(eps);
  const double llH = *H.loglog_value();

  r.K = detail::solve_K(llH, Side::point);
  r.K_lo = detail::solve_K(llH, Side::upper);
  r.K_hi = detail::solve_K(llH, Side::lower);
  if (!(r.K > 1.0)) throw PreconditionError("K must exceed 1; H is too small");

  auto Mb = detail::upper_profile(r.K, 1.0);
  r.M = Mb.point();
  r.M_lo = Mb.lower();
  r.M_hi = Mb.upper();
  const double llM = *r.M.loglog_value();

  r.estimate_for_H_margin = r.K + 0.25 - llH;
  r.estimate_for_H_holds = r.estimate_for_H_margin >= 0.0;
  r.lemma61_slack_at_K = lemma61_slack(r.K, eps);

  // F' = e^{e^{K+s/2}}: log F' = e^{K+s/2}; check (log F')' = (1/2) log F' by central differences
  {
    double worst = 0.0, h = 1e-5;
    for (int i = 1; i < 64; ++i) {
      double s = i / 64.0;
      auto lf = [&](double x) { return std::exp(r.K + 0.5 * x); };
      double d = (lf(s + h) - lf(s - h)) / (2 * h);
      worst = std::max(worst, std::abs(d - 0.5 * lf(s)) / (0.5 * lf(s)));
    }
    r.F_ode_residual = worst;
    r.F_half_residual = std::abs(*detail::loglog_side(detail::upper_profile(r.K, 0.5), Side::point) - llH);
    r.F_one_residual = std::abs(*detail::loglog_side(Mb, Side::point) - llM);
  }

  r.R_hat = sharpness_R_hat(eps, r.R_hat_grid_step);
  r.R = detail::solve_R(llM, eps);
  r.G_slack = eps * std::exp(r.R - 0.5 * (1.0 + eps)) - 4.0;
  r.G_inequality_holds = r.G_slack >= 0.0;

  r.u_xhat = H;  // 2 H * (1/2)
  auto psi = detail::lower_profile(r.R, eps, 0.375, 0.5);
  r.psi_xhat = psi.lower();

  // psi(xhat) >= int_{3/8}^{7/16} >= c e^{e^{R - 7(1+eps)/16}} >= c (e^{e^{R-(1+eps)/4}})^{e^{-3/16-eps}}
  //   >= c (e^{e^{K+1/2-eps}})^{e^{-3/16-eps}} = c (e^{e^{K+1/4}})^gamma >= c H^gamma
  {
    auto part = detail::lower_profile(r.R, eps, 0.375, 0.4375).lower();
    auto s2 = LogLogValue::from_loglog(r.R - 7.0 * (1.0 + eps) / 16.0).times(r.c);
    auto s3 = LogLogValue::from_loglog(r.R - 0.25 * (1.0 + eps) - 3.0 / 16.0 - eps).times(r.c);
    auto s4 = LogLogValue::from_loglog(r.K + 0.5 - eps - 3.0 / 16.0 - eps).times(r.c);
    auto s5 = LogLogValue::from_loglog(r.K + 0.25 + std::log(r.gamma)).times(r.c);
    auto s6 = H.pow(r.gamma).times(r.c);
    std::vector<std::pair<std::string, LogLogValue>> steps{{"psi(xhat)", r.psi_xhat},
                                                           {"int_3/8^7/16", part},
                                                           {"c exp(exp(R - 7(1+eps)/16))", s2},
                                                           {"c exp(exp(R - (1+eps)/4))^exp(-3/16-eps)", s3},
                                                           {"c exp(exp(K + 1/2 - eps))^exp(-3/16-eps)", s4},
                                                           {"c exp(exp(K + 1/4))^gamma", s5},
                                                           {"c H^gamma", s6}};
    r.chain_valid = true;
    for (std::size_t i = 0; i < steps.size(); ++i) {
      ChainStep cs{steps[i].first, steps[i].second, true};
      if (i > 0) {
        // equal steps (s4 = s5 up to rounding) compare within a few ulps of the log-log payload
        auto a = steps[i].second.loglog_value(), b = steps[i - 1].second.loglog_value();
        cs.holds = (a && b) ? *a <= *b + 1e-12 * std::max(1.0, std::abs(*b)) : steps[i].second <= steps[i - 1].second;
      }
      r.chain_valid = r.chain_valid && cs.holds;
      r.chain.push_back(cs);
    }
  }

  r.ratio_bound = H.pow(r.gamma - 1.0);
  r.ratio_bound_with_c = r.ratio_bound.times(r.c);
  r.psi_ratio = r.psi_xhat.divided_by(H);

  // H_min(eps): M must reach int_{1/4}^{1/2} e^{e^{R_hat-(1+eps)s}}, and K must reach Khat(eps)
  {
    auto Mstar = detail::lower_profile(r.R_hat, eps, 0.25, 0.5);
    double Kstar = detail::solve_K_from_M(*detail::loglog_side(Mstar, Side::point));
    r.Hmin_from_R = detail::upper_profile(Kstar, 0.5).point();
    auto l61 = lemma61_check(eps);
    r.lemma61_Khat = l61.Khat;
    r.Hmin_from_lemma61 = detail::upper_profile(l61.Khat, 0.5).point();
    r.Hmin = r.Hmin_from_R >= r.Hmin_from_lemma61 ? r.Hmin_from_R : r.Hmin_from_lemma61;
    if (r.Hmin < LogLogValue::plain(1e4)) r.Hmin = LogLogValue::plain(1e4);
    r.H_below_Hmin = H < r.Hmin;
  }
  return r;
}

}  // namespace hbr
