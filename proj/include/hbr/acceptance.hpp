#pragma once

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "estimates.hpp"
#include "runs.hpp"
#include "sharpness.hpp"

namespace hbr {

struct CriterionResult {
  int id = 0;
  std::string title;
  bool checks_pass = false;
  std::string summary;
  nlohmann::json data;
  double seconds = 0.0;
  double limit_seconds = 0.0;

  bool within_time() const { return seconds <= limit_seconds; }
  bool pass() const { return checks_pass && within_time(); }

  std::string line() const {
    std::ostringstream o;
    o << (pass() ? "PASS" : "FAIL") << " criterion " << id << " [" << title << "] " << summary << " ("
      << std::fixed << std::setprecision(2) << seconds << " s of " << limit_seconds << " s"
      << (within_time() ? "" : ", runtime limit exceeded") << ")";
    return o.str();
  }
};

// Files hold the checks only; wall-clock time goes to the console line.
struct AcceptanceReport {
  std::vector<CriterionResult> criteria;

  bool all_pass() const {
    for (auto& c : criteria)
      if (!c.pass()) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json a = nlohmann::json::array();
    bool checks = true;
    for (auto& c : criteria) {
      a.push_back({{"id", c.id}, {"title", c.title}, {"checks_pass", c.checks_pass}, {"summary", c.summary},
                   {"limit_seconds", c.limit_seconds}, {"data", c.data}});
      checks = checks && c.checks_pass;
    }
    return {{"criteria", a}, {"all_checks_pass", checks}};
  }

  std::string csv() const {
    std::ostringstream o;
    o << "id,title,checks_pass,limit_seconds,summary\n";
    for (auto& c : criteria) {
      std::string s = c.summary;
      for (auto& ch : s)
        if (ch == '"') ch = '\'';
      o << c.id << ',' << c.title << ',' << c.checks_pass << ',' << c.limit_seconds << ",\"" << s << "\"\n";
    }
    return o.str();
  }
};

struct AcceptanceOptions {
  int threads = 1;
  std::vector<int> only;  // empty runs all
  std::function<void(const CriterionResult&)> on_result;
};

namespace acceptance {

inline std::string sci(double x) {
  std::ostringstream o;
  o << std::setprecision(3) << x;
  return o.str();
}

inline CriterionResult flatness_formula() {
  CriterionResult c{1, "flatness formula", false, "", {}, 0.0, 1.0};
  double f = lipschitz_to_delta(0.1), exact = 0.1 / std::sqrt(1.01);
  bool formula = std::abs(f - exact) <= 1e-12;
  bool measured = true;
  double worst_excess = -1.0;
  nlohmann::json rows = nlohmann::json::array();
  for (auto [name, dom] : {std::pair{"wedge", DomainSpec::wedge(0.1)}, std::pair{"zigzag", zigzag_graph(0.1)}})
    for (double x : {-0.6, 0.0, 0.25})
      for (double r : {0.5, 1.0}) {
        auto rep = reifenberg_delta(dom, {x, dom.g(x)}, r, r / 512.0);
        double excess = rep.delta - (f + 2.0 * rep.resolution);
        worst_excess = std::max(worst_excess, excess);
        measured = measured && excess <= 0.0;
        rows.push_back({{"graph", name}, {"x", x}, {"r", r}, {"delta", rep.delta}, {"resolution", rep.resolution}});
      }
  c.checks_pass = formula && measured;
  c.summary = "lipschitz_to_delta(0.1) - 0.1/sqrt(1.01) = " + sci(f - exact) +
              "; worst measured delta - (bound + 2 res) = " + sci(worst_excess);
  c.data = {{"formula", f}, {"exact", exact}, {"samples", rows}};
  return c;
}

inline CriterionResult homogeneous_reduction() {
  CriterionResult c{2, "homogeneous reduction", false, "", {}, 0.0, 1.0};
  double worst = 0.0;
  for (double rho : {0.01, 0.5, 1.0}) {
    auto v = harnack_integral_original(1.0, std::exp(1.0), rho, Nonlinearity::homogeneous());
    worst = std::max(worst, v.is_infinite() ? INFINITY : std::abs(v.value() - 1.0));
  }
  c.checks_pass = worst <= 1e-10;
  c.summary = "max |I(1, e) - 1| over rho in {0.01, 0.5, 1} = " + sci(worst);
  c.data = {{"max_error", worst}};
  return c;
}

inline CriterionResult scaling_identity() {
  CriterionResult c{3, "scaling identity", false, "", {}, 0.0, 10.0};
  double worst = 0.0;
  int n = 0;
  for (auto nl : {Nonlinearity::linear(), Nonlinearity::log_model()})
    for (auto [m, M] : {std::pair{0.5, 2.0}, std::pair{1.0, 10.0}, std::pair{0.1, 1000.0}})
      for (double r : {0.25, 0.5, 1.0})
        for (double R : {0.1, 0.5, 1.0}) {
          worst = std::max(worst, scaling_identity_residual(m, M, r, R, nl));
          ++n;
        }
  c.checks_pass = worst <= 1e-8;
  c.summary = "max residual over " + std::to_string(n) + " cases = " + sci(worst);
  c.data = {{"cases", n}, {"max_residual", worst}};
  return c;
}

inline CriterionResult barrier_correctness(const ExperimentConfig& cfg) {
  CriterionResult c{4, "barrier correctness", false, "", {}, 0.0, 30.0};
  EllipticityPair ell(cfg.op.lambda, cfg.op.Lambda);
  const double m_u = 0.8, M_v = 5.0;
  bool ok = true;
  double min_cert = INFINITY, worst_hit = 0.0, worst_lin = -INFINITY;
  std::size_t mesh_points = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (double R : {1.0, 0.1}) {
    RescaledNonlinearity rnl(Nonlinearity::log_model(), R);
    double Ct = choose_ctilde(ell, rnl);
    auto w1 = lower_barrier_w1(m_u, rnl, Ct, ell, 4096);
    auto w2 = upper_barrier_w2(M_v, rnl, Ct, ell, 4096);
    double hit1 = std::abs(w1.sphere_value - m_u) / m_u, hit2 = std::abs(w2.sphere_value - M_v) / M_v;
    double lin = -INFINITY;  // positive means a violated linear bound
    for (std::size_t i = 0; i < w1.barrier.t.size(); ++i)
      lin = std::max(lin, w1.mu * w1.barrier.t[i] - w1.barrier.W[i]);
    for (std::size_t i = 0; i < w2.barrier.t.size(); ++i)
      lin = std::max(lin, w2.barrier.W[i] - w2.mu * w2.barrier.t[i]);
    mesh_points = std::min(w1.barrier.t.size(), w2.barrier.t.size());
    bool row = w1.barrier.certificate >= 0.0 && w2.barrier.certificate >= 0.0 && hit1 <= 1e-8 && hit2 <= 1e-8 &&
               lin <= 1e-12 * std::max(m_u, M_v) && mesh_points >= 4096;
    ok = ok && row;
    min_cert = std::min({min_cert, w1.barrier.certificate, w2.barrier.certificate});
    worst_hit = std::max({worst_hit, hit1, hit2});
    worst_lin = std::max(worst_lin, lin);
    rows.push_back({{"R", R}, {"Ctilde", Ct}, {"mu0", w1.mu}, {"mu1", w2.mu}, {"w1_certificate", w1.barrier.certificate},
                    {"w2_certificate", w2.barrier.certificate}, {"w1_hit", hit1}, {"w2_hit", hit2},
                    {"linear_bound_excess", lin}, {"mesh_points", mesh_points}});
  }
  c.checks_pass = ok;
  c.summary = "min slack = " + sci(min_cert) + ", worst relative hit = " + sci(worst_hit) +
              ", worst linear-bound excess = " + sci(worst_lin) + " on " + std::to_string(mesh_points) + " radii";
  c.data = {{"m_u", m_u}, {"M_v", M_v}, {"runs", rows}};
  return c;
}

inline CriterionResult threshold_check() {
  CriterionResult c{5, "lemma61_check threshold", false, "", {}, 0.0, 5.0};
  bool ok = true;
  std::ostringstream s;
  nlohmann::json rows = nlohmann::json::array();
  for (double eps : {0.05, 0.1, 0.2}) {
    auto r = lemma61_check(eps);
    bool after = true;
    for (double k : {1.0, 5.0, 10.0}) after = after && lemma61_slack(r.Khat + k, eps) > 0.0;
    bool row = r.Khat <= 200.0 && r.slack_at_Khat > 0.0 && after && r.sufficient_holds_at_Khat;
    ok = ok && row;
    s << "eps=" << eps << ": Khat=" << r.Khat << ", later slack " << (after ? "positive" : "NOT positive")
      << ", sufficient condition at Khat " << (r.sufficient_holds_at_Khat ? "holds" : "FAILS") << " (margin "
      << sci(r.sufficient_margin_at_Khat) << ", first holds at K=" << r.K_sufficient << "); ";
    rows.push_back(r.to_json());
  }
  c.checks_pass = ok;
  c.summary = s.str();
  c.data = {{"runs", rows}};
  return c;
}

inline CriterionResult sharpness_pipeline() {
  CriterionResult c{6, "sharpness pipeline", false, "", {}, 0.0, 10.0};
  const double eps = 0.03;
  std::vector<SharpnessReport> rs;
  bool ok = true;
  for (double H : {1e4, 1e6}) {
    auto r = sharpness_example(LogLogValue::plain(H), eps);
    ok = ok && r.gamma == std::exp(1.0 / 16.0 - 2.0 * eps) && r.gamma > 1.0 && r.ratio_bound > LogLogValue::plain(1.0) &&
         r.estimate_for_H_holds;
    rs.push_back(std::move(r));
  }
  bool increasing = rs[1].ratio_bound > rs[0].ratio_bound;
  c.checks_pass = ok && increasing;
  c.summary = "gamma = " + sci(rs[0].gamma) + ", log ratio bound " + sci(rs[0].ratio_bound.log_value()) + " -> " +
              sci(rs[1].ratio_bound.log_value()) + (increasing ? " (increasing)" : " (NOT increasing)") +
              ", K margins " + sci(rs[0].estimate_for_H_margin) + ", " + sci(rs[1].estimate_for_H_margin);
  c.data = {{"runs", {rs[0].to_json(), rs[1].to_json()}}};
  return c;
}

inline CriterionResult solver_exactness() {
  CriterionResult c{7, "solver exactness", false, "", {}, 0.0, 120.0};
  Problem lin;
  lin.ell = EllipticityPair(1.0, 1.0);
  double h = 1.0 / 64;
  auto slab = rasterize(DomainSpec::half_space(), {-1, 0}, {1, 1}, h, [](Vec2 p) { return p.y; });
  double slab_err = 0.0;
  for (auto op : {OperatorKind::pucci_minus_drift, OperatorKind::pucci_plus_drift}) {
    lin.op = op;
    slab_err = std::max(slab_err, max_error(solve_dirichlet(lin, slab).field, [](Vec2 p) { return p.y; }));
  }
  Problem px;
  px.op = OperatorKind::px_laplace;
  px.p_field = [](Vec2) { return 2.0; };
  px.grad_p = [](Vec2) { return Vec2{0.0, 0.0}; };
  auto square = [](double hh, const std::function<double(Vec2)>& f) {
    return rasterize(DomainSpec::cube(-1, 1, -1, 1), {-1, -1}, {1, 1}, hh, f);
  };
  auto quad = [](Vec2 p) { return p.x * p.x - p.y * p.y; };
  auto smooth = [](Vec2 p) { return std::exp(p.x) * std::cos(p.y); };
  bool quad_ok = true;
  std::vector<double> qerr, serr;
  for (double hh : {1.0 / 32, 1.0 / 64}) {
    qerr.push_back(max_error(solve_dirichlet(px, square(hh, quad)).field, quad));
    quad_ok = quad_ok && qerr.back() <= 5.0 * hh * hh;
    serr.push_back(max_error(solve_dirichlet(px, square(hh, smooth)).field, smooth));
  }
  double quad_factor = qerr[1] > 0.0 ? qerr[0] / qerr[1] : INFINITY;
  double factor = serr[0] / serr[1];
  c.checks_pass = slab_err <= 1e-10 && quad_ok && factor >= 3.0;
  c.summary = "slab error " + sci(slab_err) + "; x^2-y^2 errors " + sci(qerr[0]) + ", " + sci(qerr[1]) +
              " (exact up to rounding, ratio " + sci(quad_factor) + "); e^x cos y refinement factor " + sci(factor);
  c.data = {{"slab_error", slab_err},
            {"quadratic_errors", qerr},
            {"quadratic_factor", std::isfinite(quad_factor) ? nlohmann::json(quad_factor) : nlohmann::json("inf")},
            {"smooth_errors", serr},
            {"refinement_factor", factor}};
  return c;
}

inline FamilyConfig family_config(const ExperimentConfig& cfg) {
  FamilyConfig fc;
  fc.h = cfg.scenario.family_h;
  fc.ell = EllipticityPair(cfg.op.lambda, cfg.op.Lambda);
  fc.domains = cfg.scenario.family_domains;
  fc.nls = cfg.family_nonlinearities();
  fc.Rs = cfg.scenario.R;
  fc.seeds = cfg.scenario.seeds;
  fc.alpha = cfg.scenario.alpha;
  fc.spread_limit = cfg.scenario.spread_limit;
  fc.solver = cfg.solver_options();
  return fc;
}

inline CriterionResult empirical_independence(const ExperimentConfig& cfg, int threads) {
  CriterionResult c{8, "empirical independence", false, "", {}, 0.0, 1200.0};
  auto rep = run_instance_family(family_config(cfg), threads);
  std::map<std::string, std::pair<double, double>> by_nl;  // worst (carleson, harnack) spread
  std::size_t failing = 0;
  for (auto& g : rep.groups) {
    auto& w = by_nl[g.nl];
    w.first = std::max(w.first, g.spread_carleson);
    w.second = std::max(w.second, g.spread_harnack);
    if (!g.independent) ++failing;
  }
  std::ostringstream s;
  s << rep.instances.size() << " instances, " << failing << " of " << rep.groups.size()
    << " groups over the spread limit " << rep.config.spread_limit << "; worst (Carleson, Harnack) spread by phi:";
  for (auto& [nl, w] : by_nl) s << ' ' << nl << " (" << sci(w.first) << ", " << sci(w.second) << ")";
  c.checks_pass = rep.independence_holds;
  c.summary = s.str();
  c.data = rep.to_json();
  return c;
}

inline CriterionResult oscillation_decay(const ExperimentConfig& cfg, int threads) {
  CriterionResult c{9, "oscillation decay", false, "", {}, 0.0, 600.0};
  struct Job {
    std::uint64_t seed;
    double R;
  };
  std::vector<Job> jobs;
  for (auto s : cfg.scenario.seeds)
    for (double R : cfg.scenario.R) jobs.push_back({s, R});
  const std::vector<double> hs{1.0 / 32, 1.0 / 64};
  std::vector<std::vector<OscDecayFit>> fits(jobs.size(), std::vector<OscDecayFit>(hs.size()));
  auto nl = Nonlinearity::log_model(cfg.nl.kind == PhiKind::log_model ? cfg.nl.c : 1.0);
  parallel_for(jobs.size() * hs.size(), threads, [&](std::size_t q) {
    std::size_t i = q / hs.size(), k = q % hs.size();
    auto prof = boundary_profile(jobs[i].seed);
    auto grid = rasterize([](Vec2 p) { return p.norm() < 1.0; },
                          [](Vec2 p) { return p.norm() < 1.0 ? p : p * (1.0 / p.norm()); }, {-1.0, -1.0}, {1.0, 1.0},
                          hs[k], [&](Vec2 p) { return prof(std::atan2(p.y, p.x)); });
    Problem prob;
    prob.ell = EllipticityPair(cfg.op.lambda, cfg.op.Lambda);
    prob.nl = RescaledNonlinearity(nl, jobs[i].R);
    auto sol = solve_dirichlet(prob, grid, cfg.solver_options());
    fits[i][k] = verify_osc_decay(sol.field, {0.0, 0.0}, 0.5, jobs[i].R, nl);
  });
  bool below_one = true, stable = true;
  double worst_tau = 0.0, worst_change = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& a = fits[i][0];
    auto& b = fits[i][1];
    for (auto* f : {&a, &b}) {
      below_one = below_one && f->tau < 1.0;
      worst_tau = std::max(worst_tau, f->tau);
    }
    double dt = b.tau > 0.0 ? std::abs(a.tau - b.tau) / b.tau : (a.tau == 0.0 ? 0.0 : INFINITY);
    double dc = std::max(std::abs(a.C), std::abs(b.C)) > 0.0
                    ? std::abs(a.C - b.C) / std::max(std::abs(a.C), std::abs(b.C))
                    : 0.0;
    worst_change = std::max({worst_change, dt, dc});
    stable = stable && dt <= 0.25 && dc <= 0.25;
    rows.push_back({{"seed", jobs[i].seed}, {"R", jobs[i].R}, {"coarse", a.to_json()}, {"fine", b.to_json()},
                    {"tau_change", dt}, {"C_change", dc}});
  }
  c.checks_pass = below_one && stable;
  c.summary = std::to_string(jobs.size()) + " disc instances at h = 1/32 and 1/64: max tau = " + sci(worst_tau) +
              ", worst relative change of (tau, C) = " + sci(worst_change);
  c.data = {{"runs", rows}};
  return c;
}

inline CriterionResult blowup_structure(const ExperimentConfig& cfg, int threads) {
  CriterionResult c{10, "blow-up structure", false, "", {}, 0.0, 300.0};
  struct Job {
    std::string dom;
    Nonlinearity nl;
    std::uint64_t seed;
    double R;
  };
  std::vector<Job> jobs;
  for (auto& d : cfg.scenario.family_domains)
    for (auto& nl : cfg.family_nonlinearities())
      for (auto s : cfg.scenario.seeds)
        for (double R : cfg.scenario.R) jobs.push_back({d, nl, s, R});
  std::vector<BlowupReport> reps(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t q) {
    auto& j = jobs[q];
    auto fd = family_domain(j.dom);
    auto prof = boundary_profile(j.seed);
    auto grid = rasterize(fd.dom, fd.lo, fd.hi, 1.0 / 32, [&](Vec2 p) { return fd.data(p, prof); });
    Problem prob;
    prob.ell = EllipticityPair(cfg.op.lambda, cfg.op.Lambda);
    prob.nl = RescaledNonlinearity(j.nl, j.R);
    auto sol = solve_dirichlet(prob, grid, cfg.solver_options());
    reps[q] = blowup_profile(sol.field, fd.dom, j.R, j.nl, cfg.scenario.blowup_alpha, cfg.scenario.delta_trial,
                             cfg.scenario.C2);
  });
  std::size_t monotone = 0, s0 = 0;
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t q = 0; q < jobs.size(); ++q) {
    monotone += reps[q].monotone;
    s0 += reps[q].alternative == "S0";
    rows.push_back({{"domain", jobs[q].dom}, {"nl", to_string(jobs[q].nl.kind)}, {"seed", jobs[q].seed},
                    {"R", jobs[q].R}, {"profile", reps[q].to_json()}});
  }
  c.checks_pass = monotone == jobs.size() && s0 == jobs.size();
  c.summary = std::to_string(monotone) + "/" + std::to_string(jobs.size()) + " profiles monotone, " +
              std::to_string(s0) + "/" + std::to_string(jobs.size()) + " bounded instances in alternative S0";
  c.data = {{"runs", rows}};
  return c;
}

inline CriterionResult boundary_harnack_sanity(const ExperimentConfig& cfg) {
  CriterionResult c{11, "boundary Harnack sanity", false, "", {}, 0.0, 300.0};
  auto dom = DomainSpec::half_space();
  EllipticityPair ell(cfg.op.lambda, cfg.op.Lambda);
  Problem prob;
  prob.ell = ell;
  const double h = 1.0 / 32;
  auto gu = rasterize(dom, {-3, 0}, {3, 3}, h, [](Vec2 p) { return p.y / 3.0 * (1.0 + 0.3 * std::sin(p.x)); });
  auto gv = rasterize(dom, {-3, 0}, {3, 3}, h, [](Vec2 p) { return p.y / 3.0 * (1.0 + 0.3 * std::cos(2 * p.x)); });
  auto u = solve_dirichlet(prob, gu);
  auto v = solve_dirichlet(prob, gv);
  auto same = verify_boundary_harnack(u.field, u.field, dom, 1.0, Nonlinearity::homogeneous(), ell, u.diag.tol_used);
  auto A = corkscrew(dom, {0, 0}, 1.0).point;
  double k = u.field.sample(A) / v.field.sample(A);
  for (auto& x : v.field.values) x *= k;
  auto pair = verify_boundary_harnack(u.field, v.field, dom, 1.0, Nonlinearity::homogeneous(), ell, u.diag.tol_used);
  double err = INFINITY;
  if (!pair.mu1.is_infinite() && !pair.mu_integral.is_infinite() && pair.mu0 > 0.0)
    err = std::abs(pair.mu_integral.value() - std::log(pair.mu1.value() / pair.mu0));
  c.checks_pass = same.sup_ratio == 1.0 && err <= 1e-8;
  c.summary = "u = v sup ratio = " + sci(same.sup_ratio) + "; pair mu-integral - log(mu1/mu0) = " + sci(err) +
              " (branch " + pair.branch + ", sup ratio " + sci(pair.sup_ratio) + ")";
  c.data = {{"same", same.to_json()}, {"pair", pair.to_json()}};
  return c;
}

}  // namespace acceptance

inline AcceptanceReport run_acceptance(const ExperimentConfig& cfg, const AcceptanceOptions& opt = {}) {
  using namespace acceptance;
  std::vector<std::pair<int, std::function<CriterionResult()>>> all = {
      {1, [] { return flatness_formula(); }},
      {2, [] { return homogeneous_reduction(); }},
      {3, [] { return scaling_identity(); }},
      {4, [&] { return barrier_correctness(cfg); }},
      {5, [] { return threshold_check(); }},
      {6, [] { return sharpness_pipeline(); }},
      {7, [] { return solver_exactness(); }},
      {8, [&] { return empirical_independence(cfg, opt.threads); }},
      {9, [&] { return oscillation_decay(cfg, opt.threads); }},
      {10, [&] { return blowup_structure(cfg, opt.threads); }},
      {11, [&] { return boundary_harnack_sanity(cfg); }},
  };
  static const double limits[] = {0, 1, 1, 10, 30, 5, 10, 120, 1200, 600, 300, 300};
  AcceptanceReport rep;
  for (auto& [id, fn] : all) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), id) == opt.only.end()) continue;
    auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.id = id;
      r.title = "criterion " + std::to_string(id);
      r.checks_pass = false;
      r.summary = std::string("error: ") + e.what();
      r.limit_seconds = limits[id];
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opt.on_result) opt.on_result(r);
    rep.criteria.push_back(std::move(r));
  }
  return rep;
}

}  // namespace hbr
