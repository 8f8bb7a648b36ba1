#pragma once

#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "estimates.hpp"
#include "report.hpp"
#include "sharpness.hpp"

namespace hbr {

struct RunOutput {
  nlohmann::json result;
  std::string csv;
};

inline nlohmann::json to_json(const SolveDiagnostics& d) {
  return {{"iterations", d.iterations},
          {"tol_used", d.tol_used},
          {"final_residual", d.final_residual},
          {"residual_history", d.residual_history},
          {"negative_data_warning", d.negative_data_warning},
          {"upwind_nodes", d.upwind_nodes},
          {"clipped_candidates", d.clipped_candidates}};
}

inline std::string fmt(double x) {
  std::ostringstream o;
  o << std::setprecision(12) << x;
  return o.str();
}

inline std::string fmt(const Extended& e) { return e.is_infinite() ? std::string("inf") : fmt(e.value()); }

// Boundary point at which ball-based estimates are centred.
inline Vec2 reference_boundary_point(const DomainSpec& d) {
  switch (d.kind) {
    case DomainKind::half_space: return {0.0, 0.0};
    case DomainKind::lipschitz_graph: return {0.0, d.g(0.0)};
    case DomainKind::cube:
    case DomainKind::cube_minus_ball: return {(d.x_lo + d.x_hi) / 2.0, d.y_lo};
    case DomainKind::annulus_sector: {
      double a = (d.a0 + d.a1) / 2.0;
      return d.center + Vec2{std::cos(a), std::sin(a)} * d.r_out;
    }
  }
  return {};
}

// Seeded boundary data: the profile times a ramp that vanishes on the reference side of the domain.
inline std::function<double(Vec2)> boundary_data(const DomainSpec& dom, Vec2 lo, Vec2 hi, std::uint64_t seed) {
  auto prof = boundary_profile(seed);
  switch (dom.kind) {
    case DomainKind::half_space:
    case DomainKind::lipschitz_graph:
      return [dom, hi, prof](Vec2 p) {
        double g = dom.kind == DomainKind::half_space ? 0.0 : dom.g(p.x);
        return prof(p.x) * std::clamp((p.y - g) / (hi.y - g), 0.0, 1.0);
      };
    case DomainKind::cube:
    case DomainKind::cube_minus_ball:
      return [dom, prof](Vec2 p) { return prof(p.x) * std::clamp((p.y - dom.y_lo) / (dom.y_hi - dom.y_lo), 0.0, 1.0); };
    case DomainKind::annulus_sector:
      return [dom, prof](Vec2 p) {
        Vec2 q = p - dom.center;
        return prof(std::atan2(q.y, q.x)) * std::clamp((q.norm() - dom.r_in) / (dom.r_out - dom.r_in), 0.0, 1.0);
      };
  }
  (void)lo;
  return [](Vec2) { return 0.0; };
}

inline SolveResult solve_configured(const ExperimentConfig& cfg, const DomainSpec& dom, Vec2 lo, Vec2 hi, double R,
                                    std::uint64_t seed, std::optional<EllipticityPair> ell = std::nullopt,
                                    double amplitude = 1.0) {
  auto data = boundary_data(dom, lo, hi, seed);
  auto grid = rasterize(dom, lo, hi, cfg.solver.h, [&](Vec2 p) { return amplitude * data(p); });
  auto prob = cfg.problem(R);
  if (ell) prob.ell = *ell;
  return solve_dirichlet(prob, grid, cfg.solver_options());
}

// ---------------------------------------------------------------------------------------------

inline RunOutput run_structure(const ExperimentConfig& cfg) {
  auto rep = check_structure(cfg.nl, log_grid(1e-8, 1e8, 1601));
  auto osg = osgood_classify(cfg.nl);
  auto end = [](const OsgoodEnd& e) {
    return nlohmann::json{
        {"verdict", to_string(e.verdict)}, {"note", e.note}, {"truncations", e.truncations}, {"partial", e.partial}};
  };
  nlohmann::json viol = nullptr;
  if (rep.p1_first_violation) viol = {rep.p1_first_violation->first, rep.p1_first_violation->second};
  RunOutput out;
  out.result = {{"nonlinearity", to_string(cfg.nl.kind)},
                {"c", cfg.nl.c},
                {"passed", rep.passed()},
                {"homogeneous", rep.homogeneous},
                {"phi_ge_t", rep.p1_phi_ge_t},
                {"eta_monotone", rep.p1_eta_monotone},
                {"first_violation", viol},
                {"tail_decreasing", rep.p2_tail_decreasing},
                {"tail_value", rep.p2_tail_value},
                {"lambda0_sampled", rep.lambda0_sampled},
                {"lambda0", rep.lambda0},
                {"osgood", {{"at_zero", end(osg.at_zero)}, {"at_infinity", end(osg.at_infinity)}}}};
  std::ostringstream c;
  c << "property,value\n"
    << "passed," << rep.passed() << "\nphi_ge_t," << rep.p1_phi_ge_t << "\neta_monotone," << rep.p1_eta_monotone
    << "\ntail_decreasing," << rep.p2_tail_decreasing << "\nlambda0," << fmt(rep.lambda0) << "\nosgood_at_zero,"
    << to_string(osg.at_zero.verdict) << "\nosgood_at_infinity," << to_string(osg.at_infinity.verdict) << "\n";
  out.csv = c.str();
  return out;
}

inline RunOutput run_geometry(const ExperimentConfig& cfg) {
  const auto& dom = cfg.domain.spec;
  Vec2 w = reference_boundary_point(dom);
  RunOutput out;
  nlohmann::json scales = nlohmann::json::array();
  std::ostringstream c;
  c << "r,delta,resolution,separated,lipschitz_bound,within_bound,corkscrew_x,corkscrew_y,clearance,exterior_corkscrew\n";
  std::optional<double> bound;
  if (dom.kind == DomainKind::lipschitz_graph) bound = lipschitz_to_delta(cfg.domain.effective_l);
  bool all_within = true;
  std::vector<CorkscrewResult> cks;
  for (double r : {0.25, 0.5, 1.0}) {
    if (!(r < dom.r0)) continue;
    auto rf = reifenberg_delta(dom, w, r, r / 512.0);
    auto ck = corkscrew(dom, w, r);
    cks.push_back(ck);
    auto ext = exterior_corkscrew(dom, w, r);
    std::optional<bool> within;
    if (bound) {
      within = rf.delta <= *bound + 2.0 * rf.resolution;
      all_within = all_within && *within;
    }
    scales.push_back({{"r", r},
                      {"delta", rf.delta},
                      {"angle", rf.angle},
                      {"resolution", rf.resolution},
                      {"separated", rf.separated},
                      {"separation_points", rf.separation_points},
                      {"within_lipschitz_bound", within ? nlohmann::json(*within) : nlohmann::json(nullptr)},
                      {"corkscrew", {{"point", to_json(ck.point)}, {"distance_to_w", ck.distance_to_w}, {"clearance", ck.clearance}}},
                      {"exterior_corkscrew", ext ? to_json(*ext) : nlohmann::json(nullptr)}});
    c << r << ',' << fmt(rf.delta) << ',' << fmt(rf.resolution) << ',' << rf.separated << ','
      << (bound ? fmt(*bound) : "") << ',' << (within ? (*within ? "1" : "0") : "") << ',' << fmt(ck.point.x) << ','
      << fmt(ck.point.y) << ',' << fmt(ck.clearance) << ',' << (ext ? 1 : 0) << '\n';
  }
  nlohmann::json chain = nullptr;
  if (cks.size() >= 2) {
    auto& a = cks.front();
    auto& b = cks.back();
    double scale = 0.9 * std::min(a.clearance, b.clearance);
    auto ch = harnack_chain(dom, a.point, b.point, scale);
    chain = {{"from", to_json(a.point)},
             {"to", to_json(b.point)},
             {"scale", scale},
             {"balls", ch.centers.size()},
             {"radius", ch.radius},
             {"n_bound", ch.n_bound},
             {"within_budget", ch.within_budget},
             {"predicates_hold", chain_predicates_hold(dom, ch, a.point, b.point)}};
  }
  out.result = {{"domain", to_string(dom.kind)},
                {"w", to_json(w)},
                {"r0", dom.r0},
                {"lipschitz_l", cfg.domain.effective_l},
                {"lipschitz_bound", bound ? nlohmann::json(*bound) : nlohmann::json(nullptr)},
                {"all_within_bound", all_within},
                {"scales", scales},
                {"chain", chain}};
  out.csv = c.str();
  return out;
}

struct SolveRun {
  RunOutput out;
  GridField field;
};

inline SolveRun run_solve(const ExperimentConfig& cfg) {
  double R = cfg.scenario.R.front();
  auto seed = cfg.scenario.seeds.front();
  auto sol = solve_configured(cfg, cfg.domain.spec, cfg.domain.lo, cfg.domain.hi, R, seed);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t k = 0; k < sol.field.size(); ++k)
    if (!sol.field.is(k, NodeMask::exterior)) {
      lo = std::min(lo, sol.field.values[k]);
      hi = std::max(hi, sol.field.values[k]);
    }
  SolveRun r;
  r.out.result = {{"domain", to_string(cfg.domain.spec.kind)},
                  {"operator", to_string(cfg.op.kind)},
                  {"nonlinearity", to_string(cfg.nl.kind)},
                  {"R", R},
                  {"seed", seed},
                  {"h", sol.field.h},
                  {"nx", sol.field.nx},
                  {"ny", sol.field.ny},
                  {"interior_nodes", sol.field.count(NodeMask::interior)},
                  {"boundary_nodes", sol.field.count(NodeMask::boundary)},
                  {"min", lo},
                  {"max", hi},
                  {"diagnostics", to_json(sol.diag)}};
  std::ostringstream c;
  c << "iteration,residual\n";
  for (std::size_t i = 0; i < sol.diag.residual_history.size(); ++i)
    c << i << ',' << fmt(sol.diag.residual_history[i]) << '\n';
  r.out.csv = c.str();
  r.field = std::move(sol.field);
  return r;
}

// One solve per seed at unit drift; each R reads u(R x) / R.
inline std::vector<SolveResult> unit_solves(const ExperimentConfig& cfg, int threads) {
  std::vector<SolveResult> sols(cfg.scenario.seeds.size());
  parallel_for(sols.size(), threads, [&](std::size_t i) {
    sols[i] = solve_configured(cfg, cfg.domain.spec, cfg.domain.lo, cfg.domain.hi, 1.0, cfg.scenario.seeds[i]);
  });
  return sols;
}

inline RunOutput run_harnack(const ExperimentConfig& cfg, int threads) {
  const auto& dom = cfg.domain.spec;
  Vec2 w = reference_boundary_point(dom);
  auto sols = unit_solves(cfg, threads);
  EstimateReport est;
  est.theorem = Theorem::interior_harnack;
  nlohmann::json certs = nlohmann::json::array(), groups = nlohmann::json::array(), px = nlohmann::json::array();
  std::ostringstream c;
  c << "seed,R,center_x,center_y,r,m,M,value\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    std::vector<double> vals;
    for (double R : cfg.scenario.R) {
      ScaledField u(sols[i].field, R);
      Vec2 center;
      double r;
      if (cfg.scenario.harnack_center) {
        center = *cfg.scenario.harnack_center;
        r = cfg.scenario.harnack_r.value_or(0.5);
      } else {
        auto ck = corkscrew(dom, w, R);
        center = ck.point * (1.0 / R);
        r = cfg.scenario.harnack_r.value_or(std::min(1.0, 0.4 * ck.clearance / R));
      }
      auto cert = verify_interior_harnack(u, center, r, R, cfg.nl, cfg.scenario.alpha);
      est.instances.push_back({to_string(dom.kind), to_string(cfg.nl.kind), R, cfg.scenario.seeds[i]});
      double v = cert.value.is_infinite() ? std::numeric_limits<double>::infinity() : cert.value.value();
      est.per_instance_values.push_back(v);
      vals.push_back(v);
      auto j = to_json(cert);
      j["seed"] = cfg.scenario.seeds[i];
      j["center"] = to_json(center);
      certs.push_back(j);
      c << cfg.scenario.seeds[i] << ',' << R << ',' << fmt(center.x) << ',' << fmt(center.y) << ',' << fmt(r) << ','
        << fmt(cert.m) << ',' << fmt(cert.M) << ',' << fmt(cert.value) << '\n';
      if (cfg.op.kind == OperatorKind::px_laplace) {
        auto p = px_corollary_check(sols[i].field, dom, R, cfg.scenario.px_C, w);
        auto pj = p.to_json();
        pj["seed"] = cfg.scenario.seeds[i];
        px.push_back(pj);
      }
    }
    double s = relative_spread(vals);
    worst = std::max(worst, s);
    groups.push_back({{"seed", cfg.scenario.seeds[i]}, {"R", cfg.scenario.R}, {"values", vals}, {"spread", s}});
  }
  est.fit();
  est.independence_spread = worst;
  nlohmann::json diag = nlohmann::json::array();
  for (auto& s : sols) diag.push_back(to_json(s.diag));
  RunOutput out;
  out.result = {{"estimate", est.to_json()}, {"certificates", certs}, {"groups", groups}, {"solves", diag}};
  if (!px.empty()) out.result["px_corollary"] = px;
  out.csv = c.str();
  return out;
}

inline RunOutput run_carleson(const ExperimentConfig& cfg, int threads) {
  const auto& dom = cfg.domain.spec;
  Vec2 w = reference_boundary_point(dom);
  auto sols = unit_solves(cfg, threads);
  EstimateReport est;
  est.theorem = Theorem::carleson;
  nlohmann::json rs = nlohmann::json::array(), groups = nlohmann::json::array();
  std::ostringstream c;
  c << "seed,R,uA,C_fit,probe_M,probe_value,strong_min_caveat\n";
  double worst = 0.0;
  for (std::size_t i = 0; i < sols.size(); ++i) {
    std::vector<double> Cs, probes;
    for (double R : cfg.scenario.R) {
      auto res = verify_carleson(ScaledField(sols[i].field, R), dom, R, cfg.nl, w);
      double C = res.C_fit.value_or(std::numeric_limits<double>::infinity());
      est.instances.push_back({to_string(dom.kind), to_string(cfg.nl.kind), R, cfg.scenario.seeds[i]});
      est.per_instance_values.push_back(C);
      Cs.push_back(C);
      probes.push_back(res.probe_value);
      auto j = res.to_json();
      j["seed"] = cfg.scenario.seeds[i];
      rs.push_back(j);
      c << cfg.scenario.seeds[i] << ',' << R << ',' << fmt(res.uA) << ',' << (res.C_fit ? fmt(*res.C_fit) : "none")
        << ',' << fmt(res.probe_M) << ',' << fmt(res.probe_value) << ',' << res.strong_min_caveat << '\n';
    }
    double s = relative_spread(Cs);
    worst = std::max(worst, s);
    groups.push_back({{"seed", cfg.scenario.seeds[i]},
                      {"R", cfg.scenario.R},
                      {"C_fit", Cs},
                      {"probe", probes},
                      {"spread_C_fit", s},
                      {"spread_probe", relative_spread(probes)}});
  }
  est.fit();
  est.independence_spread = worst;
  nlohmann::json diag = nlohmann::json::array();
  for (auto& s : sols) diag.push_back(to_json(s.diag));
  RunOutput out;
  out.result = {{"estimate", est.to_json()}, {"results", rs}, {"groups", groups}, {"solves", diag}};
  out.csv = c.str();
  return out;
}

// Holder and blow-up read the configured domain as the unit-scale picture; R enters through Phi_R.
inline RunOutput run_holder(const ExperimentConfig& cfg, int threads) {
  DomainSpec dom = cfg.domain.spec;
  Vec2 lo = cfg.domain.lo, hi = cfg.domain.hi;
  EllipticityPair ell(cfg.op.lambda, cfg.op.Lambda);
  nlohmann::json flatten = nullptr;
  if (dom.kind == DomainKind::lipschitz_graph && dom.l > cfg.scenario.flatten_to) {
    // the flattened graph is solved with the configured ellipticity; the transport multipliers are reported only
    auto sm = stretch_map(dom.l, cfg.scenario.flatten_to);
    dom = sm.apply(dom);
    lo.y *= sm.factor;
    flatten = {{"factor", sm.factor},
               {"l_after", dom.l},
               {"transport_lambda_multiplier", sm.lambda_multiplier},
               {"transport_Lambda_multiplier", sm.Lambda_multiplier}};
  }
  Vec2 w = reference_boundary_point(dom);
  struct Job {
    std::size_t s, r;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.scenario.seeds.size(); ++s)
    for (std::size_t r = 0; r < cfg.scenario.R.size(); ++r) jobs.push_back({s, r});
  std::vector<nlohmann::json> rows(jobs.size());
  std::vector<std::string> lines(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t q) {
    double R = cfg.scenario.R[jobs[q].r];
    auto seed = cfg.scenario.seeds[jobs[q].s];
    auto sol = solve_configured(cfg, dom, lo, hi, R, seed, ell);
    auto hf = verify_boundary_holder(sol.field, dom, w, cfg.scenario.holder_r, R, cfg.nl);
    auto ck = corkscrew(dom, w, std::min(1.0, 0.99 * dom.r0));
    double r = std::min(cfg.scenario.osc_r, 0.9 * ck.clearance);
    auto od = verify_osc_decay(sol.field, ck.point, r, R, cfg.nl);
    rows[q] = {{"seed", seed}, {"R", R}, {"holder", hf.to_json()}, {"osc_center", to_json(ck.point)},
               {"osc", od.to_json()}, {"solve", to_json(sol.diag)}};
    std::ostringstream c;
    c << seed << ',' << R << ',' << fmt(hf.alpha) << ',' << fmt(hf.alpha_raw) << ',' << fmt(hf.C1) << ','
      << fmt(hf.delta) << ',' << fmt(od.tau) << ',' << fmt(od.C) << ',' << fmt(od.C_at_half) << '\n';
    lines[q] = c.str();
  });
  RunOutput out;
  out.result = {{"domain", to_string(dom.kind)}, {"flatten", flatten}, {"runs", rows}};
  out.csv = "seed,R,alpha,alpha_raw,C1,delta,tau,C,C_at_half\n";
  for (auto& l : lines) out.csv += l;
  return out;
}

inline RunOutput run_blowup(const ExperimentConfig& cfg, int threads) {
  const auto& dom = cfg.domain.spec;
  if (reference_boundary_point(dom).norm() != 0.0)
    throw PreconditionError("blowup needs the boundary point at the origin (half_space or a graph with g(0) = 0)");
  struct Job {
    std::size_t s, r;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < cfg.scenario.seeds.size(); ++s)
    for (std::size_t r = 0; r < cfg.scenario.R.size(); ++r) jobs.push_back({s, r});
  std::vector<nlohmann::json> rows(jobs.size());
  std::vector<std::string> lines(jobs.size());
  parallel_for(jobs.size(), threads, [&](std::size_t q) {
    double R = cfg.scenario.R[jobs[q].r];
    auto seed = cfg.scenario.seeds[jobs[q].s];
    auto sol = solve_configured(cfg, dom, cfg.domain.lo, cfg.domain.hi, R, seed);
    auto b = blowup_profile(sol.field, dom, R, cfg.nl, cfg.scenario.blowup_alpha, cfg.scenario.delta_trial, cfg.scenario.C2);
    rows[q] = {{"seed", seed}, {"R", R}, {"profile", b.to_json()}, {"solve", to_json(sol.diag)}};
    std::ostringstream c;
    c << seed << ',' << R << ',' << fmt(b.M) << ',' << fmt(b.uA) << ',' << fmt(b.integral_to_M) << ',' << b.monotone
      << ',' << (b.S ? fmt(*b.S) : "none") << ',' << fmt(b.M_S) << ',' << fmt(b.gamma) << ',' << b.alternative << '\n';
    lines[q] = c.str();
  });
  RunOutput out;
  out.result = {{"domain", to_string(dom.kind)}, {"runs", rows}};
  out.csv = "seed,R,M,uA,integral_to_M,monotone,S,M_S,gamma,alternative\n";
  for (auto& l : lines) out.csv += l;
  return out;
}

struct MatchedPair {
  SolveResult u, v;
  double amplitude = 1.0;
  int shots = 0;
};

// Solves u and a second seed v, then scales v's data until v(A) = u(A).
inline MatchedPair matched_pair(const ExperimentConfig& cfg, double R, std::uint64_t seed_u, std::uint64_t seed_v) {
  const auto& dom = cfg.domain.spec;
  Vec2 lo = cfg.domain.lo, hi = cfg.domain.hi;
  Vec2 A = corkscrew(dom, {0.0, 0.0}, 1.0).point;
  MatchedPair mp;
  mp.u = solve_configured(cfg, dom, lo, hi, R, seed_u);
  auto v1 = solve_configured(cfg, dom, lo, hi, R, seed_v);
  double uA = mp.u.field.sample(A), k0 = uA / v1.field.sample(A);
  bool homogeneous = cfg.nl.kind == PhiKind::homogeneous && cfg.op.kind != OperatorKind::px_laplace;
  if (homogeneous) {
    for (auto& x : v1.field.values) x *= k0;
    mp.v = std::move(v1);
    mp.amplitude = k0;
    mp.shots = 1;
    return mp;
  }
  auto f = [&](double k) {
    ++mp.shots;
    auto s = solve_configured(cfg, dom, lo, hi, R, seed_v, std::nullopt, k);
    return s.field.sample(A) - uA;
  };
  double a = k0, b = k0, fa = f(a), fb = fa;
  for (int i = 0; i < 40 && fa * fb > 0.0; ++i) {
    if (fa > 0.0) {
      b = a;
      fb = fa;
      a /= 2.0;
      fa = f(a);
    } else {
      a = b;
      fa = fb;
      b *= 2.0;
      fb = f(b);
    }
  }
  if (fa * fb > 0.0) throw NumericalFailure("amplitude shooting could not bracket v(A) = u(A)");
  double k = fa == 0.0 ? a : b;
  if (fa != 0.0 && fb != 0.0) {
    boost::uintmax_t iters = 60;
    auto tol = [&](double x, double y) { return std::abs(x - y) <= 1e-12 * std::max(std::abs(x), std::abs(y)); };
    auto br = boost::math::tools::toms748_solve(f, a, b, fa, fb, tol, iters);
    k = (br.first + br.second) / 2.0;
  }
  mp.v = solve_configured(cfg, dom, lo, hi, R, seed_v, std::nullopt, k);
  mp.amplitude = k;
  return mp;
}

inline RunOutput run_bharnack(const ExperimentConfig& cfg, int threads) {
  const auto& dom = cfg.domain.spec;
  auto su = cfg.scenario.seeds.front();
  auto sv = cfg.scenario.seeds.size() > 1 ? cfg.scenario.seeds[1] : su + 1;
  std::vector<nlohmann::json> rows(cfg.scenario.R.size());
  std::vector<std::string> lines(rows.size());
  parallel_for(rows.size(), threads, [&](std::size_t q) {
    double R = cfg.scenario.R[q];
    auto mp = matched_pair(cfg, R, su, sv);
    auto rep = verify_boundary_harnack(mp.u.field, mp.v.field, dom, R, cfg.nl, EllipticityPair(cfg.op.lambda, cfg.op.Lambda),
                                       mp.u.diag.tol_used, cfg.scenario.bharnack_C);
    rows[q] = {{"R", R}, {"seed_u", su}, {"seed_v", sv}, {"v_amplitude", mp.amplitude}, {"shots", mp.shots},
               {"report", rep.to_json()}};
    std::ostringstream c;
    c << R << ',' << fmt(rep.uA) << ',' << fmt(rep.vA) << ',' << rep.branch << ',' << fmt(rep.mu0) << ','
      << fmt(rep.mu1) << ',' << fmt(rep.mu_integral) << ',' << fmt(rep.sup_ratio) << ',' << fmt(rep.ratio_bound) << ','
      << rep.ratio_within_bound << '\n';
    lines[q] = c.str();
  });
  RunOutput out;
  out.result = {{"runs", rows}};
  out.csv = "R,uA,vA,branch,mu0,mu1,mu_integral,sup_ratio,ratio_bound,ratio_within_bound\n";
  for (auto& l : lines) out.csv += l;
  return out;
}

inline RunOutput run_sharpness(const ExperimentConfig& cfg) {
  RunOutput out;
  nlohmann::json ex = nlohmann::json::array(), lem = nlohmann::json::array();
  std::ostringstream c;
  c << "H,eps,gamma,K,K_lo,K_hi,log_ratio_bound,estimate_for_H_holds,G_inequality_holds,H_below_Hmin\n";
  for (double H : cfg.scenario.H) {
    auto r = sharpness_example(LogLogValue::plain(H), cfg.scenario.eps);
    ex.push_back(r.to_json());
    c << fmt(H) << ',' << cfg.scenario.eps << ',' << fmt(r.gamma) << ',' << fmt(r.K) << ',' << fmt(r.K_lo) << ','
      << fmt(r.K_hi) << ',' << fmt(r.ratio_bound.log_value()) << ',' << r.estimate_for_H_holds << ','
      << r.G_inequality_holds << ',' << r.H_below_Hmin << '\n';
  }
  for (double e : cfg.scenario.lemma61_eps) lem.push_back(lemma61_check(e).to_json());
  out.result = {{"examples", ex}, {"lemma61", lem}};
  out.csv = c.str();
  return out;
}

}  // namespace hbr
