#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hbr/estimates.hpp"

using namespace hbr;
using Catch::Approx;

namespace {

// Grid with analytic values everywhere it is not exterior.
GridField analytic(const DomainSpec& dom, Vec2 lo, Vec2 hi, double h, const std::function<double(Vec2)>& f) {
  auto g = rasterize(dom, lo, hi, h, f);
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!g.is(k, NodeMask::exterior)) g.values[k] = g.mask[k] == NodeMask::boundary ? g.boundary_data[k] : f(g.pos(k));
  return g;
}

GridField disc_grid(double h, const std::function<double(Vec2)>& f) {
  return rasterize([](Vec2 p) { return p.norm() < 1.0; }, [](Vec2 p) { return p.norm() < 1.0 ? p : p * (1.0 / p.norm()); },
                   {-1.0, -1.0}, {1.0, 1.0}, h, f);
}

double x2(Vec2 p) { return std::max(0.0, p.y); }

Problem pucci_problem(Nonlinearity nl, double R = 1.0, double lam = 1.0, double Lam = 2.0) {
  Problem p;
  p.op = OperatorKind::pucci_minus_drift;
  p.ell = EllipticityPair(lam, Lam);
  p.nl = RescaledNonlinearity(nl, R);
  return p;
}

}  // namespace

TEST_CASE("relative_spread") {
  CHECK(relative_spread({}) == 0.0);
  CHECK(relative_spread({0.0, 0.0}) == 0.0);
  CHECK(relative_spread({2.0, 2.0, 2.0}) == 0.0);
  CHECK(relative_spread({1.0, 2.0}) == Approx(0.5));
  CHECK(relative_spread({-1.0, 1.0}) == Approx(2.0));
}

TEST_CASE("ScaledField maps points and values") {
  auto g = analytic(DomainSpec::half_space(), {-2, 0}, {2, 2}, 1.0 / 16, x2);
  ScaledField u(g, 0.5);
  CHECK(u.h() == Approx(1.0 / 8));
  // u(0.5 x) / 0.5 = x2 again for a linear field
  CHECK(*u.sample({0.3, 1.7}) == Approx(1.7).epsilon(1e-12));
  CHECK_FALSE(u.sample({0.0, 5.0}).has_value());
  CHECK(u.covers({0.0, 2.0}, 1.0));
  CHECK_FALSE(u.covers({0.0, 2.0}, 2.5));
  CHECK(u.covers_part({0.0, 0.0}, 3.0, [](Vec2 x) { return x.y > 0.0; }));
  CHECK_FALSE(u.covers_part({0.0, 0.0}, 5.0, [](Vec2 x) { return x.y > 0.0; }));
}

TEST_CASE("interior Harnack certificate on u = x2") {
  auto g = analytic(DomainSpec::half_space(), {-2, 0}, {2, 3}, 1.0 / 32, x2);
  auto c = verify_interior_harnack(g, {0.0, 1.0}, 0.5, 1.0, Nonlinearity::homogeneous(), 0.0, 1.0);
  CHECK(c.m == Approx(0.5).epsilon(1e-12));
  CHECK(c.M.value() == Approx(1.5).epsilon(1e-12));
  // int_{1/2}^{3/2} dt / (2t)
  CHECK(c.value.value() == Approx(std::log(3.0) / 2.0).epsilon(1e-10));
  CHECK(c.passed.value());

  // scale invariance with phi = 0
  auto g3 = g;
  for (auto& v : g3.values) v *= 7.0;
  auto c3 = verify_interior_harnack(g3, {0.0, 1.0}, 0.5, 1.0, Nonlinearity::homogeneous(), 0.0);
  CHECK(c3.value.value() == Approx(c.value.value()).epsilon(1e-12));

  // drift makes the integrand smaller
  auto cl = verify_interior_harnack(g, {0.0, 1.0}, 0.5, 1.0, Nonlinearity::linear(), 0.0);
  CHECK(cl.value.value() == Approx(std::log(3.0) / 3.0).epsilon(1e-10));

  auto flat = analytic(DomainSpec::half_space(), {-2, 0}, {2, 3}, 1.0 / 32, [](Vec2) { return 2.0; });
  CHECK(verify_interior_harnack(flat, {0.0, 1.5}, 0.5, 1.0, Nonlinearity::log_model(), 0.0).value.value() == 0.0);

  CHECK_THROWS_AS(verify_interior_harnack(g, {0.0, 0.6}, 0.5, 1.0, Nonlinearity::homogeneous(), 0.0), ArgumentError);
  CHECK_THROWS_AS(verify_interior_harnack(g, {0.0, 1.0}, 1.5, 1.0, Nonlinearity::homogeneous(), 0.0), ArgumentError);
}

TEST_CASE("Carleson report for u = x2 is the same at every radius") {
  auto dom = DomainSpec::half_space();
  auto g = analytic(dom, {-2.5, 0}, {2.5, 2.5}, 1.0 / 32, x2);
  for (double R : {1.0, 0.5, 0.25}) {
    auto rep = verify_carleson(ScaledField(g, R), dom, R, Nonlinearity::homogeneous());
    auto ck = corkscrew(dom, {0, 0}, R);
    CHECK(rep.uA == Approx(ck.point.y / R).epsilon(1e-12));
    for (auto& t : rep.trials) {
      CHECK(t.M == Approx(1.0 / t.C).epsilon(1e-12));
      CHECK(t.value == Approx(std::log((1.0 / t.C) / rep.uA)).epsilon(1e-9));
    }
    CHECK(rep.probe_value == Approx(std::log(1.0 / rep.uA)).epsilon(1e-9));
    REQUIRE(rep.C_fit);
    CHECK(*rep.C_fit == 2.0);
    CHECK_FALSE(rep.strong_min_caveat);
  }
}

TEST_CASE("Carleson with u(A) = 0 flags the strong minimum principle") {
  auto dom = DomainSpec::half_space();
  auto g = analytic(dom, {-2.5, 0}, {2.5, 2.5}, 1.0 / 16, [](Vec2 p) { return std::max(0.0, p.y - 1.0); });
  auto rep = verify_carleson(g, dom, 1.0, Nonlinearity::tabulated({0.0, 1.0, 2.0}, {0.0, 1.0, 2.0}));
  CHECK(rep.uA == 0.0);
  CHECK(rep.strong_min_caveat);
  CHECK_FALSE(rep.notes.empty());
}

TEST_CASE("oscillation decay on linear and constant fields") {
  auto lin = disc_grid(1.0 / 64, [](Vec2 p) { return 1.0 + p.x + 2.0 * p.y; });
  for (std::size_t k = 0; k < lin.size(); ++k)
    if (!lin.is(k, NodeMask::exterior)) lin.values[k] = 1.0 + lin.pos(k).x + 2.0 * lin.pos(k).y;
  auto fit = verify_osc_decay(lin, {0.0, 0.0}, 0.5, 1.0, Nonlinearity::homogeneous());
  CHECK(fit.tau == Approx(0.5).epsilon(1e-9));
  CHECK(fit.C == 0.0);
  CHECK(fit.rungs.size() >= 3);
  for (auto& r : fit.rungs) {
    CHECK(r.rho >= 8.0 / 64.0);
    CHECK(r.slack >= -1e-12);
  }

  auto flat = disc_grid(1.0 / 32, [](Vec2) { return 3.0; });
  for (std::size_t k = 0; k < flat.size(); ++k)
    if (!flat.is(k, NodeMask::exterior)) flat.values[k] = 3.0;
  CHECK(verify_osc_decay(flat, {0, 0}, 0.5, 1.0, Nonlinearity::log_model()).tau == 0.0);

  CHECK_THROWS_AS(verify_osc_decay(lin, {0.7, 0.0}, 0.5, 1.0, Nonlinearity::homogeneous()), ArgumentError);
}

TEST_CASE("oscillation decay on a log-model disc solve") {
  auto grid = disc_grid(1.0 / 32, [](Vec2 p) { return 1.0 + 0.5 * std::sin(2.0 * std::atan2(p.y, p.x)); });
  auto sol = solve_dirichlet(pucci_problem(Nonlinearity::log_model(), 1.0), grid);
  auto fit = verify_osc_decay(sol.field, {0.0, 0.0}, 0.5, 1.0, Nonlinearity::log_model());
  CHECK(fit.tau < 1.0);
  for (auto& r : fit.rungs) CHECK(r.slack >= -1e-12);
}

TEST_CASE("boundary Holder fit") {
  auto dom = DomainSpec::half_space();
  auto g = analytic(dom, {-2.5, 0}, {2.5, 2.5}, 1.0 / 64, x2);
  auto fit = verify_boundary_holder(g, dom, {0, 0}, 1.0, 1.0, Nonlinearity::homogeneous());
  // sup over B(0, rho) is rho, so the slope is 1 and alpha sits at the window edge
  CHECK(fit.alpha_raw == Approx(1.0).epsilon(1e-9));
  CHECK(fit.alpha_at_upper_edge);
  CHECK(fit.alpha == kHolderAlphaHi);
  CHECK(fit.M == Approx(1.0).epsilon(1e-12));
  for (auto& r : fit.rungs) {
    CHECK(r.sup == Approx(r.rho).epsilon(1e-9));
    CHECK(r.slack >= -1e-12);
  }

  auto zero = analytic(dom, {-2.5, 0}, {2.5, 2.5}, 1.0 / 32, [](Vec2) { return 0.0; });
  auto z = verify_boundary_holder(zero, dom, {0, 0}, 1.0, 1.0, Nonlinearity::log_model());
  CHECK(z.trivial);
  for (auto& r : z.rungs) CHECK(r.slack >= 0.0);

  auto wavy = zigzag_graph(0.1);
  auto gw = analytic(wavy, {-2.5, 0}, {2.5, 2.5}, 1.0 / 32, [&](Vec2 p) { return std::max(0.0, p.y - wavy.g(p.x)); });
  try {
    verify_boundary_holder(gw, wavy, {0, 0}, 1.0, 1.0, Nonlinearity::homogeneous());
    FAIL("expected a flatness precondition error");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("measured delta") != std::string::npos);
  }
  auto flat = stretch_map(0.1, 0.005).apply(wavy);
  auto gf = analytic(flat, {-2.5, 0}, {2.5, 2.5}, 1.0 / 32, [&](Vec2 p) { return std::max(0.0, p.y - flat.g(p.x)); });
  CHECK_NOTHROW(verify_boundary_holder(gf, flat, {0, 0}, 1.0, 1.0, Nonlinearity::homogeneous()));
}

TEST_CASE("boundary Holder alpha on a log-model graph solve is stable under refinement") {
  auto flat = stretch_map(0.1, 0.005).apply(zigzag_graph(0.1));
  std::vector<double> alphas;
  for (double h : {1.0 / 32, 1.0 / 64}) {
    auto grid = rasterize(flat, {-2.5, 0}, {2.5, 2.5}, h, [&](Vec2 p) {
      return (1.0 + 0.3 * std::sin(p.x)) * std::clamp((p.y - flat.g(p.x)) / 2.5, 0.0, 1.0);
    });
    auto sol = solve_dirichlet(pucci_problem(Nonlinearity::log_model()), grid);
    auto fit = verify_boundary_holder(sol.field, flat, {0, 0}, 1.0, 1.0, Nonlinearity::log_model(), 4.0 / 64);
    CHECK(fit.alpha > 0.0);
    alphas.push_back(fit.alpha);
  }
  CHECK(relative_spread(alphas) <= 0.25);
}

TEST_CASE("blow-up profile: nesting and the bounded alternative") {
  auto dom = DomainSpec::half_space();
  auto g = analytic(dom, {-2.5, 0}, {2.5, 2.5}, 1.0 / 32, x2);
  auto rep = blowup_profile(g, dom, 1.0, Nonlinearity::log_model(), 0.5);
  CHECK(rep.monotone);
  CHECK(rep.alternative == "S0");
  CHECK_FALSE(rep.integral_to_M.is_infinite());
  CHECK(rep.M <= 2.25 + 1e-12);
  CHECK(rep.s.size() >= 3);

  // nesting holds for any field, including noise
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 100.0);
  for (int trial = 0; trial < 3; ++trial) {
    auto noisy = g;
    for (auto& v : noisy.values) v = U(rng);
    auto r = blowup_profile(noisy, dom, 0.5, Nonlinearity::linear(), 0.3);
    CHECK(r.monotone);
    for (std::size_t i = 1; i < r.M_s.size(); ++i) CHECK(r.M_s[i] >= r.M_s[i - 1]);
  }
}

TEST_CASE("boundary Harnack: u = v gives ratio exactly 1") {
  auto dom = DomainSpec::half_space();
  auto grid = rasterize(dom, {-3, 0}, {3, 3}, 1.0 / 16, [](Vec2 p) { return p.y * (1.0 + 0.2 * std::cos(p.x)); });
  auto sol = solve_dirichlet(pucci_problem(Nonlinearity::homogeneous()), grid);
  auto rep = verify_boundary_harnack(sol.field, sol.field, dom, 1.0, Nonlinearity::homogeneous(), EllipticityPair(1, 2),
                                     sol.diag.tol_used);
  CHECK(rep.sup_ratio == 1.0);
  CHECK(rep.A_mismatch == 0.0);
  CHECK(rep.excluded > 0);
  CHECK(rep.counted > 0);
}

TEST_CASE("boundary Harnack: homogeneous half-space pair") {
  auto dom = DomainSpec::half_space();
  EllipticityPair ell(1, 2);
  auto gu = rasterize(dom, {-3, 0}, {3, 3}, 1.0 / 16, [](Vec2 p) { return p.y / 3.0 * (1.0 + 0.3 * std::sin(p.x)); });
  auto gv = rasterize(dom, {-3, 0}, {3, 3}, 1.0 / 16, [](Vec2 p) { return p.y / 3.0 * (1.0 + 0.3 * std::cos(2 * p.x)); });
  auto u = solve_dirichlet(pucci_problem(Nonlinearity::homogeneous()), gu);
  auto v = solve_dirichlet(pucci_problem(Nonlinearity::homogeneous()), gv);
  // 1-homogeneous operator: match v(A) = u(A) by scaling
  auto A = corkscrew(dom, {0, 0}, 1.0).point;
  double k = u.field.sample(A) / v.field.sample(A);
  for (auto& x : v.field.values) x *= k;
  auto rep = verify_boundary_harnack(u.field, v.field, dom, 1.0, Nonlinearity::homogeneous(), ell, u.diag.tol_used);
  CHECK(rep.A_mismatch < 1e-12);
  CHECK(rep.branch == "barriers");
  REQUIRE_FALSE(rep.mu1.is_infinite());
  REQUIRE_FALSE(rep.mu_integral.is_infinite());
  CHECK(rep.mu_integral.value() == Approx(std::log(rep.mu1.value() / rep.mu0)).margin(1e-8));
  CHECK(rep.ratio_within_bound);
  CHECK(rep.sup_ratio > 0.0);
  CHECK_THROWS_AS(verify_boundary_harnack(u.field, v.field, zigzag_graph(0.1), 1.0, Nonlinearity::homogeneous(), ell,
                                          u.diag.tol_used),
                  ArgumentError);
}

TEST_CASE("p(x) corollary on the explicit linear solution") {
  auto dom = DomainSpec::cube(-1.5, 1.5, 0.0, 3.0);
  const double H = 2.0;
  auto g = analytic(dom, {-1.5, 0}, {1.5, 3}, 1.0 / 32, [&](Vec2 p) { return 2.0 * H * p.y; });
  // 2 H x2 solves the p(x) equation with p = 3 - x1
  Problem p;
  p.op = OperatorKind::px_laplace;
  p.p_field = [](Vec2 x) { return 3.0 - x.x; };
  CHECK(residual(p, g) < 1e-9);
  for (double R : {1.0, 0.5}) {
    const double C = 4.0;
    auto rep = px_corollary_check(g, dom, R, C);
    auto A = corkscrew(dom, {0, 0}, R).point;
    CHECK(rep.uA == Approx(2.0 * H * A.y).epsilon(1e-12));
    CHECK(rep.sup == Approx(2.0 * H * R / C).epsilon(1e-12));
    double e = 1.0 + C * R;
    CHECK(rep.carleson_bound == Approx(C * std::max(std::pow(rep.uA, e), std::pow(rep.uA, 1.0 / e))));
    CHECK(rep.carleson_passes);
    CHECK(rep.carleson_margin == Approx(rep.carleson_bound - rep.sup));
  }
}

TEST_CASE("p(x) corollary: u(A) = 1 gives bound C") {
  auto dom = DomainSpec::half_space();
  auto A = corkscrew(dom, {0, 0}, 1.0).point;
  auto g = analytic(dom, {-2.5, 0}, {2.5, 2.5}, 1.0 / 32, [&](Vec2 p) { return std::max(0.0, p.y) / A.y; });
  auto rep = px_corollary_check(g, dom, 1.0, 3.0);
  CHECK(rep.uA == Approx(1.0).epsilon(1e-12));
  CHECK(rep.carleson_bound == Approx(3.0).epsilon(1e-12));
  CHECK(rep.carleson_passes);
}

TEST_CASE("instance family: deterministic fold and report invariants") {
  FamilyConfig cfg;
  cfg.h = 1.0 / 16;
  cfg.domains = {"half_space", "cube"};
  cfg.nls = {Nonlinearity::homogeneous(), Nonlinearity::log_model()};
  cfg.seeds = {11, 23};
  auto a = run_instance_family(cfg, 1);
  auto b = run_instance_family(cfg, 3);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.instances.size() == 2 * 2 * 2 * 3);
  CHECK(a.groups.size() == 8);
  for (auto* r : {&a.carleson, &a.harnack})
    for (double v : r->per_instance_values) CHECK(r->fitted_constant >= v);
  for (auto& g : a.groups) {
    CHECK(g.spread_carleson >= 0.0);
    CHECK(g.spread_harnack >= 0.0);
    // homogeneous certificates see the same function at every scale up to grid error
    if (g.nl == "homogeneous") CHECK(g.spread_harnack <= 0.3);
  }
  auto csv = a.csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 24);

  // boundary data vanishes near the origin and is positive on the top edge
  auto fd = family_domain("lipschitz_graph");
  auto prof = boundary_profile(11);
  CHECK(fd.data({0.0, fd.dom.g(0.0)}, prof) == 0.0);
  CHECK(fd.data({0.3, 2.5}, prof) > 0.0);
  CHECK(boundary_profile(11).phase == boundary_profile(11).phase);
  CHECK_THROWS_AS(family_domain("torus"), ConfigError);
}
