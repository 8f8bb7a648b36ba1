#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "hbr/solver.hpp"

using namespace hbr;
using Catch::Approx;

namespace {

GridField square(double h, const std::function<double(Vec2)>& data, double lo = -1.0, double hi = 1.0) {
  return rasterize(DomainSpec::cube(lo, hi, lo, hi), {lo, lo}, {hi, hi}, h, data);
}

GridField disc(double h, const std::function<double(Vec2)>& data) {
  return rasterize([](Vec2 p) { return p.norm() < 1.0; },
                   [](Vec2 p) { return p.norm() < 1.0 ? p : p * (1.0 / p.norm()); }, {-1.25, -1.25}, {1.25, 1.25}, h,
                   data);
}

Problem pucci(OperatorKind op, double lam, double Lam, Nonlinearity nl = Nonlinearity::homogeneous(), double R = 1.0) {
  Problem p;
  p.op = op;
  p.ell = EllipticityPair(lam, Lam);
  p.nl = RescaledNonlinearity(nl, R);
  return p;
}

}  // namespace

TEST_CASE("pucci_apply examples and ordering") {
  EllipticityPair e(1.0, 2.0);
  CHECK(pucci_apply(e, {1, 0, 1}, PucciSign::plus) == -2.0);
  CHECK(pucci_apply(e, {1, 0, -1}, PucciSign::plus) == Approx(1.0).epsilon(1e-15));
  CHECK(pucci_apply(e, {1, 0, 1}, PucciSign::minus) == -4.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-3, 3);
  for (int i = 0; i < 500; ++i) {
    Sym2 X{U(rng), U(rng), U(rng)};
    double P = pucci_apply(e, X, PucciSign::plus), M = pucci_apply(e, X, PucciSign::minus);
    CHECK(M <= P + 1e-15);
    // rotation covariance
    double th = U(rng), c = std::cos(th), s = std::sin(th);
    // Q^T X Q with Q = [[c, -s], [s, c]]
    double a = c * (c * X.a + s * X.b) + s * (c * X.b + s * X.c);
    double b = c * (-s * X.a + c * X.b) + s * (-s * X.b + c * X.c);
    double d = -s * (-s * X.a + c * X.b) + c * (-s * X.b + c * X.c);
    CHECK(std::abs(pucci_apply(e, {a, b, d}, PucciSign::plus) - P) <= 1e-12 * (1 + std::abs(P)));
    CHECK(std::abs(pucci_apply(e, {a, b, d}, PucciSign::minus) - M) <= 1e-12 * (1 + std::abs(M)));
    // brute force over the extremal matrix set
    double best = -1e300;
    for (int k = 0; k < 720; ++k) {
      double t = M_PI * k / 720, cc = std::cos(t), ss = std::sin(t);
      for (auto [l1, l2] : {std::pair{1.0, 2.0}, {2.0, 1.0}, {1.0, 1.0}, {2.0, 2.0}}) {
        double A11 = l1 * cc * cc + l2 * ss * ss, A12 = (l1 - l2) * cc * ss, A22 = l1 * ss * ss + l2 * cc * cc;
        best = std::max(best, -(A11 * X.a + 2 * A12 * X.b + A22 * X.c));
      }
    }
    CHECK(best <= P + 1e-12);
    CHECK(best >= P - 1e-3 * (1 + std::abs(P)));
  }
}

TEST_CASE("linear data on a half-space slab is reproduced exactly") {
  auto g = rasterize(DomainSpec::half_space(), {-1, 0}, {1, 1}, 1.0 / 16, [](Vec2 p) { return p.y; });
  for (auto op : {OperatorKind::pucci_minus_drift, OperatorKind::pucci_plus_drift}) {
    auto res = solve_dirichlet(pucci(op, 1.0, 1.0), g);
    CHECK(max_error(res.field, [](Vec2 p) { return p.y; }) <= 1e-10);
    CHECK(residual(pucci(op, 1.0, 1.0), res.field) <= res.diag.tol_used);
  }
  // exact linear field: residual at machine scale
  GridField ex = g;
  for (std::size_t k = 0; k < ex.size(); ++k) ex.values[k] = ex.pos(k).y;
  CHECK(residual(pucci(OperatorKind::pucci_minus_drift, 1.0, 2.0), ex) <= 1e-9);
}

TEST_CASE("constant data on a disc gives a constant") {
  auto g = disc(1.0 / 16, [](Vec2) { return 1.0; });
  auto res = solve_dirichlet(pucci(OperatorKind::pucci_minus_drift, 1.0, 1.0), g);
  CHECK(max_error(res.field, [](Vec2) { return 1.0; }) <= 1e-10);
  // with drift the gradient floor h^2 leaves a small forcing phi_R(h^2)
  double h = 1.0 / 16;
  auto lg = solve_dirichlet(pucci(OperatorKind::pucci_minus_drift, 1.0, 1.0, Nonlinearity::log_model()), g);
  double f = Nonlinearity::log_model().phi(h * h);
  CHECK(max_error(lg.field, [](Vec2) { return 1.0; }) <= f);
}

TEST_CASE("px_laplace with p = 2 reproduces x^2 - y^2") {
  Problem p;
  p.op = OperatorKind::px_laplace;
  p.p_field = [](Vec2) { return 2.0; };
  auto exact = [](Vec2 x) { return x.x * x.x - x.y * x.y; };
  auto res = solve_dirichlet(p, square(1.0 / 16, exact));
  CHECK(max_error(res.field, exact) <= 1e-10);

  Problem bad;
  bad.op = OperatorKind::px_laplace;
  CHECK_THROWS_AS(solve_dirichlet(bad, square(0.25, exact)), ConfigError);
}

TEST_CASE("px_laplace with p = 3 - x1 keeps a linear profile") {
  Problem p;
  p.op = OperatorKind::px_laplace;
  p.p_field = [](Vec2 x) { return 3.0 - x.x; };
  p.grad_p = [](Vec2) { return Vec2{-1.0, 0.0}; };
  double H = 0.01;
  auto exact = [&](Vec2 x) { return 2.0 * H * x.y; };
  auto res = solve_dirichlet(p, square(1.0 / 16, exact, 0.0, 1.0));
  CHECK(max_error(res.field, exact) <= 1e-10);
}

TEST_CASE("residual jumps by order 1/h^2 under a one-node perturbation") {
  double h = 1.0 / 16;
  auto g = rasterize(DomainSpec::half_space(), {-1, 0}, {1, 1}, h, [](Vec2 p) { return p.y; });
  auto prob = pucci(OperatorKind::pucci_minus_drift, 1.0, 1.0);
  auto res = solve_dirichlet(prob, g);
  double before = residual(prob, res.field);
  auto bumped = res.field;
  bumped.values[bumped.idx(16, 8)] += 1.0;
  CHECK(residual(prob, bumped) - before >= 1.0 / (h * h));
}

TEST_CASE("viscosity inequality checks") {
  double h = 1.0 / 16;
  auto prob = pucci(OperatorKind::pucci_minus_drift, 1.0, 2.0, Nonlinearity::linear(), 0.5);
  auto res = solve_dirichlet(prob, square(h, [](Vec2 p) { return 1.0 + 0.5 * p.x + p.y * p.y; }));
  auto rep = check_viscosity_inequalities(prob, res.field, 10.0 * res.diag.tol_used);
  CHECK(rep.checked > 0);
  CHECK(rep.super_plus_violations == 0);
  CHECK(rep.sub_minus_violations == 0);

  GridField q = square(h, [](Vec2 p) { return p.dot(p); });
  for (std::size_t k = 0; k < q.size(); ++k) q.values[k] = q.pos(k).dot(q.pos(k));
  auto r2 = check_viscosity_inequalities(pucci(OperatorKind::pucci_plus_drift, 1.0, 1.0), q, 1e-9);
  CHECK(r2.super_plus_violations == r2.checked);
  CHECK(r2.worst_super_plus == Approx(4.0 - 1e-9).epsilon(1e-9));
  CHECK(r2.worst_super_plus_node.has_value());
}

TEST_CASE("grid refinement: error drops by at least 3 when h halves") {
  // harmonic data, 5-point regime
  auto harm = [](Vec2 p) { return std::exp(p.x) * std::cos(p.y); };
  std::vector<double> errs;
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32})
    errs.push_back(max_error(solve_dirichlet(pucci(OperatorKind::pucci_minus_drift, 1.0, 1.0), square(h, harm)).field, harm));
  CHECK(errs[0] / errs[1] >= 3.0);
  CHECK(errs[1] / errs[2] >= 3.0);

  // drift: -lambda u'' = R u', u = (lambda/R)(1 - exp(-R y / lambda))
  double lam = 1.0, R = 0.5;
  auto prof = [&](Vec2 p) { return lam / R * (1.0 - std::exp(-R * (p.y + 1.0) / lam)); };
  errs.clear();
  for (double h : {1.0 / 8, 1.0 / 16, 1.0 / 32})
    errs.push_back(max_error(
        solve_dirichlet(pucci(OperatorKind::pucci_minus_drift, lam, 2.0, Nonlinearity::linear(), R), square(h, prof)).field,
        prof));
  INFO(errs[0] << " " << errs[1] << " " << errs[2]);
  CHECK(errs[0] / errs[1] >= 3.0);
  CHECK(errs[1] / errs[2] >= 3.0);
}

TEST_CASE("property: discrete comparison and non-negativity") {
  auto seed = GENERATE(take(5, random(0, 1000000)));
  std::mt19937_64 rng{static_cast<std::uint64_t>(seed)};
  std::uniform_real_distribution<double> A(0.0, 1.0);
  double a = A(rng), b = A(rng), c = A(rng);
  auto du = [&](Vec2 p) { return a * std::abs(std::sin(3 * p.x + b)) + c * p.y * p.y; };
  auto dv = [&](Vec2 p) { return du(p) + 0.1 + 0.05 * (1 + p.x); };
  auto prob = pucci(OperatorKind::pucci_minus_drift, 1.0, 2.0, Nonlinearity::log_model(), 0.5);
  auto u = solve_dirichlet(prob, square(1.0 / 16, du));
  auto v = solve_dirichlet(prob, square(1.0 / 16, dv));
  double tol = u.diag.tol_used;
  double worst = 0.0, minu = 1e300;
  for (std::size_t k = 0; k < u.field.size(); ++k) {
    if (u.field.is(k, NodeMask::exterior)) continue;
    worst = std::max(worst, u.field.values[k] - v.field.values[k]);
    minu = std::min(minu, u.field.values[k]);
  }
  CHECK(worst <= 10.0 * tol);
  CHECK(minu >= -10.0 * tol);
  CHECK_FALSE(u.diag.negative_data_warning);
}

TEST_CASE("non-convergence carries the residual history") {
  auto prob = pucci(OperatorKind::pucci_plus_drift, 1.0, 3.0, Nonlinearity::log_model(), 1.0);
  SolverOptions opt;
  opt.max_iters = 1;
  try {
    solve_dirichlet(prob, square(1.0 / 16, [](Vec2 p) { return std::abs(p.x) + p.y * p.y; }), opt);
    FAIL("expected NumericalFailure");
  } catch (const NumericalFailure& e) {
    CHECK(e.history().size() == 2);
  }
}

TEST_CASE("negative boundary data raises the warning flag") {
  auto res = solve_dirichlet(pucci(OperatorKind::pucci_minus_drift, 1.0, 1.0), square(0.25, [](Vec2 p) { return p.x; }));
  CHECK(res.diag.negative_data_warning);
}

TEST_CASE("grid file round trip and bilinear sampling") {
  auto g = disc(0.125, [](Vec2 p) { return p.x + 2 * p.y; });
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!g.is(k, NodeMask::exterior)) g.values[k] = g.pos(k).x + 2 * g.pos(k).y;
  auto path = (std::filesystem::temp_directory_path() / "hbr_grid_roundtrip.txt").string();
  g.write(path);
  auto r = GridField::read(path);
  CHECK(r.nx == g.nx);
  CHECK(r.ny == g.ny);
  CHECK(r.h == g.h);
  CHECK(r.origin == g.origin);
  CHECK(r.mask == g.mask);
  for (std::size_t k = 0; k < g.size(); ++k)
    if (!g.is(k, NodeMask::exterior)) CHECK(r.values[k] == g.values[k]);
  CHECK(r.sample({0.1, 0.3}) == Approx(0.7).epsilon(1e-12));
  std::remove(path.c_str());
  CHECK_THROWS_AS(GridField::read("/nonexistent/grid.txt"), ConfigError);
}
