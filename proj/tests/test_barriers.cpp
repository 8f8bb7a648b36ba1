#include <catch_amalgamated.hpp>

#include <cmath>

#include "hbr/barriers.hpp"

using namespace hbr;
using Catch::Approx;

TEST_CASE("build_phi_eps examples") {
  auto pe = build_phi_eps(Nonlinearity::linear(), 0.1);
  CHECK(pe(0.05) == Approx(0.11).epsilon(1e-15));
  CHECK(pe(0.0) == Approx(0.11).epsilon(1e-15));
  CHECK(pe(3.0) == Approx(1.1 * 3.0).epsilon(1e-15));
  auto lg = Nonlinearity::log_model();
  auto pl = build_phi_eps(lg, 0.01);
  for (double t : log_grid(1e-6, 1e6, 61)) {
    CHECK(pl(t) >= lg.phi(t));
    CHECK(pl(t) >= 1.01 * lg.phi(t) * (1 - 1e-15));
  }
  CHECK_THROWS_AS(build_phi_eps(Nonlinearity::tabulated({1.0, 2.0}, {1.0, 2.0}), 0.1), ConfigError);
  CHECK_THROWS_AS(build_phi_eps(lg, 0.0), ArgumentError);
}

TEST_CASE("radial_max_barrier matches the piecewise closed form for linear phi") {
  double R = 1.0, eps = 0.01, lam = 1.0, r = 0.25;
  RescaledNonlinearity rnl(Nonlinearity::linear(), R);
  auto out = radial_max_barrier(2.0, r, rnl, eps, lam);
  double k = (1 + eps) * (1 + R), t1 = lam / k;
  auto f = [&](double t) { return t <= t1 ? k * eps * t / lam : eps * std::exp(k * t / lam - 1.0); };
  auto g = [&](double t) {
    double g1 = k * eps * t1 * t1 / (2 * lam);
    return t <= t1 ? k * eps * t * t / (2 * lam) : g1 + eps * lam / k * (std::exp(k * t / lam - 1.0) - 1.0);
  };
  const auto& b = out.barrier;
  for (std::size_t i = 0; i < b.t.size(); i += 37) {
    CHECK(b.dW[i] == Approx(f(b.t[i])).epsilon(1e-10).margin(1e-300));
    CHECK(b.W[i] == Approx(g(b.t[i])).epsilon(1e-9).margin(1e-300));
  }
  CHECK(out.f_at_r < 1.0);
  CHECK(b.certificate >= 0.0);
  CHECK(b.shape_ok);
  CHECK(out.quad_exponent == Approx(2.0).margin(0.05));
  CHECK(out.r0 == Approx(lam * (1 + std::log(2.0)) / (1.5 * (1 + R)) / 2).epsilon(1e-9));
  CHECK(b.value({0.0, 0.0}) == Approx(2.0 + out.g_at_r).epsilon(1e-12));
  CHECK(b.value({r, 0.0}) == Approx(2.0).epsilon(1e-12));

  // shifting M shifts w only
  auto other = radial_max_barrier(7.0, r, rnl, eps, lam);
  for (double x : {0.0, 0.05, 0.2}) CHECK(other.barrier.value({x, 0}) - b.value({x, 0}) == Approx(5.0).epsilon(1e-12));

  CHECK_THROWS_AS(radial_max_barrier(1.0, 0.3, rnl, eps, lam), PreconditionError);
}

TEST_CASE("radial_max_barrier for the log model") {
  RescaledNonlinearity rnl(Nonlinearity::log_model(), 0.5);
  auto out = radial_max_barrier(1.0, 0.1, rnl, 1e-3, 1.0);
  CHECK(out.barrier.certificate >= 0.0);
  CHECK(out.barrier.shape_ok);
  CHECK(out.barrier.ode_residual <= 1e-3);
  CHECK(out.quad_exponent == Approx(2.0).margin(0.05));
}

TEST_CASE("almost_max_threshold") {
  RescaledNonlinearity hom(Nonlinearity::homogeneous(), 1.0);
  auto a = almost_max_threshold(1.0, hom, 1.5), b = almost_max_threshold(10.0, hom, 1.5);
  CHECK(a.threshold == Approx(b.threshold).epsilon(1e-12));
  CHECK(a.threshold == Approx(a.c0).epsilon(1e-12));
  CHECK(a.verified);

  RescaledNonlinearity lg(Nonlinearity::log_model(), 1.0);
  auto c = almost_max_threshold(10.0, lg, 1.5);
  CHECK(c.maximum_principle_exact);
  CHECK(c.verified);
  // oracle: bisection on r for the predicate g(r) <= (sigma - 1) M
  double rmax = std::min(1.0, radial_r0(lg, 1.0)) * (1 - 1e-9);
  auto bar = radial_max_barrier(10.0, rmax, lg, c.eps, 1.0, 512);
  double lo = 0, hi = rmax;
  for (int i = 0; i < 100; ++i) {
    double mid = 0.5 * (lo + hi);
    (bar.barrier.profile(mid) <= 0.5 * 10.0 ? lo : hi) = mid;
  }
  CHECK(c.threshold <= lo);
  CHECK_THROWS_AS(almost_max_threshold(1.0, lg, 1.0), ArgumentError);
}

TEST_CASE("choose_ctilde") {
  CHECK(choose_ctilde(EllipticityPair(1, 2), RescaledNonlinearity(Nonlinearity::log_model(), 0.5)) == 4.0);
  CHECK(choose_ctilde(EllipticityPair(1, 1), RescaledNonlinearity(Nonlinearity::homogeneous(), 1.0)) == 4.0);
}

TEST_CASE("lower_barrier_w1 shooting and certificates") {
  EllipticityPair ell(1, 2);
  RescaledNonlinearity rnl(Nonlinearity::log_model(), 0.5);
  double Ct = choose_ctilde(ell, rnl), m_u = 0.8;
  auto w1 = lower_barrier_w1(m_u, rnl, Ct, ell);
  CHECK(w1.mu > 0.0);
  CHECK(w1.mu < m_u);
  CHECK(w1.sphere_value == Approx(m_u).epsilon(1e-8));
  CHECK(w1.barrier.W.back() == Approx(m_u).epsilon(1e-8));
  CHECK(w1.barrier.value({0.0, 1.0}) == Approx(m_u).epsilon(1e-8));
  CHECK(w1.barrier.value({2.0, 2.0}) == Approx(0.0).margin(1e-15));
  CHECK(w1.barrier.certificate >= 0.0);
  CHECK(w1.barrier.shape_ok);
  for (std::size_t i = 0; i < w1.barrier.t.size(); ++i) CHECK(w1.barrier.W[i] >= w1.mu * w1.barrier.t[i] * (1 - 1e-12));
  // bracket endpoints
  CHECK(detail::w1_inner_value(0.0, Ct, rnl) <= m_u / 3);
  CHECK(detail::w1_inner_value(1e-200, Ct, rnl) <= m_u / 3);
  CHECK(detail::w1_inner_value(m_u, Ct, rnl) > m_u);
}

TEST_CASE("upper_barrier_w2 shooting, closed form and concavity") {
  EllipticityPair ell(1, 1);
  RescaledNonlinearity hom(Nonlinearity::homogeneous(), 1.0);
  double Ct = choose_ctilde(ell, hom), Mv = 3.0;
  auto w2 = upper_barrier_w2(Mv, hom, Ct, ell);
  CHECK(w2.mu >= Mv / 3);
  CHECK(w2.sphere_value == Approx(Mv).epsilon(1e-8));
  CHECK(w2.barrier.W.back() == Approx(Mv).epsilon(1e-8));
  // f = mu1 exp(-Ct t), int_0^2 f = mu1 (1 - e^{-2 Ct}) / Ct
  CHECK(w2.mu == Approx(Mv * Ct / (1 - std::exp(-2 * Ct))).epsilon(1e-9));
  for (std::size_t i = 0; i < w2.barrier.t.size(); i += 101)
    CHECK(w2.barrier.dW[i] == Approx(w2.mu * std::exp(-Ct * w2.barrier.t[i])).epsilon(1e-9));
  CHECK(w2.barrier.certificate >= 0.0);
  CHECK(w2.barrier.shape_ok);
  double inf_f = *std::min_element(w2.barrier.dW.begin(), w2.barrier.dW.end());
  CHECK(inf_f > 0.0);
  for (std::size_t i = 0; i < w2.barrier.t.size(); ++i)
    if (w2.barrier.t[i] <= 1.0) CHECK(w2.barrier.W[i] <= w2.mu * w2.barrier.t[i] * (1 + 1e-12));
  CHECK(detail::w2_outer_value(Mv / 3, Ct, hom) < Mv);

  RescaledNonlinearity lg(Nonlinearity::log_model(), 0.5);
  EllipticityPair e2(1, 2);
  auto w2l = upper_barrier_w2(5.0, lg, choose_ctilde(e2, lg), e2);
  CHECK(w2l.sphere_value == Approx(5.0).epsilon(1e-8));
  CHECK(w2l.barrier.certificate >= 0.0);
  CHECK(w2l.barrier.shape_ok);
}

TEST_CASE("rasterized w1 passes the discrete subsolution check on its annulus") {
  EllipticityPair ell(1, 2);
  RescaledNonlinearity rnl(Nonlinearity::log_model(), 0.5);
  auto w1 = lower_barrier_w1(0.8, rnl, choose_ctilde(ell, rnl), ell);
  // the solver floors |Du| at h^2, and inf |Dw1| = mu0 ~ 2.4e-5, so h = 1/128 resolves the whole annulus
  auto g = rasterize_barrier(w1.barrier, 1.0 / 128);
  Problem prob;
  prob.op = OperatorKind::pucci_plus_drift;
  prob.ell = ell;
  prob.nl = rnl;
  auto rep = check_viscosity_inequalities(prob, g, 1e-6, [&](Vec2 x) { return w1.barrier.in_annulus(x); });
  CHECK(rep.checked > 1000);
  CHECK(rep.sub_plus_violations == 0);

  // w2' decays double-exponentially; check where the gradient is resolved
  auto w2 = upper_barrier_w2(2.0, rnl, choose_ctilde(ell, rnl), ell);
  for (double h : {1.0 / 32, 1.0 / 64}) {
    auto g2 = rasterize_barrier(w2.barrier, h);
    auto rep2 = check_viscosity_inequalities(prob, g2, 1e-6, [&](Vec2 x) {
      return w2.barrier.in_annulus(x) && w2.barrier.gradient_norm(x) >= h * h;
    });
    CHECK(rep2.checked > 5000);
    CHECK(rep2.super_minus_violations == 0);
  }
}

TEST_CASE("boundary_harnack_barriers branches") {
  EllipticityPair ell(1, 2);
  RescaledNonlinearity lg(Nonlinearity::log_model(), 0.5);
  auto bh = boundary_harnack_barriers(0.5, 2.0, 1.0, ell, lg);
  CHECK(bh.branch == "barriers");
  CHECK(bh.mu0 > 0.0);
  CHECK(bh.mu1.value() >= 2.0 / 3);
  CHECK_FALSE(bh.mu_integral.is_infinite());

  RescaledNonlinearity hom(Nonlinearity::homogeneous(), 1.0);
  auto bh2 = boundary_harnack_barriers(0.5, 2.0, 1.0, EllipticityPair(1, 1), hom);
  CHECK(bh2.branch == "barriers");
  CHECK(bh2.mu_integral.value() == Approx(std::log(bh2.mu1.value() / bh2.mu0)).epsilon(1e-9));

  // 1/Phi_R integrable at infinity: the mu1 = infinity branch
  std::vector<double> t, p;
  for (double x : log_grid(1e-200, 1e150, 700)) {
    t.push_back(x);
    p.push_back(x <= 1.0 ? x : x * x);
  }
  RescaledNonlinearity sq(Nonlinearity::tabulated(t, p), 1.0);
  auto bh3 = boundary_harnack_barriers(0.5, 2.0, 1.0, ell, sq);
  CHECK(bh3.branch == "mu1_infinite");
  CHECK(bh3.mu1.is_infinite());
  CHECK(bh3.mu0 == 1.0);
}
