#include <catch_amalgamated.hpp>

#include <cmath>

#include "hbr/nonlinearity.hpp"

using namespace hbr;
using Catch::Approx;

TEST_CASE("eval_phi examples") {
  CHECK(eval_phi(Nonlinearity::homogeneous(), 5.0) == 0.0);
  CHECK(eval_phi(Nonlinearity::log_model(1.0), 1.0) == 1.0);
  CHECK(eval_phi(Nonlinearity::log_model(1.0), std::exp(1.0)) == Approx(2.0 * std::exp(1.0)).epsilon(1e-15));
  CHECK(eval_phi(Nonlinearity::log_model(1.0), 0.0) == 0.0);
  CHECK(eval_phi(Nonlinearity::linear(), 0.0) == 0.0);
  CHECK_THROWS_AS(eval_phi(Nonlinearity::linear(), -1.0), DomainError);
}

TEST_CASE("eval_phi_R examples") {
  CHECK(eval_phi_R(RescaledNonlinearity(Nonlinearity::linear(), 0.5), 2.0) == 3.0);
  for (double R : {0.1, 0.5, 1.0})
    for (double t : {0.0, 0.3, 7.0}) CHECK(eval_phi_R(RescaledNonlinearity(Nonlinearity::homogeneous(), R), t) == t);
  const double e = std::exp(1.0);
  CHECK(eval_phi_R(RescaledNonlinearity(Nonlinearity::log_model(1.0), 1.0), e) == Approx(3.0 * e).epsilon(1e-15));
  CHECK_THROWS_AS(RescaledNonlinearity(Nonlinearity::linear(), 0.0), ConfigError);
  CHECK_THROWS_AS(RescaledNonlinearity(Nonlinearity::linear(), 1.5), ConfigError);
}

TEST_CASE("built-in kinds satisfy phi >= t and eta monotonicity on 1e-6..1e6") {
  auto grid = log_grid(1e-6, 1e6, 241);
  for (auto nl : {Nonlinearity::linear(), Nonlinearity::log_model(1.0), Nonlinearity::log_model(2.5)}) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double t = grid[i];
      CHECK(nl.phi(t) >= t);
      if (i > 0) {
        double a = nl.eta(grid[i - 1]), b = nl.eta(t);
        if (t <= 1.0) CHECK(b <= a);
        if (grid[i - 1] >= 1.0) CHECK(b >= a);
      }
    }
  }
}

TEST_CASE("Phi_R two ways agree to 1e-12") {
  auto R = GENERATE(take(20, random(0.01, 1.0)));
  auto t = std::exp(GENERATE(take(20, random(-12.0, 12.0))));
  for (auto nl : {Nonlinearity::linear(), Nonlinearity::log_model(1.0), Nonlinearity::log_model(3.0)}) {
    RescaledNonlinearity rnl(nl, R);
    double a = rnl.Phi(t), b = R * nl.eta(t) * t + t;
    CHECK(std::abs(a - b) <= 1e-12 * std::abs(b));
  }
}

TEST_CASE("check_structure: log model passes with sampled Lambda0 <= 2") {
  auto grid = log_grid(1e-8, 1e8, 321);
  auto rep = check_structure(Nonlinearity::log_model(1.0), grid);
  CHECK(rep.p1_phi_ge_t);
  CHECK(rep.p1_eta_monotone);
  CHECK(rep.p2_tail_decreasing);
  CHECK(rep.p2_tail_value > 0.0);
  CHECK(rep.lambda0 <= 2.0);
  // brute force oracle over the same 50 x 50 subgrid
  auto sub = log_grid(1e-8, 1e8, 50);
  double worst = 0.0;
  for (double s : sub)
    for (double t : sub)
      worst = std::max(worst, (std::abs(std::log(s * t)) + 1) / ((std::abs(std::log(s)) + 1) * (std::abs(std::log(t)) + 1)));
  CHECK(rep.lambda0_sampled == Approx(worst).epsilon(1e-12));
  for (double s : sub)
    for (double t : sub)
      CHECK(Nonlinearity::log_model(1.0).eta(s * t) <=
            rep.lambda0 * Nonlinearity::log_model(1.0).eta(s) * Nonlinearity::log_model(1.0).eta(t));
}

TEST_CASE("check_structure: linear passes with Lambda0 = 1") {
  auto rep = check_structure(Nonlinearity::linear(), log_grid(1e-8, 1e8, 101));
  CHECK(rep.passed());
  CHECK(rep.lambda0_sampled == 1.0);
  CHECK(rep.p2_tail_value == 0.0);
}

TEST_CASE("check_structure: homogeneous reports eta == 0 semantics") {
  auto rep = check_structure(Nonlinearity::homogeneous(), log_grid(1e-8, 1e8, 101));
  CHECK(rep.homogeneous);
}

TEST_CASE("check_structure: tabulated eta decreasing on (1, inf) flags P1") {
  std::vector<double> t, p;
  for (double x : log_grid(1e-9, 1e9, 73)) {
    t.push_back(x);
    p.push_back(x <= 1.0 ? x * (1.0 + std::abs(std::log(x))) : x * (1.0 + 1.0 / x));
  }
  auto rep = check_structure(Nonlinearity::tabulated(t, p), log_grid(1e-8, 1e8, 101));
  CHECK_FALSE(rep.p1_eta_monotone);
  REQUIRE(rep.p1_first_violation.has_value());
  CHECK(rep.p1_first_violation->first >= 1.0);
}

TEST_CASE("check_structure: non-monotone phi table is a structured failure") {
  std::vector<double> t = {1e-9, 1.0, 2.0, 1e9}, p = {1e-9, 3.0, 2.5, 2e9};
  try {
    check_structure(Nonlinearity::tabulated(t, p), log_grid(1e-8, 1e8, 101));
    FAIL("expected StructureError");
  } catch (const StructureError& e) {
    CHECK(e.pair().first >= 1.0);
    CHECK(e.pair().second <= 2.0);
  }
}

TEST_CASE("check_structure rejects grids narrower than [1e-8, 1e8]") {
  CHECK_THROWS_AS(check_structure(Nonlinearity::linear(), log_grid(1e-4, 1e8, 10)), ArgumentError);
}

TEST_CASE("tabulated phi interpolates log-linearly and refuses extrapolation") {
  auto nl = Nonlinearity::tabulated({1.0, 4.0}, {1.0, 16.0});
  CHECK(nl.phi(2.0) == Approx(4.0).epsilon(1e-14));  // t^2 is exact under log-linear interpolation
  CHECK_THROWS_AS(nl.phi(5.0), DomainError);
  CHECK_THROWS_AS(nl.phi(0.5), DomainError);
  CHECK_THROWS_AS(Nonlinearity::tabulated({1.0, 1.0}, {1.0, 2.0}), ConfigError);
}

TEST_CASE("osgood_classify examples") {
  auto lin = osgood_classify(Nonlinearity::linear());
  CHECK(lin.at_zero.verdict == OsgoodVerdict::diverges);
  CHECK(lin.at_infinity.verdict == OsgoodVerdict::diverges);
  // oracle: int_d^1 dt/t = |log d|
  CHECK(lin.at_zero.partial.back() == Approx(12.0 * std::log(10.0)).epsilon(1e-9));

  auto lg = osgood_classify(Nonlinearity::log_model(1.0));
  CHECK(lg.at_zero.verdict == OsgoodVerdict::diverges);
  CHECK(lg.at_infinity.verdict == OsgoodVerdict::diverges);
  // oracle: int dt/((|log t|+1)t) = log(1 + |log t|)
  CHECK(lg.at_infinity.partial.back() == Approx(std::log(1.0 + 12.0 * std::log(10.0))).epsilon(1e-9));

  std::vector<double> t, p;
  for (double x : log_grid(1e-13, 1e13, 53)) {
    t.push_back(x);
    p.push_back(x * x);
  }
  auto sq = osgood_classify(Nonlinearity::tabulated(t, p));
  CHECK(sq.at_infinity.verdict == OsgoodVerdict::converges);
  CHECK(sq.at_infinity.partial.back() == Approx(1.0 - 1e-12).epsilon(1e-8));

  auto narrow = osgood_classify(Nonlinearity::tabulated({1e-3, 1e3}, {1e-3, 1e3}));
  CHECK(narrow.at_zero.verdict == OsgoodVerdict::indeterminate);
  CHECK_FALSE(narrow.at_zero.note.empty());

  auto hom = osgood_classify(Nonlinearity::homogeneous());
  CHECK(hom.at_zero.verdict == OsgoodVerdict::diverges);
}
