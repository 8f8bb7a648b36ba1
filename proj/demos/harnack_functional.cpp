// Harnack and Carleson functionals for the built-in nonlinearities at a few scales.
#include <cstdio>

#include "hbr/harnack.hpp"
#include "hbr/nonlinearity.hpp"

int main() {
  using namespace hbr;
  const Nonlinearity nls[] = {Nonlinearity::homogeneous(), Nonlinearity::linear(), Nonlinearity::log_model()};
  const double m = 1.0, M = 10.0, r = 0.5;

  std::printf("%-12s %6s %14s %14s %14s\n", "phi", "R", "harnack(m,M)", "carleson(m,M)", "carleson(0,M)");
  for (const auto& nl : nls) {
    for (double R : {1.0, 0.1, 0.01}) {
      auto h = harnack_integral_rescaled(m, M, r, R, 0.0, nl);
      RescaledNonlinearity rnl(nl, R);
      auto c = carleson_integral(m, M, rnl);
      auto c0 = carleson_integral(0.0, M, rnl);
      std::printf("%-12s %6.2f %14.6g %14.6g %14s\n", to_string(nl.kind).c_str(), R, h.value(), c.value(),
                  c0.is_infinite() ? "+inf" : std::to_string(c0.value()).c_str());
    }
  }

  std::printf("\nscaling residual (m, M) = (1, 10), r = 0.5:\n");
  for (const auto& nl : nls)
    for (double R : {1.0, 0.1, 0.01})
      std::printf("  %-12s R = %-5g %.3g\n", to_string(nl.kind).c_str(), R, scaling_identity_residual(m, M, r, R, nl));

  std::printf("\nlargest M reachable from a = 1 with budget 1:\n");
  for (const auto& nl : nls) {
    auto top = invert_upper(1.0, 1.0, 1.0, nl);
    std::printf("  %-12s %s\n", to_string(nl.kind).c_str(),
                top.is_infinite() ? "+inf" : std::to_string(top.value()).c_str());
  }
}
