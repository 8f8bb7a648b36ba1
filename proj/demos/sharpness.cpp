// Explicit solution pair showing the H^{gamma - 1} ratio bound, plus the threshold scan.
#include <cstdio>
#include <cstdlib>

#include "hbr/sharpness.hpp"

int main(int argc, char** argv) {
  using namespace hbr;
  double eps = argc > 1 ? std::atof(argv[1]) : 0.03;

  std::printf("eps = %g  gamma = %.6f\n\n", eps, sharpness_gamma(eps));
  std::printf("%10s %10s %10s %10s %12s %8s\n", "log log H", "K", "R", "log log M", "log ratio", "chain");
  for (double llH : {2.25, 2.5, 3.0, 4.0}) {
    auto rep = sharpness_example(LogLogValue::from_loglog(llH), eps);
    std::printf("%10.3f %10.4f %10.4f %10.4f %12.5g %8s\n", llH, rep.K, rep.R, rep.M.loglog_value().value_or(0.0),
                rep.psi_ratio.log_value(), rep.chain_valid ? "valid" : "broken");
  }

  std::printf("\nthreshold scan:\n");
  for (double e : {0.05, 0.1, 0.2}) {
    auto j = lemma61_check(e).to_json();
    std::printf("  eps = %-5g Khat = %-6.3g sufficient condition holds from K = %.3g\n", e, j["Khat"].get<double>(),
                j["K_sufficient"].get<double>());
  }
}
