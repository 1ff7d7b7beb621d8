// One line per acceptance criterion; nonzero exit if any is red.
#include "spp/verification.hpp"

#include <cstdio>

int main() {
  int failed = 0;
  for (const auto& r : spp::run_acceptance_suite()) {
    std::printf("criterion %2d %s: %s -- %s (%.2fs)\n", r.id, r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str(), r.seconds);
    std::fflush(stdout);
    failed += !r.passed;
  }
  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
