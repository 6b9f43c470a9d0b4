// Runs every acceptance criterion and prints one line per criterion.
#include <cstdio>
#include <iostream>

#include "nfheat/verify.hpp"

int main() {
  using namespace nfheat::verify;
  const auto names = suite("full");
  const auto report = run_checks(names);
  int failed = 0;
  for (std::size_t i = 0; i < report.results.size(); ++i) {
    const auto& r = report.results[i];
    std::printf("[%s] criterion %zu %s: measured %.6g (target %.6g; %s) %s [%.1f s]\n", r.pass ? "PASS" : "FAIL", i + 1,
                r.name.c_str(), r.measured, r.target, r.tolerance.c_str(), r.detail.c_str(), r.seconds);
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  }
  std::printf("%zu/%zu criteria pass\n", report.results.size() - static_cast<std::size_t>(failed), report.results.size());
  return failed == 0 ? 0 : 1;
}
