#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace nfheat::verify {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double target = 0.0;
  std::string tolerance;
  std::string detail;
  double seconds = 0.0;
};

struct Check {
  std::string name;
  std::string summary;
  bool quick = false;  // part of the quick suite
  std::function<CheckResult()> run;
};

/// One check per acceptance criterion, in criterion order.
const std::vector<Check>& registry();
const Check* find_check(const std::string& name);
/// "quick" or "full"
std::vector<std::string> suite(const std::string& name);

struct VerifyReport {
  std::vector<CheckResult> results;
  bool all_pass() const;
  std::string json() const;
  std::string csv() const;
};
/// Crashing checks are recorded as failures. Progress lines go to `progress` when given.
VerifyReport run_checks(const std::vector<std::string>& names, std::ostream* progress = nullptr);

}  // namespace nfheat::verify
