#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nfheat::cli {

/// Exit codes: 0 success, 1 computation failure, 2 validation failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

/// "a:b:logK" (K log-spaced points), "a:b:linK", or a comma list.
std::vector<double> parse_times(const std::string& spec);

}  // namespace nfheat::cli
