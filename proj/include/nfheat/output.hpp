#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace nfheat::output {

/// Files of one run, held in memory until the run has succeeded.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;  // relative name -> bytes
  void add(std::string name, std::string bytes) { files.emplace_back(std::move(name), std::move(bytes)); }
};

std::string sha256_hex(const std::string& bytes);

/// --out, else $NFHEAT_OUTPUT_DIR, else ./nfheat_out
std::filesystem::path resolve_output_dir(const std::string& flag);

/// Writes every artifact plus manifest.json (checksums, sizes, timestamp).
void write_run(const std::filesystem::path& dir, const std::string& subcommand, const Artifacts& artifacts);

}  // namespace nfheat::output
