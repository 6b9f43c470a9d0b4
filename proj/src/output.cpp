#include "nfheat/output.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "nfheat/error.hpp"

namespace nfheat::output {

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw ComputationError("sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

std::filesystem::path resolve_output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("NFHEAT_OUTPUT_DIR"); env && *env) return env;
  return "nfheat_out";
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw ComputationError("cannot write " + p.string());
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void write_run(const std::filesystem::path& dir, const std::string& subcommand, const Artifacts& artifacts) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ComputationError("cannot create output directory " + dir.string() + ": " + ec.message());
  nlohmann::ordered_json manifest;
  manifest["tool"] = "nfheat";
  manifest["subcommand"] = subcommand;
  manifest["created_utc"] = utc_now();
  manifest["files"] = nlohmann::json::array();
  for (const auto& [name, bytes] : artifacts.files) {
    write_file(dir / name, bytes);
    manifest["files"].push_back({{"path", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace nfheat::output
