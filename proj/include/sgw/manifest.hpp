#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sgw/errors.hpp"

namespace sgw {

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a 64-bit.
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for hashing: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return hex64(fnv1a(buf.str()));
}

/// Provenance record written next to every command's outputs. The manifest
/// hash covers only the deterministic fields (config snapshot, seeds, tool
/// version, input hash, decision flags) so that re-running a manifest
/// reproduces outputs byte-identically; the timestamp lives outside the
/// hashed material.
struct RunManifest {
  std::string command;
  std::string config_snapshot;
  std::string input_hash;  // empty when the command takes no data file
  std::uint64_t seed = 0;
  std::vector<std::string> flags;  // decision flags in effect, "key=value"
  std::string timestamp;           // ISO-8601 UTC

  std::string hash() const {
    std::string material = "sgw/" + std::string(kToolVersion) + "\n" + command + "\n" +
                           config_snapshot + "\n" + input_hash + "\n" + std::to_string(seed) + "\n";
    for (const auto& f : flags) material += f + "\n";
    return hex64(fnv1a(material));
  }

  static std::string now_utc() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }
};

} // namespace sgw
