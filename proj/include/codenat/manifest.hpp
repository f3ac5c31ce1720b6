#ifndef CODENAT_MANIFEST_HPP
#define CODENAT_MANIFEST_HPP

// Provenance record embedded in every file the command-line tool writes.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <map>
#include <string>

#include "json.hpp"

#include "codenat/digest.hpp"

namespace codenat {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::map<std::string, std::string> input_digests;  // path -> sha256
  std::string tool_version = std::string(kToolVersion);
  std::string timestamp;

  void add_input(const std::string& path, std::string_view content) {
    input_digests[path] = sha256_hex(content);
  }
};

/// UTC ISO-8601 time; SOURCE_DATE_EPOCH pins it for reproducible output.
inline std::string manifest_timestamp() {
  std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"config_digest", m.config_digest},
          {"input_digests", m.input_digests},
          {"tool_version", m.tool_version},
          {"timestamp", m.timestamp}};
}

/// Single-line comment form for TSV outputs.
inline std::string manifest_comment(const RunManifest& m) {
  return "# manifest=" + to_json(m).dump() + "\n";
}

}  // namespace codenat

#endif  // CODENAT_MANIFEST_HPP
