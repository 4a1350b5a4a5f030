#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace aspectkg::manifest {

inline constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a_bytes(const void* data, std::size_t size,
                          std::uint64_t seed = 14695981039346656037ull);

/// 16-hex-digit digest of a file's bytes; changes iff any input byte changes.
std::string digest_file(const std::filesystem::path& file);

std::string digest_string(const std::string& s);

struct RunManifest {
  std::string command;
  std::string config_digest;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> input_digests;  // path -> digest
  nlohmann::json metrics = nlohmann::json::object();
  std::string tool_version = kToolVersion;
  std::string timestamp;  // ISO-8601 UTC, excluded from determinism checks
};

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& file);

}  // namespace aspectkg::manifest
