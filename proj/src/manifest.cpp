#include "aspectkg/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

#include "aspectkg/errors.hpp"

namespace aspectkg::manifest {

using nlohmann::json;

std::uint64_t fnv1a_bytes(const void* data, std::size_t size,
                          std::uint64_t seed) {
  auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string to_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string digest_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read input for digest: " + file.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a_bytes(buf, static_cast<std::size_t>(in.gcount()), h);
  return to_hex(h);
}

std::string digest_string(const std::string& s) {
  return to_hex(fnv1a_bytes(s.data(), s.size()));
}

void write_manifest(const RunManifest& manifest,
                    const std::filesystem::path& file) {
  auto now = std::chrono::system_clock::now();
  auto t = std::chrono::system_clock::to_time_t(now);
  char ts[32];
  std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));

  json inputs = json::object();
  for (const auto& [path, digest] : manifest.input_digests)
    inputs[path] = digest;
  json j{{"command", manifest.command},
         {"config_digest", manifest.config_digest},
         {"seeds", manifest.seeds},
         {"input_digests", inputs},
         {"metrics", manifest.metrics},
         {"tool_version", manifest.tool_version},
         {"timestamp", manifest.timestamp.empty() ? ts : manifest.timestamp}};
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + file.string());
  out << j.dump(2) << '\n';
}

}  // namespace aspectkg::manifest
