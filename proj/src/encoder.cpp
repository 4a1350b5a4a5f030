#include "aspectkg/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "aspectkg/errors.hpp"

namespace aspectkg::embed {

using nlohmann::json;

double cosine(const Vector& u, const Vector& v) {
  if (u.size() != v.size())
    throw UsageError("cosine: dimension mismatch (" + std::to_string(u.size()) +
                     " vs " + std::to_string(v.size()) + ")");
  double nu = u.norm(), nv = v.norm();
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return u.dot(v) / (nu * nv);
}

std::vector<Scored> top_k_by_similarity(
    const Vector& query, const std::vector<std::pair<std::string, Vector>>& candidates,
    std::size_t k) {
  std::vector<Scored> scored;
  scored.reserve(candidates.size());
  for (const auto& [id, vec] : candidates)
    scored.push_back({id, cosine(query, vec)});
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (scored.size() > k) scored.resize(k);
  return scored;
}

namespace {

// FNV-1a, stable across platforms.
std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

MockEncoder::MockEncoder(std::uint64_t seed, int dim) : seed_(seed), dim_(dim) {
  if (dim <= 0) throw UsageError("MockEncoder: dim must be positive");
}

Vector MockEncoder::draw(const std::string& key) const {
  std::uint64_t h = fnv1a(key, seed_ ^ 14695981039346656037ull);
  std::mt19937_64 rng(h);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(dim_);
  for (int i = 0; i < dim_; ++i) v[i] = normal(rng);
  double n = v.norm();
  if (n == 0.0) v[0] = 1.0, n = 1.0;
  return v / n;
}

Vector MockEncoder::encode_text(const std::string& text) const {
  return draw("t:" + text);
}

Vector MockEncoder::encode_image(const std::string& image_id) const {
  return draw("i:" + image_id);
}

InMemoryEncoder::InMemoryEncoder(int text_dim, int image_dim)
    : text_dim_(text_dim), image_dim_(image_dim) {}

void InMemoryEncoder::put_text(const std::string& text, Vector vec) {
  if (vec.size() != text_dim_)
    throw DataError("text embedding for '" + text + "' has dim " +
                    std::to_string(vec.size()) + ", expected " +
                    std::to_string(text_dim_));
  table_["t:" + text] = std::move(vec);
}

void InMemoryEncoder::put_image(const std::string& image_id, Vector vec) {
  if (vec.size() != image_dim_)
    throw DataError("image embedding for '" + image_id + "' has dim " +
                    std::to_string(vec.size()) + ", expected " +
                    std::to_string(image_dim_));
  table_["i:" + image_id] = std::move(vec);
}

const Vector& InMemoryEncoder::lookup(const std::string& key) const {
  auto it = table_.find(key);
  if (it == table_.end()) throw DataError("no embedding for id '" + key + "'");
  return it->second;
}

Vector InMemoryEncoder::encode_text(const std::string& text) const {
  return lookup("t:" + text);
}

Vector InMemoryEncoder::encode_image(const std::string& image_id) const {
  return lookup("i:" + image_id);
}

InMemoryEncoder load_embeddings(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read embeddings file " + file.string());
  std::map<std::string, Vector> table;
  int text_dim = -1, image_dim = -1;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::string id;
    Vector vec;
    try {
      json j = json::parse(line);
      id = j.at("id").get<std::string>();
      auto values = j.at("vec").get<std::vector<double>>();
      vec = Eigen::Map<const Vector>(values.data(),
                                     static_cast<Eigen::Index>(values.size()));
    } catch (const std::exception& e) {
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": malformed embedding record: " + e.what());
    }
    if (!vec.allFinite())
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": non-finite embedding for '" + id + "'");
    int& dim = id.rfind("t:", 0) == 0 ? text_dim : image_dim;
    if (id.rfind("t:", 0) != 0 && id.rfind("i:", 0) != 0)
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": id '" + id + "' lacks t:/i: prefix");
    if (dim < 0) dim = static_cast<int>(vec.size());
    if (dim != vec.size())
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": dim mismatch for '" + id + "'");
    table[id] = std::move(vec);
  }
  InMemoryEncoder enc(text_dim < 0 ? 0 : text_dim, image_dim < 0 ? 0 : image_dim);
  for (auto& [id, vec] : table) {
    if (id.rfind("t:", 0) == 0)
      enc.put_text(id.substr(2), std::move(vec));
    else
      enc.put_image(id.substr(2), std::move(vec));
  }
  return enc;
}

void save_embeddings(const std::map<std::string, Vector>& table,
                     const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write embeddings file " + file.string());
  for (const auto& [id, vec] : table) {
    std::vector<double> values(vec.data(), vec.data() + vec.size());
    out << json{{"id", id}, {"vec", values}}.dump() << '\n';
  }
}

WordEmbeddingTable load_word_embeddings(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read word embeddings " + file.string());
  WordEmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      auto id = j.at("id").get<std::string>();
      auto values = j.at("vec").get<std::vector<double>>();
      Vector vec = Eigen::Map<const Vector>(
          values.data(), static_cast<Eigen::Index>(values.size()));
      if (table.dim == 0) table.dim = static_cast<int>(vec.size());
      if (table.dim != vec.size())
        throw DataError("dim mismatch for token '" + id + "'");
      table.vectors[id] = std::move(vec);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": malformed word embedding: " + e.what());
    }
  }
  return table;
}

}  // namespace aspectkg::embed
