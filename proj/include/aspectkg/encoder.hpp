#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace aspectkg::embed {

using Vector = Eigen::VectorXd;

/// Cosine similarity; 0 when either argument has zero norm.
double cosine(const Vector& u, const Vector& v);

struct Scored {
  std::string id;
  double score = 0.0;

  bool operator==(const Scored&) const = default;
};

/// Descending score order, ties broken by id ascending.
std::vector<Scored> top_k_by_similarity(
    const Vector& query, const std::vector<std::pair<std::string, Vector>>& candidates,
    std::size_t k);

class EncoderProvider {
 public:
  virtual ~EncoderProvider() = default;
  virtual Vector encode_text(const std::string& text) const = 0;
  virtual Vector encode_image(const std::string& image_id) const = 0;
  virtual int text_dim() const = 0;
  virtual int image_dim() const = 0;
};

/// Deterministic pseudo-random unit vectors keyed by (seed, kind, input).
class MockEncoder : public EncoderProvider {
 public:
  MockEncoder(std::uint64_t seed, int dim);
  Vector encode_text(const std::string& text) const override;
  Vector encode_image(const std::string& image_id) const override;
  int text_dim() const override { return dim_; }
  int image_dim() const override { return dim_; }

 private:
  Vector draw(const std::string& key) const;
  std::uint64_t seed_;
  int dim_;
};

/// Table-backed provider. Text ids carry a "t:" prefix, image ids "i:".
class InMemoryEncoder : public EncoderProvider {
 public:
  InMemoryEncoder(int text_dim, int image_dim);
  void put_text(const std::string& text, Vector vec);
  void put_image(const std::string& image_id, Vector vec);
  Vector encode_text(const std::string& text) const override;
  Vector encode_image(const std::string& image_id) const override;
  int text_dim() const override { return text_dim_; }
  int image_dim() const override { return image_dim_; }

 private:
  const Vector& lookup(const std::string& key) const;
  std::map<std::string, Vector> table_;
  int text_dim_;
  int image_dim_;
};

/// Loads an InMemoryEncoder from a jsonl file of {"id", "vec"} records with
/// t:/i: id prefixes. Dims are validated per namespace on load.
InMemoryEncoder load_embeddings(const std::filesystem::path& file);

void save_embeddings(const std::map<std::string, Vector>& table,
                     const std::filesystem::path& file);

struct WordEmbeddingTable {
  std::map<std::string, Vector> vectors;
  int dim = 0;

  bool contains(const std::string& token) const {
    return vectors.count(token) > 0;
  }
};

WordEmbeddingTable load_word_embeddings(const std::filesystem::path& file);

}  // namespace aspectkg::embed
