#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aspectkg/encoder.hpp"
#include "aspectkg/kg.hpp"
#include "aspectkg/text.hpp"

namespace aspectkg::features {

struct ContextSentence {
  std::string raw;
  text::Tokens tokens;  // always tokenize(raw)
  std::string entity_id;
  std::vector<std::string> entity_annotations;
};

ContextSentence make_context(const std::string& raw, const std::string& entity_id);

struct AspectDoc {
  std::string aspect_id;
  std::string name;
  std::string content;
  std::vector<std::string> entity_annotations;
};

struct FeatureRow {
  std::string query_id;
  std::string aspect_id;
  std::vector<double> features;
  int label = 0;

  bool operator==(const FeatureRow&) const = default;
};

struct QueryList {
  std::string query_id;
  std::vector<FeatureRow> rows;

  bool operator==(const QueryList&) const = default;
};

// Canonical feature order. Aspect-name features skip overlap: the name
// rarely appears verbatim in the context.
enum FeatureIndex {
  kNameBm25 = 0,
  kNameTfidf = 1,
  kNameW2v = 2,
  kContentBm25 = 3,
  kContentTfidf = 4,
  kContentOverlap = 5,
  kContentW2v = 6,
  kImage = 7,
};

inline constexpr int kNumTextFeatures = 7;

const std::vector<std::string>& feature_names();

struct FeatureConfig {
  std::vector<int> indices;  // strictly increasing subset of 0..7

  static FeatureConfig all_text();
  static FeatureConfig all_text_with_image();
  static FeatureConfig text_subset_with_image(const std::vector<int>& text_indices);
  /// Seeded uniform sample of k of the 7 text features, sorted ascending.
  static std::vector<int> sample_text_subset(int k, std::uint64_t seed);

  bool uses_image() const;
  std::vector<std::string> names() const;
};

/// Mean context/image similarity over the aspect's top-5 images by
/// aspect-label similarity. 0 when the aspect has no linked images.
double image_feature(const ContextSentence& ctx, const kg::AspectNode& aspect,
                     const kg::AspectKG& kg, const embed::EncoderProvider& provider);

/// Replacement scorer for the image feature (e.g. the AIR-backed variant).
using ImageScorer =
    std::function<double(const ContextSentence&, const AspectDoc&)>;

QueryList assemble_feature_rows(const ContextSentence& ctx,
                                const std::string& query_id,
                                const std::vector<AspectDoc>& candidates,
                                const std::string& gold_aspect_id,
                                const FeatureConfig& config,
                                const kg::AspectKG* kg,
                                const embed::EncoderProvider* provider,
                                const embed::WordEmbeddingTable* w2v_table,
                                const ImageScorer* image_scorer = nullptr);

/// Run-file interchange: `query_id aspect_id label f1 ... fF` per line.
void write_run_file(const std::vector<QueryList>& lists,
                    const std::filesystem::path& file);
std::vector<QueryList> read_run_file(const std::filesystem::path& file);

}  // namespace aspectkg::features
