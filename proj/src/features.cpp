#include "aspectkg/features.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "aspectkg/errors.hpp"

namespace aspectkg::features {

ContextSentence make_context(const std::string& raw, const std::string& entity_id) {
  return {raw, text::tokenize(raw), entity_id, {}};
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = {
      "name-bm25",    "name-tfidf",      "name-w2v",    "content-bm25",
      "content-tfidf", "content-overlap", "content-w2v", "image"};
  return names;
}

FeatureConfig FeatureConfig::all_text() {
  return {{kNameBm25, kNameTfidf, kNameW2v, kContentBm25, kContentTfidf,
           kContentOverlap, kContentW2v}};
}

FeatureConfig FeatureConfig::all_text_with_image() {
  auto cfg = all_text();
  cfg.indices.push_back(kImage);
  return cfg;
}

FeatureConfig FeatureConfig::text_subset_with_image(
    const std::vector<int>& text_indices) {
  FeatureConfig cfg{text_indices};
  std::sort(cfg.indices.begin(), cfg.indices.end());
  cfg.indices.push_back(kImage);
  return cfg;
}

std::vector<int> FeatureConfig::sample_text_subset(int k, std::uint64_t seed) {
  if (k < 0 || k > kNumTextFeatures)
    throw UsageError("text feature subset size out of range");
  std::vector<int> pool(kNumTextFeatures);
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

bool FeatureConfig::uses_image() const {
  return std::find(indices.begin(), indices.end(), kImage) != indices.end();
}

std::vector<std::string> FeatureConfig::names() const {
  std::vector<std::string> out;
  for (int i : indices) out.push_back(feature_names().at(i));
  return out;
}

double image_feature(const ContextSentence& ctx, const kg::AspectNode& aspect,
                     const kg::AspectKG& kg, const embed::EncoderProvider& provider) {
  std::vector<std::pair<std::string, embed::Vector>> candidates;
  for (const auto& link : kg.links) {
    if (link.entity_id != aspect.entity_id || link.aspect_path != aspect.path)
      continue;
    candidates.emplace_back(link.image_id, provider.encode_image(link.image_id));
  }
  if (candidates.empty()) return 0.0;
  auto label_vec = provider.encode_text(aspect.path.front());
  auto selected = embed::top_k_by_similarity(label_vec, candidates, 5);
  std::map<std::string, const embed::Vector*> by_id;
  for (const auto& [id, vec] : candidates) by_id[id] = &vec;
  auto ctx_vec = provider.encode_text(ctx.raw);
  double sum = 0.0;
  for (const auto& s : selected) sum += embed::cosine(ctx_vec, *by_id.at(s.id));
  return sum / static_cast<double>(selected.size());
}

QueryList assemble_feature_rows(const ContextSentence& ctx,
                                const std::string& query_id,
                                const std::vector<AspectDoc>& candidates,
                                const std::string& gold_aspect_id,
                                const FeatureConfig& config,
                                const kg::AspectKG* kg,
                                const embed::EncoderProvider* provider,
                                const embed::WordEmbeddingTable* w2v_table,
                                const ImageScorer* image_scorer) {
  std::size_t gold_count = 0;
  for (const auto& c : candidates)
    if (c.aspect_id == gold_aspect_id) ++gold_count;
  if (gold_count != 1)
    throw DataError("query " + query_id + ": gold aspect '" + gold_aspect_id +
                    "' matches " + std::to_string(gold_count) +
                    " candidates, expected 1");

  std::vector<text::Tokens> name_docs, content_docs;
  for (const auto& c : candidates) {
    name_docs.push_back(text::tokenize(c.name));
    content_docs.push_back(text::tokenize(c.content));
  }
  auto name_stats = text::build_corpus_stats(name_docs);
  auto content_stats = text::build_corpus_stats(content_docs);

  const bool needs_w2v =
      std::any_of(config.indices.begin(), config.indices.end(),
                  [](int i) { return i == kNameW2v || i == kContentW2v; });
  if (needs_w2v && !w2v_table)
    throw UsageError("w2v features requested without a word embedding table");
  const bool needs_image = config.uses_image();
  if (needs_image && !image_scorer && (!kg || !provider))
    throw UsageError("image feature requested without KG and encoder");

  QueryList list;
  list.query_id = query_id;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& cand = candidates[i];
    FeatureRow row;
    row.query_id = query_id;
    row.aspect_id = cand.aspect_id;
    row.label = cand.aspect_id == gold_aspect_id ? 1 : 0;
    for (int idx : config.indices) {
      double value = 0.0;
      switch (idx) {
        case kNameBm25:
          value = text::bm25(ctx.tokens, name_docs[i], name_stats);
          break;
        case kNameTfidf:
          value = text::tfidf_cosine(ctx.tokens, name_docs[i], name_stats);
          break;
        case kNameW2v:
          value = text::w2v_sim(ctx.tokens, name_docs[i], *w2v_table, name_stats);
          break;
        case kContentBm25:
          value = text::bm25(ctx.tokens, content_docs[i], content_stats);
          break;
        case kContentTfidf:
          value = text::tfidf_cosine(ctx.tokens, content_docs[i], content_stats);
          break;
        case kContentOverlap:
          value = static_cast<double>(
              text::overlap(ctx.tokens, content_docs[i], ctx.entity_annotations,
                            cand.entity_annotations));
          break;
        case kContentW2v:
          value = text::w2v_sim(ctx.tokens, content_docs[i], *w2v_table,
                                content_stats);
          break;
        case kImage:
          if (image_scorer) {
            value = (*image_scorer)(ctx, cand);
          } else {
            kg::AspectNode aspect{ctx.entity_id, {cand.name}};
            value = image_feature(ctx, aspect, *kg, *provider);
          }
          break;
        default:
          throw UsageError("unknown feature index " + std::to_string(idx));
      }
      row.features.push_back(value);
    }
    list.rows.push_back(std::move(row));
  }
  return list;
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_run_file(const std::vector<QueryList>& lists,
                    const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write run file " + file.string());
  for (const auto& list : lists) {
    for (const auto& row : list.rows) {
      out << row.query_id << ' ' << row.aspect_id << ' ' << row.label;
      for (double f : row.features) out << ' ' << format_double(f);
      out << '\n';
    }
  }
}

std::vector<QueryList> read_run_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read run file " + file.string());
  std::vector<QueryList> lists;
  std::string line;
  std::size_t lineno = 0;
  std::size_t feature_count = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    FeatureRow row;
    if (!(ss >> row.query_id >> row.aspect_id >> row.label))
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": malformed run-file line");
    double f;
    while (ss >> f) row.features.push_back(f);
    if (feature_count == 0) feature_count = row.features.size();
    if (row.features.size() != feature_count)
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": inconsistent feature count");
    if (lists.empty() || lists.back().query_id != row.query_id) {
      lists.push_back({row.query_id, {}});
    }
    lists.back().rows.push_back(std::move(row));
  }
  return lists;
}

}  // namespace aspectkg::features
