#pragma once

#include <map>
#include <string>
#include <vector>

#include "aspectkg/encoder.hpp"

namespace aspectkg::text {

using Tokens = std::vector<std::string>;
using TermVector = std::map<std::string, double>;

/// Lowercases and splits on non-alphanumeric boundaries; bytes outside
/// ASCII are kept as token characters.
Tokens tokenize(const std::string& text);

struct CorpusStats {
  std::size_t n_docs = 0;
  std::map<std::string, std::size_t> df;
  double avgdl = 0.0;

  std::size_t doc_freq(const std::string& token) const {
    auto it = df.find(token);
    return it == df.end() ? 0 : it->second;
  }
};

CorpusStats build_corpus_stats(const std::vector<Tokens>& docs);

inline constexpr double kBm25K1 = 1.2;
inline constexpr double kBm25B = 0.75;

double bm25(const Tokens& query, const Tokens& doc, const CorpusStats& stats);

/// (1 + ln tf) * (ln((1+N)/(1+df)) + 1) term weights.
TermVector tfidf_weights(const Tokens& tokens, const CorpusStats& stats);

double tfidf_cosine(const Tokens& query, const Tokens& doc,
                    const CorpusStats& stats);

/// Unique shared tokens; shared entity annotations are added only when both
/// sides carry annotations. Raw count, never normalized.
std::size_t overlap(const Tokens& query, const Tokens& doc,
                    const std::vector<std::string>& query_entities = {},
                    const std::vector<std::string>& doc_entities = {});

double w2v_sim(const Tokens& query, const Tokens& doc,
               const embed::WordEmbeddingTable& table, const CorpusStats& stats);

}  // namespace aspectkg::text
