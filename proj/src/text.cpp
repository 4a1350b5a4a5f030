#include "aspectkg/text.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace aspectkg::text {

Tokens tokenize(const std::string& text) {
  Tokens out;
  std::string current;
  for (unsigned char c : text) {
    bool word_char = std::isalnum(c) || c >= 0x80;
    if (word_char) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

CorpusStats build_corpus_stats(const std::vector<Tokens>& docs) {
  CorpusStats stats;
  stats.n_docs = docs.size();
  std::size_t total_len = 0;
  for (const auto& doc : docs) {
    total_len += doc.size();
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& t : seen) ++stats.df[t];
  }
  if (!docs.empty())
    stats.avgdl = static_cast<double>(total_len) / static_cast<double>(docs.size());
  return stats;
}

namespace {

std::map<std::string, std::size_t> term_freq(const Tokens& tokens) {
  std::map<std::string, std::size_t> tf;
  for (const auto& t : tokens) ++tf[t];
  return tf;
}

}  // namespace

double bm25(const Tokens& query, const Tokens& doc, const CorpusStats& stats) {
  if (stats.n_docs == 0 || stats.avgdl == 0.0) return 0.0;
  auto tf = term_freq(doc);
  std::set<std::string> unique(query.begin(), query.end());
  double n = static_cast<double>(stats.n_docs);
  double dl = static_cast<double>(doc.size());
  double score = 0.0;
  for (const auto& t : unique) {
    auto it = tf.find(t);
    if (it == tf.end()) continue;
    double f = static_cast<double>(it->second);
    double df = static_cast<double>(stats.doc_freq(t));
    double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
    double denom = f + kBm25K1 * (1.0 - kBm25B + kBm25B * dl / stats.avgdl);
    score += idf * f * (kBm25K1 + 1.0) / denom;
  }
  return score;
}

TermVector tfidf_weights(const Tokens& tokens, const CorpusStats& stats) {
  TermVector weights;
  double n = static_cast<double>(stats.n_docs);
  for (const auto& [t, f] : term_freq(tokens)) {
    double df = static_cast<double>(stats.doc_freq(t));
    double idf = std::log((1.0 + n) / (1.0 + df)) + 1.0;
    weights[t] = (1.0 + std::log(static_cast<double>(f))) * idf;
  }
  return weights;
}

namespace {

double sparse_cosine(const TermVector& a, const TermVector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [t, w] : a) {
    na += w * w;
    auto it = b.find(t);
    if (it != b.end()) dot += w * it->second;
  }
  for (const auto& [t, w] : b) nb += w * w;
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double tfidf_cosine(const Tokens& query, const Tokens& doc,
                    const CorpusStats& stats) {
  return sparse_cosine(tfidf_weights(query, stats), tfidf_weights(doc, stats));
}

std::size_t overlap(const Tokens& query, const Tokens& doc,
                    const std::vector<std::string>& query_entities,
                    const std::vector<std::string>& doc_entities) {
  std::set<std::string> q(query.begin(), query.end());
  std::set<std::string> d(doc.begin(), doc.end());
  std::size_t count = 0;
  for (const auto& t : q)
    if (d.count(t)) ++count;
  if (!query_entities.empty() && !doc_entities.empty()) {
    std::set<std::string> qe(query_entities.begin(), query_entities.end());
    std::set<std::string> de(doc_entities.begin(), doc_entities.end());
    for (const auto& e : qe)
      if (de.count(e)) ++count;
  }
  return count;
}

double w2v_sim(const Tokens& query, const Tokens& doc,
               const embed::WordEmbeddingTable& table, const CorpusStats& stats) {
  if (table.dim == 0) return 0.0;
  auto weighted_sum = [&](const Tokens& tokens) {
    embed::Vector v = embed::Vector::Zero(table.dim);
    bool any = false;
    for (const auto& [t, w] : tfidf_weights(tokens, stats)) {
      auto it = table.vectors.find(t);
      if (it == table.vectors.end()) continue;
      v += w * it->second;
      any = true;
    }
    return std::make_pair(v, any);
  };
  auto [qv, q_any] = weighted_sum(query);
  auto [dv, d_any] = weighted_sum(doc);
  if (!q_any || !d_any) return 0.0;
  return embed::cosine(qv, dv);
}

}  // namespace aspectkg::text
