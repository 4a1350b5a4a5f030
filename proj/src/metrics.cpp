#include "aspectkg/metrics.hpp"

#include <algorithm>
#include <fstream>

#include "aspectkg/errors.hpp"

namespace aspectkg::metrics {

using nlohmann::json;

double recall_at_k(const std::vector<std::string>& ranking,
                   const std::set<std::string>& relevant, std::size_t k) {
  if (relevant.empty()) throw DataError("recall_at_k: empty relevant set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    if (relevant.count(ranking[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double precision_at_k(const std::vector<std::string>& ranking,
                      const std::set<std::string>& relevant, std::size_t k) {
  if (k < 1) throw UsageError("precision_at_k: k must be >= 1");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, ranking.size()); ++i)
    if (relevant.count(ranking[i])) ++hits;
  return static_cast<double>(hits) / static_cast<double>(k);
}

json report_to_json(const MetricReport& report) {
  json recall = json::object(), precision = json::object();
  for (const auto& [k, v] : report.recall_at) recall[std::to_string(k)] = v;
  for (const auto& [k, v] : report.precision_at)
    precision[std::to_string(k)] = v;
  return json{{"map", report.map},
              {"recall_at", recall},
              {"precision_at", precision},
              {"n_queries", report.n_queries}};
}

EalEval eval_eal(const std::vector<double>& weights, const ltr::NormStats& norm,
                 const std::vector<ltr::QueryList>& lists) {
  if (lists.empty()) throw UsageError("eval_eal: empty evaluation set");
  auto normalized = ltr::zscore_apply(norm, lists);
  EalEval eval;
  double sum = 0.0;
  for (const auto& list : normalized) {
    double ap = ltr::query_ap(list, weights);
    sum += ap;
    eval.per_query.push_back({list.query_id, ap});
  }
  std::sort(eval.per_query.begin(), eval.per_query.end(),
            [](const auto& a, const auto& b) { return a.query_id < b.query_id; });
  eval.report.map = sum / static_cast<double>(lists.size());
  eval.report.n_queries = lists.size();
  return eval;
}

std::map<std::string, std::vector<std::string>> candidate_pool_from_triples(
    const std::vector<air::AirTriple>& triples) {
  std::map<std::string, std::set<std::string>> sets;
  for (const auto& t : triples) sets[t.entity_id].insert(t.positive_image_id);
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& [entity, ids] : sets)
    out[entity] = {ids.begin(), ids.end()};
  return out;
}

AirEval eval_air(const air::ProjectionModel& model,
                 const std::vector<air::AirTriple>& test_triples,
                 const embed::EncoderProvider& provider,
                 const std::map<std::string, std::vector<std::string>>& candidate_pool,
                 const std::vector<int>& ks, bool use_baseline) {
  if (test_triples.empty()) throw UsageError("eval_air: empty test set");
  // group by (entity, aspect); the overall image is shared within a group
  struct Group {
    std::string overall;
    std::set<std::string> relevant;
  };
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (const auto& t : test_triples) {
    auto& g = groups[{t.entity_id, t.aspect_label}];
    g.overall = t.overall_image_id;
    g.relevant.insert(t.positive_image_id);
  }

  AirEval eval;
  std::map<int, double> recall_sums, precision_sums;
  int max_k = *std::max_element(ks.begin(), ks.end());
  for (const auto& [key, group] : groups) {
    const auto& [entity_id, label] = key;
    auto pool_it = candidate_pool.find(entity_id);
    if (pool_it == candidate_pool.end())
      throw DataError("no candidate images for entity " + entity_id);
    auto scored = use_baseline
                      ? air::retrieve_clip_baseline(provider, label,
                                                    pool_it->second)
                      : air::retrieve(model, provider, group.overall, label,
                                      pool_it->second);
    std::vector<std::string> ranking;
    for (const auto& s : scored) ranking.push_back(s.id);
    for (int k : ks) {
      recall_sums[k] +=
          recall_at_k(ranking, group.relevant, static_cast<std::size_t>(k));
      precision_sums[k] +=
          precision_at_k(ranking, group.relevant, static_cast<std::size_t>(k));
    }
    eval.per_query.push_back(
        {entity_id + "/" + label,
         recall_at_k(ranking, group.relevant, static_cast<std::size_t>(max_k))});
  }
  double n = static_cast<double>(groups.size());
  for (int k : ks) {
    eval.report.recall_at[k] = recall_sums[k] / n;
    eval.report.precision_at[k] = precision_sums[k] / n;
  }
  eval.report.n_queries = groups.size();
  return eval;
}

void write_per_query_tsv(const std::vector<PerQueryResult>& rows,
                         const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write per-query file " + file.string());
  out << "query_id\tvalue\n";
  char buf[32];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", row.value);
    out << row.query_id << '\t' << buf << '\n';
  }
}

}  // namespace aspectkg::metrics
