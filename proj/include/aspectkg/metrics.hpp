#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspectkg/air.hpp"
#include "aspectkg/ltr.hpp"

namespace aspectkg::metrics {

double recall_at_k(const std::vector<std::string>& ranking,
                   const std::set<std::string>& relevant, std::size_t k);

double precision_at_k(const std::vector<std::string>& ranking,
                      const std::set<std::string>& relevant, std::size_t k);

struct MetricReport {
  double map = 0.0;
  std::map<int, double> recall_at;
  std::map<int, double> precision_at;
  std::size_t n_queries = 0;
};

nlohmann::json report_to_json(const MetricReport& report);

struct PerQueryResult {
  std::string query_id;
  double value = 0.0;
};

struct EalEval {
  MetricReport report;
  std::vector<PerQueryResult> per_query;  // AP per query, sorted by id
};

EalEval eval_eal(const std::vector<double>& weights, const ltr::NormStats& norm,
                 const std::vector<ltr::QueryList>& lists);

struct AirEval {
  MetricReport report;
  std::vector<PerQueryResult> per_query;  // recall at the largest k per group
};

/// Recall@k over (entity, aspect) groups of the test triples. Candidates per
/// group are the entity's images in `candidate_pool`; relevant images are the
/// group's positives. With `use_baseline` the raw aspect-text similarity is
/// used instead of the trained projection.
AirEval eval_air(const air::ProjectionModel& model,
                 const std::vector<air::AirTriple>& test_triples,
                 const embed::EncoderProvider& provider,
                 const std::map<std::string, std::vector<std::string>>& candidate_pool,
                 const std::vector<int>& ks, bool use_baseline = false);

/// Candidate pool keyed by entity: distinct positive images over all triples.
std::map<std::string, std::vector<std::string>> candidate_pool_from_triples(
    const std::vector<air::AirTriple>& triples);

void write_per_query_tsv(const std::vector<PerQueryResult>& rows,
                         const std::filesystem::path& file);

}  // namespace aspectkg::metrics
