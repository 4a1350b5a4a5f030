#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aspectkg/features.hpp"

namespace aspectkg::ltr {

using features::FeatureRow;
using features::QueryList;

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population sigma

  bool operator==(const NormStats&) const = default;
};

NormStats zscore_fit(const std::vector<QueryList>& lists);
std::vector<QueryList> zscore_apply(const NormStats& stats,
                                    const std::vector<QueryList>& lists);

/// AP with descending-score order and ties broken by aspect_id ascending.
/// Throws DataError when no label is positive.
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels,
                         const std::vector<std::string>& aspect_ids);

double score_row(const std::vector<double>& w, const FeatureRow& row);

double query_ap(const QueryList& list, const std::vector<double>& w);

double mean_ap(const std::vector<QueryList>& lists, const std::vector<double>& w);

struct TrainConfig {
  std::size_t minibatch_size = 1000;  // query lists per batch
  double rel_tol = 0.01;
  int restarts = 20;
  std::vector<double> step_grid = {0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
  int max_epochs = 100;
  std::uint64_t seed = 0;
};

struct RestartStats {
  int index = 0;
  double train_map = 0.0;
  int epochs = 0;
  bool converged = false;  // stopped on the relative-change rule
};

struct TrainResult {
  std::vector<double> weights;
  NormStats norm;
  double train_map = 0.0;
  int best_restart = 0;
  std::vector<RestartStats> restarts;
  /// Smallest batch-MAP delta over all accepted coordinate steps; accepted
  /// steps must strictly improve, so this stays > 0.
  double min_accepted_delta = 0.0;
};

TrainResult coordinate_ascent_train(const std::vector<QueryList>& lists,
                                    const TrainConfig& config);

struct Ranked {
  std::string aspect_id;
  double score = 0.0;
  double probability = 0.0;
};

/// Scores w . zscore(features); ordering is the contract, the softmax
/// probabilities are presentation only.
std::vector<Ranked> rank(const std::vector<double>& w, const NormStats& norm,
                         const std::vector<FeatureRow>& rows);

struct Model {
  std::vector<double> weights;
  NormStats norm;
  std::vector<std::string> feature_names;
  std::string config_digest;
};

void save_model(const Model& model, const std::filesystem::path& file);
Model load_model(const std::filesystem::path& file);

}  // namespace aspectkg::ltr
