#include "aspectkg/ltr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "aspectkg/errors.hpp"

namespace aspectkg::ltr {

using nlohmann::json;

namespace {

std::size_t feature_count(const std::vector<QueryList>& lists) {
  if (lists.empty() || lists.front().rows.empty())
    throw UsageError("empty training set");
  std::size_t f = lists.front().rows.front().features.size();
  for (const auto& list : lists)
    for (const auto& row : list.rows)
      if (row.features.size() != f)
        throw UsageError("inconsistent feature count in query " + list.query_id);
  return f;
}

}  // namespace

NormStats zscore_fit(const std::vector<QueryList>& lists) {
  std::size_t f = feature_count(lists);
  NormStats stats;
  stats.mean.assign(f, 0.0);
  stats.stddev.assign(f, 0.0);
  std::size_t n = 0;
  for (const auto& list : lists)
    for (const auto& row : list.rows) {
      ++n;
      for (std::size_t i = 0; i < f; ++i) stats.mean[i] += row.features[i];
    }
  for (auto& m : stats.mean) m /= static_cast<double>(n);
  for (const auto& list : lists)
    for (const auto& row : list.rows)
      for (std::size_t i = 0; i < f; ++i) {
        double d = row.features[i] - stats.mean[i];
        stats.stddev[i] += d * d;
      }
  for (auto& s : stats.stddev) s = std::sqrt(s / static_cast<double>(n));
  return stats;
}

std::vector<QueryList> zscore_apply(const NormStats& stats,
                                    const std::vector<QueryList>& lists) {
  std::vector<QueryList> out = lists;
  for (auto& list : out)
    for (auto& row : list.rows) {
      if (row.features.size() != stats.mean.size())
        throw UsageError("feature count does not match normalization stats");
      for (std::size_t i = 0; i < row.features.size(); ++i)
        row.features[i] = stats.stddev[i] == 0.0
                              ? 0.0
                              : (row.features[i] - stats.mean[i]) / stats.stddev[i];
    }
  return out;
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels,
                         const std::vector<std::string>& aspect_ids) {
  if (scores.size() != labels.size() || scores.size() != aspect_ids.size())
    throw UsageError("average_precision: length mismatch");
  std::size_t n_pos = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), 1));
  if (n_pos == 0) throw DataError("average_precision: no positive label");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return aspect_ids[a] < aspect_ids[b];
  });
  double ap = 0.0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] == 1) {
      ++hits;
      ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(n_pos);
}

double score_row(const std::vector<double>& w, const FeatureRow& row) {
  if (w.size() != row.features.size())
    throw UsageError("weight/feature count mismatch");
  return std::inner_product(w.begin(), w.end(), row.features.begin(), 0.0);
}

double query_ap(const QueryList& list, const std::vector<double>& w) {
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> ids;
  scores.reserve(list.rows.size());
  for (const auto& row : list.rows) {
    scores.push_back(score_row(w, row));
    labels.push_back(row.label);
    ids.push_back(row.aspect_id);
  }
  return average_precision(scores, labels, ids);
}

double mean_ap(const std::vector<QueryList>& lists, const std::vector<double>& w) {
  if (lists.empty()) throw UsageError("mean_ap: empty query set");
  double sum = 0.0;
  for (const auto& list : lists) sum += query_ap(list, w);
  return sum / static_cast<double>(lists.size());
}

namespace {

double batch_map(const std::vector<QueryList>& data,
                 const std::vector<std::size_t>& batch,
                 const std::vector<double>& w) {
  double sum = 0.0;
  for (std::size_t idx : batch) sum += query_ap(data[idx], w);
  return sum / static_cast<double>(batch.size());
}

}  // namespace

TrainResult coordinate_ascent_train(const std::vector<QueryList>& lists,
                                    const TrainConfig& config) {
  if (config.restarts < 1) throw UsageError("restarts must be >= 1");
  if (config.minibatch_size < 1) throw UsageError("minibatch_size must be >= 1");
  std::size_t f = feature_count(lists);
  for (const auto& list : lists)
    if (list.rows.size() < 2)
      throw UsageError("query " + list.query_id + " has fewer than 2 rows");

  TrainResult result;
  result.norm = zscore_fit(lists);
  const auto data = zscore_apply(result.norm, lists);
  result.min_accepted_delta = std::numeric_limits<double>::infinity();

  double best_map = -1.0;
  for (int r = 0; r < config.restarts; ++r) {
    std::mt19937_64 rng(config.seed + static_cast<std::uint64_t>(r));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> w(f);
    double norm2 = 0.0;
    for (auto& wi : w) {
      wi = normal(rng);
      norm2 += wi * wi;
    }
    double norm = std::sqrt(norm2);
    if (norm == 0.0) { w[0] = 1.0; norm = 1.0; }
    for (auto& wi : w) wi /= norm;

    double prev_map = mean_ap(data, w);
    RestartStats stats;
    stats.index = r;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
      stats.epochs = epoch + 1;
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < order.size();
           start += config.minibatch_size) {
        std::vector<std::size_t> batch(
            order.begin() + static_cast<std::ptrdiff_t>(start),
            order.begin() + static_cast<std::ptrdiff_t>(
                                std::min(start + config.minibatch_size, order.size())));
        double current = batch_map(data, batch, w);
        for (std::size_t coord = 0; coord < f; ++coord) {
          const double base = w[coord];
          double best_val = base;
          double best_cand_map = current;
          for (double s : config.step_grid) {
            const double cands[4] = {base + s, base - s, base * (1.0 + s),
                                     base * (1.0 - s)};
            for (double cand : cands) {
              w[coord] = cand;
              double m = batch_map(data, batch, w);
              if (m > best_cand_map) {
                best_cand_map = m;
                best_val = cand;
              }
            }
          }
          w[coord] = best_val;
          if (best_cand_map > current) {
            result.min_accepted_delta =
                std::min(result.min_accepted_delta, best_cand_map - current);
            current = best_cand_map;
          }
        }
      }
      double full = mean_ap(data, w);
      double rel = std::abs(full - prev_map) / std::max(prev_map, 1e-12);
      prev_map = full;
      if (rel < config.rel_tol) {
        stats.converged = true;
        break;
      }
    }
    stats.train_map = prev_map;
    result.restarts.push_back(stats);
    if (stats.train_map > best_map) {
      best_map = stats.train_map;
      result.weights = w;
      result.best_restart = r;
      result.train_map = stats.train_map;
    }
  }
  return result;
}

std::vector<Ranked> rank(const std::vector<double>& w, const NormStats& norm,
                         const std::vector<FeatureRow>& rows) {
  std::vector<QueryList> wrapped{{rows.empty() ? "" : rows.front().query_id, rows}};
  auto normalized = zscore_apply(norm, wrapped);
  std::vector<Ranked> out;
  out.reserve(rows.size());
  for (const auto& row : normalized.front().rows)
    out.push_back({row.aspect_id, score_row(w, row), 0.0});
  std::sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.aspect_id < b.aspect_id;
  });
  if (!out.empty()) {
    double max_score = out.front().score;
    double denom = 0.0;
    for (const auto& r : out) denom += std::exp(r.score - max_score);
    for (auto& r : out) r.probability = std::exp(r.score - max_score) / denom;
  }
  return out;
}

void save_model(const Model& model, const std::filesystem::path& file) {
  json j{{"weights", model.weights},
         {"norm", {{"mean", model.norm.mean}, {"stddev", model.norm.stddev}}},
         {"feature_names", model.feature_names},
         {"config_digest", model.config_digest}};
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + file.string());
  out << j.dump(2) << '\n';
}

Model load_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read model file " + file.string());
  json j;
  try {
    in >> j;
    Model m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.norm.mean = j.at("norm").at("mean").get<std::vector<double>>();
    m.norm.stddev = j.at("norm").at("stddev").get<std::vector<double>>();
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.config_digest = j.at("config_digest").get<std::string>();
    return m;
  } catch (const std::exception& e) {
    throw DataError("malformed model file " + file.string() + ": " + e.what());
  }
}

}  // namespace aspectkg::ltr
