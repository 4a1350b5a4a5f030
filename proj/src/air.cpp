#include "aspectkg/air.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "aspectkg/errors.hpp"

namespace aspectkg::air {

using embed::Vector;
using nlohmann::json;

ProjectionModel make_model(int image_dim, int text_dim, double tau,
                           std::uint64_t seed) {
  if (image_dim <= 0 || text_dim <= 0)
    throw UsageError("model dims must be positive");
  if (tau <= 0.0) throw UsageError("tau must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ProjectionModel model;
  model.tau = tau;
  const int cols = image_dim + text_dim;
  model.W = Eigen::MatrixXd(image_dim, cols);
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (int r = 0; r < image_dim; ++r)
    for (int c = 0; c < cols; ++c) model.W(r, c) = scale * normal(rng);
  return model;
}

ProjectionModel identity_model(int image_dim, int text_dim, double tau) {
  ProjectionModel model;
  model.tau = tau;
  model.W = Eigen::MatrixXd::Zero(image_dim, image_dim + text_dim);
  model.W.leftCols(image_dim) = Eigen::MatrixXd::Identity(image_dim, image_dim);
  return model;
}

namespace {

// entity -> sorted distinct image ids linked to it
std::map<std::string, std::set<std::string>> images_by_entity(
    const kg::AspectKG& kg) {
  std::map<std::string, std::set<std::string>> out;
  for (const auto& link : kg.links) out[link.entity_id].insert(link.image_id);
  return out;
}

}  // namespace

std::optional<std::string> overall_image(const kg::AspectKG& kg,
                                         const std::string& entity_id,
                                         const embed::EncoderProvider& provider) {
  const kg::EntityRecord* entity = nullptr;
  for (const auto& e : kg.entities)
    if (e.id == entity_id) { entity = &e; break; }
  if (!entity) throw DataError("unknown entity " + entity_id);
  std::set<std::string> images;
  for (const auto& link : kg.links)
    if (link.entity_id == entity_id) images.insert(link.image_id);
  if (images.empty()) return std::nullopt;
  Vector name_vec = provider.encode_text(entity->name);
  std::string best;
  double best_score = -2.0;
  for (const auto& id : images) {
    double score = embed::cosine(name_vec, provider.encode_image(id));
    if (score > best_score) {
      best_score = score;
      best = id;
    }
  }
  return best;
}

BuildTriplesResult build_triples(const kg::AspectKG& kg,
                                 const embed::EncoderProvider& provider) {
  BuildTriplesResult result;
  auto by_entity = images_by_entity(kg);
  for (const auto& entity : kg.entities) {
    auto it = by_entity.find(entity.id);
    if (it == by_entity.end() || it->second.empty()) {
      result.skipped_entities.push_back(entity.id);
      continue;
    }
    auto overall = overall_image(kg, entity.id, provider);
    // label -> sorted distinct image ids under that first-level aspect
    std::map<std::string, std::set<std::string>> by_label;
    for (const auto& link : kg.links)
      if (link.entity_id == entity.id)
        by_label[link.aspect_path.front()].insert(link.image_id);
    for (const auto& [label, image_ids] : by_label) {
      std::vector<std::pair<std::string, Vector>> candidates;
      for (const auto& id : image_ids)
        candidates.emplace_back(id, provider.encode_image(id));
      auto positives =
          embed::top_k_by_similarity(provider.encode_text(label), candidates, 3);
      for (const auto& p : positives)
        result.triples.push_back({entity.id, *overall, label, p.id});
    }
  }
  return result;
}

std::pair<std::size_t, std::size_t> split_sizes(std::size_t n) {
  // Reference split ratio 37453 : 4663 : 4663; val and test each get
  // round(n * 4663 / 46779), train takes the remainder.
  auto held = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * 4663.0 / 46779.0));
  return {held, held};
}

DatasetSplit split_triples(const std::vector<AirTriple>& triples,
                           std::uint64_t seed) {
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  auto [n_val, n_test] = split_sizes(triples.size());
  std::size_t n_train = triples.size() - n_val - n_test;
  DatasetSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& t = triples[order[i]];
    if (i < n_train) split.train.push_back(t);
    else if (i < n_train + n_val) split.validation.push_back(t);
    else split.test.push_back(t);
  }
  return split;
}

Vector forward(const ProjectionModel& model, const Vector& overall,
               const Vector& aspect) {
  if (overall.size() != model.image_dim() || aspect.size() != model.text_dim())
    throw UsageError("forward: input dims do not match model shape");
  Vector x(overall.size() + aspect.size());
  x << overall, aspect;
  return model.W * x;
}

double info_nce_from_sims(const Eigen::MatrixXd& sims, double tau) {
  if (tau <= 0.0) throw UsageError("tau must be positive");
  const auto n = sims.rows();
  if (n < 2 || sims.cols() != n)
    throw UsageError("info_nce: similarity matrix must be NxN with N >= 2");
  if (!sims.allFinite()) throw NumericError("info_nce: non-finite similarity");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_max = sims.row(i).maxCoeff() / tau;
    double denom = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      denom += std::exp(sims(i, j) / tau - row_max);
    total += -(sims(i, i) / tau - row_max - std::log(denom));
  }
  return total / static_cast<double>(n);
}

namespace {

Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& projected,
                                  const Eigen::MatrixXd& positives) {
  const auto n = projected.cols();
  Eigen::MatrixXd sims(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      sims(i, j) = embed::cosine(projected.col(i), positives.col(j));
  return sims;
}

}  // namespace

double info_nce_loss(const std::vector<Vector>& projected,
                     const std::vector<Vector>& positives, double tau) {
  if (projected.size() != positives.size() || projected.size() < 2)
    throw UsageError("info_nce: need N >= 2 matched vectors");
  const auto n = static_cast<Eigen::Index>(projected.size());
  Eigen::MatrixXd h(projected.front().size(), n);
  Eigen::MatrixXd p(positives.front().size(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h.col(i) = projected[static_cast<std::size_t>(i)];
    p.col(i) = positives[static_cast<std::size_t>(i)];
  }
  return info_nce_from_sims(similarity_matrix(h, p), tau);
}

double batch_loss(const ProjectionModel& model, const Batch& batch) {
  Eigen::MatrixXd h = model.W * batch.inputs;
  return info_nce_from_sims(similarity_matrix(h, batch.positives), model.tau);
}

Eigen::MatrixXd batch_gradient(const ProjectionModel& model, const Batch& batch) {
  const auto n = batch.inputs.cols();
  if (n < 2) throw UsageError("batch_gradient: need N >= 2");
  Eigen::MatrixXd h = model.W * batch.inputs;
  Eigen::MatrixXd sims = similarity_matrix(h, batch.positives);
  if (!sims.allFinite()) throw NumericError("batch_gradient: non-finite sims");

  const double tau = model.tau;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(h.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_max = sims.row(i).maxCoeff() / tau;
    Eigen::VectorXd expv(n);
    for (Eigen::Index j = 0; j < n; ++j)
      expv[j] = std::exp(sims(i, j) / tau - row_max);
    Eigen::VectorXd softmax = expv / expv.sum();
    double hn = h.col(i).norm();
    if (hn == 0.0) continue;  // cosine is the constant 0 there
    for (Eigen::Index j = 0; j < n; ++j) {
      double coeff = (softmax[j] - (i == j ? 1.0 : 0.0)) /
                     (static_cast<double>(n) * tau);
      double pn = batch.positives.col(j).norm();
      if (pn == 0.0) continue;
      g.col(i) += coeff * (batch.positives.col(j) / (hn * pn) -
                           sims(i, j) * h.col(i) / (hn * hn));
    }
  }
  return g * batch.inputs.transpose();
}

TrainCurve train(ProjectionModel& model, const std::vector<AirTriple>& triples,
                 const embed::EncoderProvider& provider,
                 const AirTrainConfig& config) {
  if (config.batch_size < 2) throw UsageError("batch_size must be >= 2");
  if (config.learning_rate < 0.0)
    throw UsageError("learning_rate must be >= 0");
  if (triples.size() < 2) throw UsageError("need at least 2 training triples");
  model.tau = config.tau;

  // Embeddings are frozen; resolve them once.
  std::map<std::string, Vector> text_cache, image_cache;
  auto text_vec = [&](const std::string& s) -> const Vector& {
    auto it = text_cache.find(s);
    if (it == text_cache.end())
      it = text_cache.emplace(s, provider.encode_text(s)).first;
    return it->second;
  };
  auto image_vec = [&](const std::string& s) -> const Vector& {
    auto it = image_cache.find(s);
    if (it == image_cache.end())
      it = image_cache.emplace(s, provider.encode_image(s)).first;
    return it->second;
  };

  const int d_in = model.image_dim() + model.text_dim();
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed);

  TrainCurve curve;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end = std::min(
          start + static_cast<std::size_t>(config.batch_size), order.size());
      std::size_t n = end - start;
      if (n < 2) continue;  // a singleton has no in-batch negatives
      Batch batch;
      batch.inputs = Eigen::MatrixXd(d_in, static_cast<Eigen::Index>(n));
      batch.positives =
          Eigen::MatrixXd(model.image_dim(), static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        const auto& t = triples[order[start + i]];
        const Vector& o = image_vec(t.overall_image_id);
        const Vector& a = text_vec(t.aspect_label);
        if (o.size() != model.image_dim() || a.size() != model.text_dim())
          throw UsageError("embedding dims do not match model shape");
        batch.inputs.col(static_cast<Eigen::Index>(i)) << o, a;
        batch.positives.col(static_cast<Eigen::Index>(i)) =
            image_vec(t.positive_image_id);
      }
      double loss = batch_loss(model, batch);
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch));
      Eigen::MatrixXd grad = batch_gradient(model, batch);
      model.W -= config.learning_rate * grad;
      if (!model.W.allFinite())
        throw NumericError("training diverged: non-finite weights at epoch " +
                           std::to_string(epoch));
      epoch_sum += loss;
      ++n_batches;
    }
    curve.epoch_loss.push_back(n_batches ? epoch_sum / static_cast<double>(n_batches)
                                         : 0.0);
  }
  return curve;
}

std::vector<embed::Scored> retrieve(const ProjectionModel& model,
                                    const embed::EncoderProvider& provider,
                                    const std::string& overall_image_id,
                                    const std::string& aspect_label,
                                    const std::vector<std::string>& candidates) {
  Vector query = forward(model, provider.encode_image(overall_image_id),
                         provider.encode_text(aspect_label));
  std::vector<std::pair<std::string, Vector>> cands;
  for (const auto& id : candidates)
    cands.emplace_back(id, provider.encode_image(id));
  return embed::top_k_by_similarity(query, cands, cands.size());
}

std::vector<embed::Scored> retrieve_clip_baseline(
    const embed::EncoderProvider& provider, const std::string& aspect_label,
    const std::vector<std::string>& candidates) {
  Vector query = provider.encode_text(aspect_label);
  std::vector<std::pair<std::string, Vector>> cands;
  for (const auto& id : candidates)
    cands.emplace_back(id, provider.encode_image(id));
  return embed::top_k_by_similarity(query, cands, cands.size());
}

CorrectionResult correct_kg(const kg::AspectKG& kg, const ProjectionModel& model,
                            const embed::EncoderProvider& provider,
                            const CorrectionPolicy& policy) {
  CorrectionResult result;
  result.kg = kg;
  result.kg.links.clear();

  std::map<std::string, std::string> overall_cache;
  auto overall_for = [&](const std::string& entity_id) -> const std::string& {
    auto it = overall_cache.find(entity_id);
    if (it == overall_cache.end()) {
      auto img = overall_image(kg, entity_id, provider);
      it = overall_cache.emplace(entity_id, img.value_or("")).first;
    }
    return it->second;
  };

  // group links by (entity, aspect path)
  std::map<std::pair<std::string, kg::AspectPath>,
           std::vector<const kg::AspectImageLink*>>
      groups;
  for (const auto& link : kg.links)
    groups[{link.entity_id, link.aspect_path}].push_back(&link);

  for (const auto& [key, links] : groups) {
    const auto& [entity_id, path] = key;
    std::vector<std::string> ids;
    for (const auto* l : links) ids.push_back(l->image_id);
    auto scored = retrieve(model, provider, overall_for(entity_id), path.front(),
                           ids);
    std::map<std::string, double> score_by_id;
    std::set<std::string> kept;
    for (std::size_t rank = 0; rank < scored.size(); ++rank) {
      score_by_id[scored[rank].id] = scored[rank].score;
      bool keep = true;
      if (policy.threshold && scored[rank].score < *policy.threshold)
        keep = false;
      if (policy.keep_top_m && rank >= *policy.keep_top_m) keep = false;
      if (keep) kept.insert(scored[rank].id);
    }
    for (const auto* l : links) {
      if (kept.count(l->image_id))
        result.kg.links.push_back(*l);
      else
        result.removed.push_back({*l, score_by_id.at(l->image_id)});
    }
  }
  kg::sort_kg(result.kg);
  return result;
}

AspectAssignment expand_assign(const std::string& image_id,
                               const std::string& entity_id,
                               const kg::AspectKG& kg,
                               const ProjectionModel& model,
                               const embed::EncoderProvider& provider) {
  std::set<std::string> labels;
  for (const auto& a : kg.aspects)
    if (a.entity_id == entity_id) labels.insert(a.path.front());
  if (labels.empty())
    throw DataError("entity " + entity_id + " has no aspects");
  auto overall = overall_image(kg, entity_id, provider);
  if (!overall)
    throw DataError("entity " + entity_id + " has no linked images");
  Vector img_vec = provider.encode_image(image_id);
  Vector overall_vec = provider.encode_image(*overall);
  AspectAssignment best{"", -2.0};
  for (const auto& label : labels) {  // ascending, so ties keep the first
    Vector query = forward(model, overall_vec, provider.encode_text(label));
    double score = embed::cosine(query, img_vec);
    if (score > best.score) best = {label, score};
  }
  return best;
}

double eal_image_feature_air(const features::ContextSentence& ctx,
                             const kg::AspectNode& aspect, const kg::AspectKG& kg,
                             const ProjectionModel& model,
                             const embed::EncoderProvider& provider) {
  std::vector<std::string> candidates;
  for (const auto& link : kg.links)
    if (link.entity_id == aspect.entity_id && link.aspect_path == aspect.path)
      candidates.push_back(link.image_id);
  if (candidates.empty()) return 0.0;
  auto overall = overall_image(kg, aspect.entity_id, provider);
  auto scored =
      retrieve(model, provider, *overall, aspect.path.front(), candidates);
  if (scored.size() > 5) scored.resize(5);
  Vector ctx_vec = provider.encode_text(ctx.raw);
  double sum = 0.0;
  for (const auto& s : scored)
    sum += embed::cosine(ctx_vec, provider.encode_image(s.id));
  return sum / static_cast<double>(scored.size());
}

void save_air_model(const ProjectionModel& model, const std::string& config_digest,
                    const std::filesystem::path& file) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(model.W.size()));
  for (Eigen::Index r = 0; r < model.W.rows(); ++r)
    for (Eigen::Index c = 0; c < model.W.cols(); ++c) w.push_back(model.W(r, c));
  json j{{"W", w},
         {"image_dim", model.image_dim()},
         {"text_dim", model.text_dim()},
         {"tau", model.tau},
         {"config_digest", config_digest}};
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + file.string());
  out << j.dump() << '\n';
}

ProjectionModel load_air_model(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read model file " + file.string());
  try {
    json j;
    in >> j;
    int image_dim = j.at("image_dim").get<int>();
    int text_dim = j.at("text_dim").get<int>();
    auto w = j.at("W").get<std::vector<double>>();
    ProjectionModel model;
    model.tau = j.at("tau").get<double>();
    model.W = Eigen::MatrixXd(image_dim, image_dim + text_dim);
    if (w.size() != static_cast<std::size_t>(model.W.size()))
      throw DataError("weight count does not match dims");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < model.W.rows(); ++r)
      for (Eigen::Index c = 0; c < model.W.cols(); ++c) model.W(r, c) = w[k++];
    return model;
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError("malformed model file " + file.string() + ": " + e.what());
  }
}

void save_triples(const std::vector<AirTriple>& triples,
                  const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write triples file " + file.string());
  for (const auto& t : triples)
    out << json{{"entity_id", t.entity_id},
                {"overall_image_id", t.overall_image_id},
                {"aspect_label", t.aspect_label},
                {"positive_image_id", t.positive_image_id}}
               .dump()
        << '\n';
}

std::vector<AirTriple> load_triples(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read triples file " + file.string());
  std::vector<AirTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      out.push_back({j.at("entity_id").get<std::string>(),
                     j.at("overall_image_id").get<std::string>(),
                     j.at("aspect_label").get<std::string>(),
                     j.at("positive_image_id").get<std::string>()});
    } catch (const std::exception& e) {
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": malformed triple: " + e.what());
    }
  }
  return out;
}

}  // namespace aspectkg::air
