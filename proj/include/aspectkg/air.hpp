#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aspectkg/encoder.hpp"
#include "aspectkg/features.hpp"
#include "aspectkg/kg.hpp"

namespace aspectkg::air {

struct AirTriple {
  std::string entity_id;
  std::string overall_image_id;
  std::string aspect_label;  // first-level label
  std::string positive_image_id;

  bool operator==(const AirTriple&) const = default;
};

/// Linear projection of [overall image ; aspect text] into image space.
struct ProjectionModel {
  Eigen::MatrixXd W;  // image_dim x (image_dim + text_dim)
  double tau = 0.07;

  int image_dim() const { return static_cast<int>(W.rows()); }
  int text_dim() const { return static_cast<int>(W.cols() - W.rows()); }
};

ProjectionModel make_model(int image_dim, int text_dim, double tau,
                           std::uint64_t seed);

/// [identity | zero] block; forward() reduces to the overall image vector.
ProjectionModel identity_model(int image_dim, int text_dim, double tau);

struct AirTrainConfig {
  int batch_size = 64;
  double learning_rate = 0.1;
  int epochs = 10;
  std::uint64_t seed = 0;
  double tau = 0.07;
};

struct DatasetSplit {
  std::vector<AirTriple> train;
  std::vector<AirTriple> validation;
  std::vector<AirTriple> test;
};

struct BuildTriplesResult {
  std::vector<AirTriple> triples;
  std::vector<std::string> skipped_entities;  // entities with no images
};

BuildTriplesResult build_triples(const kg::AspectKG& kg,
                                 const embed::EncoderProvider& provider);

DatasetSplit split_triples(const std::vector<AirTriple>& triples,
                           std::uint64_t seed);

/// Validation/test sizes for a seeded 8:1:1 split of n triples.
std::pair<std::size_t, std::size_t> split_sizes(std::size_t n);

embed::Vector forward(const ProjectionModel& model, const embed::Vector& overall,
                      const embed::Vector& aspect);

/// Mean InfoNCE over the batch with in-batch negatives; sim is cosine.
double info_nce_loss(const std::vector<embed::Vector>& projected,
                     const std::vector<embed::Vector>& positives, double tau);

/// Softmax cross-entropy on a precomputed similarity matrix (row i's
/// positive is column i). Computed with max-subtraction.
double info_nce_from_sims(const Eigen::MatrixXd& sims, double tau);

struct Batch {
  Eigen::MatrixXd inputs;     // (image_dim + text_dim) x N, columns x_i
  Eigen::MatrixXd positives;  // image_dim x N
};

double batch_loss(const ProjectionModel& model, const Batch& batch);

/// Analytic gradient of batch_loss w.r.t. W.
Eigen::MatrixXd batch_gradient(const ProjectionModel& model, const Batch& batch);

struct TrainCurve {
  std::vector<double> epoch_loss;
};

TrainCurve train(ProjectionModel& model, const std::vector<AirTriple>& triples,
                 const embed::EncoderProvider& provider,
                 const AirTrainConfig& config);

/// Candidate scores under the trained projection, descending, ties by id.
std::vector<embed::Scored> retrieve(const ProjectionModel& model,
                                    const embed::EncoderProvider& provider,
                                    const std::string& overall_image_id,
                                    const std::string& aspect_label,
                                    const std::vector<std::string>& candidates);

/// Vanilla baseline: score = cosine(aspect text embedding, candidate image).
std::vector<embed::Scored> retrieve_clip_baseline(
    const embed::EncoderProvider& provider, const std::string& aspect_label,
    const std::vector<std::string>& candidates);

struct CorrectionPolicy {
  std::optional<double> threshold;  // drop links scoring below
  std::optional<std::size_t> keep_top_m;
};

struct RemovedLink {
  kg::AspectImageLink link;
  double score = 0.0;
};

struct CorrectionResult {
  kg::AspectKG kg;
  std::vector<RemovedLink> removed;
};

CorrectionResult correct_kg(const kg::AspectKG& kg, const ProjectionModel& model,
                            const embed::EncoderProvider& provider,
                            const CorrectionPolicy& policy);

struct AspectAssignment {
  std::string aspect_label;
  double score = 0.0;
};

AspectAssignment expand_assign(const std::string& image_id,
                               const std::string& entity_id,
                               const kg::AspectKG& kg,
                               const ProjectionModel& model,
                               const embed::EncoderProvider& provider);

/// Image feature for EAL with top-5 selection by the AIR retrieve score.
double eal_image_feature_air(const features::ContextSentence& ctx,
                             const kg::AspectNode& aspect, const kg::AspectKG& kg,
                             const ProjectionModel& model,
                             const embed::EncoderProvider& provider);

/// Overall image per the triple-building rule: argmax of
/// cosine(entity-name embedding, image), ties by lowest image id.
std::optional<std::string> overall_image(const kg::AspectKG& kg,
                                         const std::string& entity_id,
                                         const embed::EncoderProvider& provider);

void save_air_model(const ProjectionModel& model, const std::string& config_digest,
                    const std::filesystem::path& file);
ProjectionModel load_air_model(const std::filesystem::path& file);

void save_triples(const std::vector<AirTriple>& triples,
                  const std::filesystem::path& file);
std::vector<AirTriple> load_triples(const std::filesystem::path& file);

}  // namespace aspectkg::air
