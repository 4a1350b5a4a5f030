#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace aspectkg::kg {

using AspectPath = std::vector<std::string>;

struct EntityRecord {
  std::string id;
  std::string name;
  std::string entity_type;
  std::vector<std::string> aliases;
  std::uint64_t pageviews = 0;

  bool operator==(const EntityRecord&) const = default;
};

struct AspectNode {
  std::string entity_id;
  AspectPath path;  // path.front() is the first-level aspect label

  bool operator==(const AspectNode&) const = default;
};

enum class ImageSource { kWikipedia, kSearchEngine };

std::string to_string(ImageSource src);
ImageSource image_source_from_string(const std::string& s);

struct ImageRef {
  std::string image_id;
  std::string locator;
  ImageSource source = ImageSource::kWikipedia;
  std::optional<std::string> origin_query;
  std::optional<int> search_rank;  // present iff source == kSearchEngine

  bool operator==(const ImageRef&) const = default;
};

struct AspectImageLink {
  std::string entity_id;
  AspectPath aspect_path;
  std::string image_id;
  std::optional<double> relevance;  // in [-1, 1] when present

  bool operator==(const AspectImageLink&) const = default;
};

struct AspectKG {
  std::vector<EntityRecord> entities;
  std::vector<AspectNode> aspects;
  std::vector<ImageRef> images;
  std::vector<AspectImageLink> links;

  bool operator==(const AspectKG&) const = default;
};

struct KgStats {
  std::size_t n_entities = 0;
  std::size_t n_aspects = 0;
  std::size_t n_aspect_labels = 0;  // label-deduplicated across entities
  std::size_t n_images = 0;
  std::size_t n_links = 0;
  double images_per_entity = 0.0;
  double aspects_per_entity = 0.0;
};

std::string join_path(const AspectPath& path);

/// Sorts all four collections by primary key in place.
void sort_kg(AspectKG& kg);

/// Checks uniqueness and referential integrity; throws DataError on the
/// first offending record.
void validate_kg(const AspectKG& kg);

void save_kg(const AspectKG& kg, const std::filesystem::path& dir);
AspectKG load_kg(const std::filesystem::path& dir);

/// Truncates every link and aspect to its first-level label. Duplicate
/// (entity, aspect, image) links are merged keeping max relevance.
AspectKG flatten_to_first_level(const AspectKG& kg);

KgStats compute_stats(const AspectKG& kg);

}  // namespace aspectkg::kg
