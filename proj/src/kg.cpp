#include "aspectkg/kg.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "aspectkg/errors.hpp"

namespace aspectkg::kg {

using nlohmann::json;

std::string to_string(ImageSource src) {
  return src == ImageSource::kWikipedia ? "wikipedia" : "search-engine";
}

ImageSource image_source_from_string(const std::string& s) {
  if (s == "wikipedia") return ImageSource::kWikipedia;
  if (s == "search-engine") return ImageSource::kSearchEngine;
  throw DataError("unknown image source: " + s);
}

std::string join_path(const AspectPath& path) {
  std::string out;
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i) out += '/';
    out += path[i];
  }
  return out;
}

namespace {

auto entity_key(const EntityRecord& e) { return std::tie(e.id); }
auto aspect_key(const AspectNode& a) { return std::tie(a.entity_id, a.path); }
auto image_key(const ImageRef& i) { return std::tie(i.image_id); }
auto link_key(const AspectImageLink& l) {
  return std::tie(l.entity_id, l.aspect_path, l.image_id);
}

json entity_to_json(const EntityRecord& e) {
  return json{{"id", e.id},
              {"name", e.name},
              {"entity_type", e.entity_type},
              {"aliases", e.aliases},
              {"pageviews", e.pageviews}};
}

json aspect_to_json(const AspectNode& a) {
  return json{{"entity_id", a.entity_id}, {"path", a.path}};
}

json image_to_json(const ImageRef& i) {
  json j{{"image_id", i.image_id},
         {"locator", i.locator},
         {"source", to_string(i.source)}};
  if (i.origin_query) j["origin_query"] = *i.origin_query;
  if (i.search_rank) j["search_rank"] = *i.search_rank;
  return j;
}

json link_to_json(const AspectImageLink& l) {
  json j{{"entity_id", l.entity_id},
         {"aspect_path", l.aspect_path},
         {"image_id", l.image_id}};
  if (l.relevance) j["relevance"] = *l.relevance;
  return j;
}

EntityRecord entity_from_json(const json& j) {
  EntityRecord e;
  e.id = j.at("id").get<std::string>();
  e.name = j.at("name").get<std::string>();
  e.entity_type = j.at("entity_type").get<std::string>();
  e.aliases = j.at("aliases").get<std::vector<std::string>>();
  e.pageviews = j.at("pageviews").get<std::uint64_t>();
  return e;
}

AspectNode aspect_from_json(const json& j) {
  AspectNode a;
  a.entity_id = j.at("entity_id").get<std::string>();
  a.path = j.at("path").get<AspectPath>();
  return a;
}

ImageRef image_from_json(const json& j) {
  ImageRef i;
  i.image_id = j.at("image_id").get<std::string>();
  i.locator = j.at("locator").get<std::string>();
  i.source = image_source_from_string(j.at("source").get<std::string>());
  if (j.contains("origin_query"))
    i.origin_query = j.at("origin_query").get<std::string>();
  if (j.contains("search_rank")) i.search_rank = j.at("search_rank").get<int>();
  return i;
}

AspectImageLink link_from_json(const json& j) {
  AspectImageLink l;
  l.entity_id = j.at("entity_id").get<std::string>();
  l.aspect_path = j.at("aspect_path").get<AspectPath>();
  l.image_id = j.at("image_id").get<std::string>();
  if (j.contains("relevance")) l.relevance = j.at("relevance").get<double>();
  return l;
}

template <typename WriteFn>
void write_jsonl(const std::filesystem::path& file, std::size_t n,
                 WriteFn line) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  for (std::size_t i = 0; i < n; ++i) out << line(i) << '\n';
  out.flush();
  if (!out) throw DataError("I/O failure writing " + file.string());
}

template <typename ParseFn>
void read_jsonl(const std::filesystem::path& file, ParseFn parse) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot read " + file.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      parse(j);
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      throw DataError(file.filename().string() + ":" + std::to_string(lineno) +
                      ": malformed record: " + e.what());
    }
  }
}

}  // namespace

void sort_kg(AspectKG& kg) {
  std::sort(kg.entities.begin(), kg.entities.end(),
            [](const auto& a, const auto& b) { return entity_key(a) < entity_key(b); });
  std::sort(kg.aspects.begin(), kg.aspects.end(),
            [](const auto& a, const auto& b) { return aspect_key(a) < aspect_key(b); });
  std::sort(kg.images.begin(), kg.images.end(),
            [](const auto& a, const auto& b) { return image_key(a) < image_key(b); });
  std::sort(kg.links.begin(), kg.links.end(),
            [](const auto& a, const auto& b) { return link_key(a) < link_key(b); });
}

void validate_kg(const AspectKG& kg) {
  std::set<std::string> entity_ids;
  for (const auto& e : kg.entities) {
    if (e.name.empty()) throw DataError("entity " + e.id + ": empty name");
    if (!entity_ids.insert(e.id).second)
      throw DataError("duplicate entity id " + e.id);
  }
  std::set<std::pair<std::string, AspectPath>> aspect_keys;
  for (const auto& a : kg.aspects) {
    if (a.path.empty())
      throw DataError("aspect of " + a.entity_id + ": empty path");
    for (const auto& label : a.path)
      if (label.empty())
        throw DataError("aspect of " + a.entity_id + ": empty path label");
    if (!entity_ids.count(a.entity_id))
      throw DataError("aspect " + join_path(a.path) +
                      ": dangling entity reference " + a.entity_id);
    if (!aspect_keys.emplace(a.entity_id, a.path).second)
      throw DataError("duplicate aspect (" + a.entity_id + ", " +
                      join_path(a.path) + ")");
  }
  std::set<std::string> image_ids;
  for (const auto& i : kg.images) {
    const bool has_rank = i.search_rank.has_value();
    if (has_rank != (i.source == ImageSource::kSearchEngine))
      throw DataError("image " + i.image_id +
                      ": search_rank present iff source is search-engine");
    if (!image_ids.insert(i.image_id).second)
      throw DataError("duplicate image id " + i.image_id);
  }
  std::set<std::tuple<std::string, AspectPath, std::string>> link_keys;
  for (const auto& l : kg.links) {
    const std::string where =
        "link (" + l.entity_id + ", " + join_path(l.aspect_path) + ", " +
        l.image_id + ")";
    if (!entity_ids.count(l.entity_id))
      throw DataError(where + ": dangling entity reference");
    if (!aspect_keys.count({l.entity_id, l.aspect_path}))
      throw DataError(where + ": dangling aspect reference");
    if (!image_ids.count(l.image_id))
      throw DataError(where + ": dangling image reference");
    if (l.relevance && (*l.relevance < -1.0 || *l.relevance > 1.0))
      throw DataError(where + ": relevance out of [-1, 1]");
    if (!link_keys.emplace(l.entity_id, l.aspect_path, l.image_id).second)
      throw DataError("duplicate " + where);
  }
}

void save_kg(const AspectKG& kg, const std::filesystem::path& dir) {
  AspectKG sorted = kg;
  sort_kg(sorted);
  validate_kg(sorted);
  std::filesystem::create_directories(dir);
  write_jsonl(dir / "entities.jsonl", sorted.entities.size(),
              [&](std::size_t i) { return entity_to_json(sorted.entities[i]).dump(); });
  write_jsonl(dir / "aspects.jsonl", sorted.aspects.size(),
              [&](std::size_t i) { return aspect_to_json(sorted.aspects[i]).dump(); });
  write_jsonl(dir / "images.jsonl", sorted.images.size(),
              [&](std::size_t i) { return image_to_json(sorted.images[i]).dump(); });
  write_jsonl(dir / "links.jsonl", sorted.links.size(),
              [&](std::size_t i) { return link_to_json(sorted.links[i]).dump(); });
}

AspectKG load_kg(const std::filesystem::path& dir) {
  AspectKG kg;
  read_jsonl(dir / "entities.jsonl",
             [&](const json& j) { kg.entities.push_back(entity_from_json(j)); });
  read_jsonl(dir / "aspects.jsonl",
             [&](const json& j) { kg.aspects.push_back(aspect_from_json(j)); });
  read_jsonl(dir / "images.jsonl",
             [&](const json& j) { kg.images.push_back(image_from_json(j)); });
  read_jsonl(dir / "links.jsonl",
             [&](const json& j) { kg.links.push_back(link_from_json(j)); });
  sort_kg(kg);
  validate_kg(kg);
  return kg;
}

AspectKG flatten_to_first_level(const AspectKG& kg) {
  AspectKG out;
  out.entities = kg.entities;
  out.images = kg.images;

  std::set<std::pair<std::string, std::string>> first_level;
  for (const auto& a : kg.aspects)
    first_level.emplace(a.entity_id, a.path.front());
  for (const auto& [entity_id, label] : first_level)
    out.aspects.push_back({entity_id, {label}});

  // Merge duplicate links created by truncation, keeping max relevance.
  std::map<std::tuple<std::string, std::string, std::string>,
           std::optional<double>>
      merged;
  for (const auto& l : kg.links) {
    auto key = std::make_tuple(l.entity_id, l.aspect_path.front(), l.image_id);
    auto it = merged.find(key);
    if (it == merged.end()) {
      merged.emplace(key, l.relevance);
    } else if (l.relevance &&
               (!it->second || *l.relevance > *it->second)) {
      it->second = l.relevance;
    }
  }
  for (const auto& [key, rel] : merged) {
    const auto& [entity_id, label, image_id] = key;
    // Truncated links may name a first-level aspect absent from the
    // original aspect set; make sure it exists.
    if (!first_level.count({entity_id, label})) {
      first_level.emplace(entity_id, label);
      out.aspects.push_back({entity_id, {label}});
    }
    out.links.push_back({entity_id, {label}, image_id, rel});
  }
  sort_kg(out);
  return out;
}

KgStats compute_stats(const AspectKG& kg) {
  KgStats s;
  s.n_entities = kg.entities.size();
  s.n_aspects = kg.aspects.size();
  s.n_images = kg.images.size();
  s.n_links = kg.links.size();
  std::set<std::string> labels;
  for (const auto& a : kg.aspects) labels.insert(join_path(a.path));
  s.n_aspect_labels = labels.size();
  if (s.n_entities > 0) {
    s.images_per_entity =
        static_cast<double>(s.n_images) / static_cast<double>(s.n_entities);
    s.aspects_per_entity =
        static_cast<double>(s.n_aspects) / static_cast<double>(s.n_entities);
  }
  return s;
}

}  // namespace aspectkg::kg
