#include "aspectkg/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "aspectkg/errors.hpp"

namespace aspectkg::ingest {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  for (auto& c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool contains_ci(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  std::string h = lower(haystack), n = lower(needle);
  return h.find(n) != std::string::npos;
}

}  // namespace

std::set<std::string> default_blacklist() {
  return {"notes", "external links", "references", "see also"};
}

namespace {

void collect_aspects(const Section& section, const std::set<std::string>& blacklist,
                     const std::string& entity_id, kg::AspectPath& path,
                     std::vector<kg::AspectNode>& out) {
  if (blacklist.count(lower(section.heading))) return;  // drops the subtree
  path.push_back(section.heading);
  out.push_back({entity_id, path});
  for (const auto& child : section.children)
    collect_aspects(child, blacklist, entity_id, path, out);
  path.pop_back();
}

}  // namespace

std::vector<kg::AspectNode> extract_aspects(
    const PageDoc& page, const std::set<std::string>& blacklist) {
  std::set<std::string> lowered;
  for (const auto& label : blacklist) lowered.insert(lower(label));
  std::vector<kg::AspectNode> out;
  kg::AspectPath path;
  for (const auto& section : page.sections)
    collect_aspects(section, lowered, page.entity_id, path, out);
  return out;
}

std::vector<std::string> split_sentences(const std::string& paragraph) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < paragraph.size(); ++i) {
    char c = paragraph[i];
    current += c;
    if (c == '.' || c == '!' || c == '?') {
      bool at_end = i + 1 == paragraph.size();
      bool before_space =
          !at_end && std::isspace(static_cast<unsigned char>(paragraph[i + 1]));
      if (at_end || before_space) {
        while (!current.empty() && current.front() == ' ')
          current.erase(current.begin());
        if (!current.empty()) out.push_back(current);
        current.clear();
      }
    }
  }
  while (!current.empty() && current.front() == ' ')
    current.erase(current.begin());
  if (!current.empty()) out.push_back(current);
  return out;
}

namespace {

bool mentions_entity(const std::string& sentence, const kg::EntityRecord& e) {
  if (contains_ci(sentence, e.name)) return true;
  return std::any_of(e.aliases.begin(), e.aliases.end(), [&](const auto& a) {
    return contains_ci(sentence, a);
  });
}

void collect_queries(const Section& section, const kg::EntityRecord& entity,
                     kg::AspectPath& path, std::vector<QuerySentence>& out) {
  path.push_back(section.heading);
  for (const auto& para : section.paragraphs)
    for (const auto& sentence : split_sentences(para))
      if (mentions_entity(sentence, entity))
        out.push_back({entity.id, path, sentence});
  for (const auto& child : section.children)
    collect_queries(child, entity, path, out);
  path.pop_back();
}

void collect_links(const Section& section, const std::string& entity_id,
                   kg::AspectPath& path, std::vector<kg::AspectImageLink>& out) {
  path.push_back(section.heading);
  for (const auto& img : section.images)
    out.push_back({entity_id, path, img.image_id, std::nullopt});
  for (const auto& child : section.children)
    collect_links(child, entity_id, path, out);
  path.pop_back();
}

void collect_images(const Section& section, std::vector<kg::ImageRef>& out) {
  out.insert(out.end(), section.images.begin(), section.images.end());
  for (const auto& child : section.children) collect_images(child, out);
}

}  // namespace

std::vector<QuerySentence> extract_query_sentences(
    const PageDoc& page, const kg::EntityRecord& entity) {
  std::vector<QuerySentence> out;
  kg::AspectPath path;
  for (const auto& section : page.sections)
    collect_queries(section, entity, path, out);
  return out;
}

std::vector<kg::AspectImageLink> harvest_wikipedia_images(const PageDoc& page) {
  std::vector<kg::AspectImageLink> out;
  kg::AspectPath path;
  for (const auto& section : page.sections)
    collect_links(section, page.entity_id, path, out);
  return out;
}

std::vector<kg::ImageRef> collect_page_images(const PageDoc& page) {
  std::vector<kg::ImageRef> out;
  for (const auto& section : page.sections) collect_images(section, out);
  return out;
}

FixtureSearchClient::FixtureSearchClient(const std::filesystem::path& dir) {
  auto index_file = dir / "index.json";
  std::ifstream in(index_file);
  if (!in) throw DataError("cannot read search fixture " + index_file.string());
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("malformed search fixture " + index_file.string() + ": " +
                    e.what());
  }
  for (auto it = j.begin(); it != j.end(); ++it)
    index_[it.key()] = it.value().get<std::vector<std::string>>();
}

std::string FixtureSearchClient::normalize_query(const std::string& query) {
  std::string out;
  bool in_space = true;
  for (unsigned char c : query) {
    if (std::isspace(c)) {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += static_cast<char>(std::tolower(c));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::vector<kg::ImageRef> FixtureSearchClient::search(const std::string& query,
                                                      int k) {
  auto it = index_.find(normalize_query(query));
  std::vector<kg::ImageRef> out;
  if (it == index_.end()) return out;
  for (int rank = 1; rank <= k && rank <= static_cast<int>(it->second.size());
       ++rank) {
    const auto& id = it->second[rank - 1];
    kg::ImageRef img;
    img.image_id = id;
    img.locator = "fixture://" + id;
    img.source = kg::ImageSource::kSearchEngine;
    img.origin_query = query;
    img.search_rank = rank;
    out.push_back(std::move(img));
  }
  return out;
}

RateLimitedSearchClient::RateLimitedSearchClient(
    std::shared_ptr<SearchClient> inner, double max_calls_per_second)
    : inner_(std::move(inner)),
      min_interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / max_calls_per_second))),
      next_allowed_(std::chrono::steady_clock::now()) {
  if (max_calls_per_second <= 0)
    throw UsageError("rate limit must be positive");
}

std::vector<kg::ImageRef> RateLimitedSearchClient::search(
    const std::string& query, int k) {
  std::chrono::steady_clock::time_point wait_until;
  {
    std::lock_guard lock(mutex_);
    auto now = std::chrono::steady_clock::now();
    wait_until = std::max(next_allowed_, now);
    next_allowed_ = wait_until + min_interval_;
  }
  std::this_thread::sleep_until(wait_until);
  return inner_->search(query, k);
}

SearchHarvest harvest_search_images(const std::vector<QuerySentence>& queries,
                                    SearchClient& client, int k) {
  SearchHarvest result;
  result.report.n_queries = queries.size();
  // key -> (rank, image)
  std::map<std::tuple<std::string, kg::AspectPath, std::string>,
           std::pair<int, kg::ImageRef>>
      best;
  for (const auto& q : queries) {
    std::vector<kg::ImageRef> hits;
    try {
      hits = client.search(q.text, k);
    } catch (const std::exception& e) {
      result.report.skipped.push_back({q.text, e.what()});
      continue;
    }
    for (const auto& img : hits) {
      auto key = std::make_tuple(q.entity_id, q.aspect_path, img.image_id);
      int rank = img.search_rank.value_or(k);
      auto it = best.find(key);
      if (it == best.end() || rank < it->second.first)
        best.insert_or_assign(key, std::make_pair(rank, img));
    }
  }
  std::map<std::string, kg::ImageRef> images;
  for (const auto& [key, ranked] : best) {
    const auto& [entity_id, path, image_id] = key;
    kg::ImageRef img = ranked.second;
    img.search_rank = ranked.first;
    result.links.push_back({entity_id, path, image_id, std::nullopt});
    auto it = images.find(image_id);
    if (it == images.end() || ranked.first < it->second.search_rank.value_or(k))
      images.insert_or_assign(image_id, img);
  }
  for (const auto& [id, img] : images) result.images.push_back(img);
  result.report.n_links = result.links.size();
  return result;
}

std::vector<kg::EntityRecord> select_top_entities(
    const std::vector<kg::EntityRecord>& candidates, std::size_t n_per_type) {
  std::map<std::string, std::vector<kg::EntityRecord>> by_type;
  for (const auto& e : candidates) by_type[e.entity_type].push_back(e);
  std::vector<kg::EntityRecord> out;
  for (auto& [type, group] : by_type) {
    std::sort(group.begin(), group.end(), [](const auto& a, const auto& b) {
      if (a.pageviews != b.pageviews) return a.pageviews > b.pageviews;
      return a.id < b.id;
    });
    if (group.size() > n_per_type) group.resize(n_per_type);
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

}  // namespace aspectkg::ingest
