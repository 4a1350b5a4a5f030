#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "aspectkg/kg.hpp"
#include "aspectkg/page.hpp"

namespace aspectkg::ingest {

struct QuerySentence {
  std::string entity_id;
  kg::AspectPath aspect_path;
  std::string text;

  bool operator==(const QuerySentence&) const = default;
};

class SearchClient {
 public:
  virtual ~SearchClient() = default;
  /// Returns at most k results with search_rank populated 1..k.
  virtual std::vector<kg::ImageRef> search(const std::string& query, int k) = 0;
};

/// Offline client backed by a directory with index.json mapping normalized
/// queries (lowercased, whitespace-collapsed) to ordered image-id lists.
class FixtureSearchClient : public SearchClient {
 public:
  explicit FixtureSearchClient(const std::filesystem::path& dir);
  std::vector<kg::ImageRef> search(const std::string& query, int k) override;

  static std::string normalize_query(const std::string& query);

 private:
  std::map<std::string, std::vector<std::string>> index_;
};

/// Decorator enforcing a minimum interval between calls to the inner client.
class RateLimitedSearchClient : public SearchClient {
 public:
  RateLimitedSearchClient(std::shared_ptr<SearchClient> inner,
                          double max_calls_per_second);
  std::vector<kg::ImageRef> search(const std::string& query, int k) override;

 private:
  std::shared_ptr<SearchClient> inner_;
  std::chrono::steady_clock::duration min_interval_;
  std::chrono::steady_clock::time_point next_allowed_;
  std::mutex mutex_;
};

struct SkippedQuery {
  std::string query;
  std::string reason;
};

struct RunReport {
  std::size_t n_queries = 0;
  std::size_t n_links = 0;
  std::vector<SkippedQuery> skipped;
};

std::set<std::string> default_blacklist();

std::vector<kg::AspectNode> extract_aspects(
    const PageDoc& page, const std::set<std::string>& blacklist);

std::vector<QuerySentence> extract_query_sentences(
    const PageDoc& page, const kg::EntityRecord& entity);

std::vector<std::string> split_sentences(const std::string& paragraph);

std::vector<kg::AspectImageLink> harvest_wikipedia_images(const PageDoc& page);

/// Image records referenced by the page's sections, for KG registration.
std::vector<kg::ImageRef> collect_page_images(const PageDoc& page);

struct SearchHarvest {
  std::vector<kg::AspectImageLink> links;
  std::vector<kg::ImageRef> images;
  RunReport report;
};

SearchHarvest harvest_search_images(const std::vector<QuerySentence>& queries,
                                    SearchClient& client, int k = 5);

std::vector<kg::EntityRecord> select_top_entities(
    const std::vector<kg::EntityRecord>& candidates, std::size_t n_per_type = 200);

}  // namespace aspectkg::ingest
