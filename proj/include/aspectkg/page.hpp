#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aspectkg/kg.hpp"

namespace aspectkg::ingest {

/// One heading-delimited unit of a page. Levels run 2..4 and children are
/// exactly one level deeper than their parent.
struct Section {
  std::string heading;
  int level = 2;
  std::vector<std::string> paragraphs;
  std::vector<kg::ImageRef> images;
  std::vector<Section> children;

  bool operator==(const Section&) const = default;
};

struct PageDoc {
  std::string entity_id;
  std::string title;
  std::vector<Section> sections;

  bool operator==(const PageDoc&) const = default;
};

nlohmann::json page_to_json(const PageDoc& page);
PageDoc page_from_json(const nlohmann::json& j);

PageDoc load_page(const std::filesystem::path& file);
void save_page(const PageDoc& page, const std::filesystem::path& file);

struct ParsedPage {
  PageDoc page;
  std::vector<std::string> warnings;
};

/// Best-effort parser for MediaWiki-like rendered pages: h2/h3/h4 headings
/// form the section tree, p tags become paragraphs, img tags attach to the
/// nearest enclosing section. A non-empty body without headings yields a
/// single implicit root section named after the title.
ParsedPage parse_page_html(const std::string& html,
                           const std::string& entity_id);

}  // namespace aspectkg::ingest
