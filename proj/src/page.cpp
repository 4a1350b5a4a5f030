#include "aspectkg/page.hpp"

#include <cctype>
#include <fstream>

#include "aspectkg/errors.hpp"

namespace aspectkg::ingest {

using nlohmann::json;

namespace {

json section_to_json(const Section& s) {
  json images = json::array();
  for (const auto& img : s.images)
    images.push_back(json{{"image_id", img.image_id}, {"locator", img.locator}});
  json children = json::array();
  for (const auto& c : s.children) children.push_back(section_to_json(c));
  return json{{"heading", s.heading},
              {"level", s.level},
              {"paragraphs", s.paragraphs},
              {"images", images},
              {"children", children}};
}

Section section_from_json(const json& j) {
  Section s;
  s.heading = j.at("heading").get<std::string>();
  s.level = j.at("level").get<int>();
  s.paragraphs = j.at("paragraphs").get<std::vector<std::string>>();
  for (const auto& ji : j.at("images")) {
    kg::ImageRef img;
    img.image_id = ji.at("image_id").get<std::string>();
    img.locator = ji.at("locator").get<std::string>();
    img.source = kg::ImageSource::kWikipedia;
    s.images.push_back(std::move(img));
  }
  for (const auto& jc : j.at("children"))
    s.children.push_back(section_from_json(jc));
  return s;
}

}  // namespace

json page_to_json(const PageDoc& page) {
  json sections = json::array();
  for (const auto& s : page.sections) sections.push_back(section_to_json(s));
  return json{{"entity_id", page.entity_id},
              {"title", page.title},
              {"sections", sections}};
}

PageDoc page_from_json(const json& j) {
  PageDoc p;
  p.entity_id = j.at("entity_id").get<std::string>();
  p.title = j.at("title").get<std::string>();
  for (const auto& js : j.at("sections"))
    p.sections.push_back(section_from_json(js));
  return p;
}

PageDoc load_page(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot read page file " + file.string());
  json j;
  try {
    in >> j;
    return page_from_json(j);
  } catch (const std::exception& e) {
    throw DataError("malformed page file " + file.string() + ": " + e.what());
  }
}

void save_page(const PageDoc& page, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write page file " + file.string());
  out << page_to_json(page).dump(2) << '\n';
}

namespace {

std::string decode_entities(const std::string& in) {
  std::string out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    if (in[i] != '&') {
      out += in[i++];
      continue;
    }
    auto semi = in.find(';', i);
    if (semi == std::string::npos || semi - i > 8) {
      out += in[i++];
      continue;
    }
    std::string ent = in.substr(i + 1, semi - i - 1);
    if (ent == "amp") out += '&';
    else if (ent == "lt") out += '<';
    else if (ent == "gt") out += '>';
    else if (ent == "quot") out += '"';
    else if (ent == "apos") out += '\'';
    else if (ent == "nbsp") out += ' ';
    else if (!ent.empty() && ent[0] == '#') {
      int code = 0;
      try {
        code = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X'))
                   ? std::stoi(ent.substr(2), nullptr, 16)
                   : std::stoi(ent.substr(1));
      } catch (...) { code = 0; }
      if (code > 0 && code < 128) out += static_cast<char>(code);
    } else {
      out += in.substr(i, semi - i + 1);
    }
    i = semi + 1;
  }
  return out;
}

std::string collapse_ws(const std::string& in) {
  std::string out;
  bool in_space = true;  // leading whitespace dropped
  for (unsigned char c : in) {
    if (std::isspace(c)) {
      if (!in_space) out += ' ';
      in_space = true;
    } else {
      out += static_cast<char>(c);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

std::string strip_tags(const std::string& in) {
  std::string out;
  bool in_tag = false;
  for (char c : in) {
    if (c == '<') in_tag = true;
    else if (c == '>') in_tag = false;
    else if (!in_tag) out += c;
  }
  return out;
}

std::string clean_text(const std::string& raw) {
  return collapse_ws(decode_entities(strip_tags(raw)));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string image_id_from_src(const std::string& src) {
  std::string s = src;
  if (auto q = s.find('?'); q != std::string::npos) s = s.substr(0, q);
  if (auto slash = s.find_last_of('/'); slash != std::string::npos)
    s = s.substr(slash + 1);
  return s.empty() ? src : s;
}

std::optional<std::string> attr_value(const std::string& tag,
                                      const std::string& name) {
  std::string l = lower(tag);
  std::size_t pos = 0;
  while ((pos = l.find(name, pos)) != std::string::npos) {
    std::size_t p = pos + name.size();
    while (p < l.size() && std::isspace(static_cast<unsigned char>(l[p]))) ++p;
    if (p >= l.size() || l[p] != '=') { pos = p; continue; }
    ++p;
    while (p < l.size() && std::isspace(static_cast<unsigned char>(l[p]))) ++p;
    if (p >= l.size()) return std::nullopt;
    char quote = tag[p];
    if (quote == '"' || quote == '\'') {
      auto end = tag.find(quote, p + 1);
      if (end == std::string::npos) return std::nullopt;
      return tag.substr(p + 1, end - p - 1);
    }
    auto end = p;
    while (end < tag.size() &&
           !std::isspace(static_cast<unsigned char>(tag[end])) &&
           tag[end] != '>')
      ++end;
    return tag.substr(p, end - p);
  }
  return std::nullopt;
}

}  // namespace

ParsedPage parse_page_html(const std::string& html,
                           const std::string& entity_id) {
  ParsedPage result;
  PageDoc& page = result.page;
  page.entity_id = entity_id;

  // Stack of open sections, outermost first. Pre-heading content is held in
  // `lead` and only kept when the page has no headings at all.
  std::vector<Section*> stack;
  Section lead;
  bool saw_heading = false;

  auto current = [&]() -> Section& {
    return stack.empty() ? lead : *stack.back();
  };

  std::string para;
  bool in_p = false;
  auto flush_para = [&]() {
    std::string text = collapse_ws(decode_entities(para));
    if (!text.empty()) current().paragraphs.push_back(text);
    para.clear();
    in_p = false;
  };

  std::size_t pos = 0;
  const std::size_t n = html.size();
  while (pos < n) {
    auto lt = html.find('<', pos);
    if (lt == std::string::npos) {
      if (in_p) para += html.substr(pos);
      break;
    }
    if (in_p && lt > pos) para += html.substr(pos, lt - pos);
    auto gt = html.find('>', lt);
    if (gt == std::string::npos) {
      result.warnings.push_back("unterminated tag at offset " +
                                std::to_string(lt));
      break;
    }
    std::string tag = html.substr(lt, gt - lt + 1);
    std::string tl = lower(tag);
    pos = gt + 1;

    auto tag_is = [&](const char* name) {
      std::string t = std::string("<") + name;
      return tl.compare(0, t.size(), t) == 0 &&
             (tl.size() == t.size() + 1 || !std::isalnum(static_cast<unsigned char>(tl[t.size()])));
    };

    if (tag_is("title")) {
      auto close = lower(html).find("</title>", pos);
      if (close != std::string::npos) {
        page.title = clean_text(html.substr(pos, close - pos));
        pos = close + 8;
      }
    } else if (tag_is("h2") || tag_is("h3") || tag_is("h4")) {
      if (in_p) flush_para();
      int level = tl[2] - '0';
      std::string closing = "</h" + std::string(1, tl[2]) + ">";
      auto close = lower(html).find(closing, pos);
      std::string heading;
      if (close == std::string::npos) {
        result.warnings.push_back("unclosed heading at offset " +
                                  std::to_string(lt));
        heading = clean_text(html.substr(pos));
        pos = n;
      } else {
        heading = clean_text(html.substr(pos, close - pos));
        pos = close + closing.size();
      }
      if (heading.empty()) continue;
      while (!stack.empty() && stack.back()->level >= level) stack.pop_back();
      int parent_level = stack.empty() ? 1 : stack.back()->level;
      if (level > parent_level + 1) {
        result.warnings.push_back("heading level jump at '" + heading +
                                  "', clamping to " +
                                  std::to_string(parent_level + 1));
        level = parent_level + 1;
      }
      Section s;
      s.heading = heading;
      s.level = level;
      auto& siblings = stack.empty() ? page.sections : stack.back()->children;
      siblings.push_back(std::move(s));
      stack.push_back(&siblings.back());
      saw_heading = true;
    } else if (tag_is("p")) {
      if (in_p) flush_para();
      in_p = true;
    } else if (tl.rfind("</p", 0) == 0) {
      flush_para();
    } else if (tag_is("img")) {
      if (auto src = attr_value(tag, "src")) {
        kg::ImageRef img;
        img.image_id = image_id_from_src(*src);
        img.locator = *src;
        img.source = kg::ImageSource::kWikipedia;
        current().images.push_back(std::move(img));
      }
    }
    // All other tags are stripped; their inner text flows through.
  }
  if (in_p) flush_para();

  if (!saw_heading &&
      (!lead.paragraphs.empty() || !lead.images.empty())) {
    lead.heading = page.title.empty() ? "Overview" : page.title;
    lead.level = 2;
    page.sections.push_back(std::move(lead));
  }
  return result;
}

}  // namespace aspectkg::ingest
