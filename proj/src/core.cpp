#include "gridrag/core.hpp"

#include <fstream>
#include <iterator>

#include "gridrag/errors.hpp"

namespace gridrag {

std::string page_stem(const PageRef& page) {
  return page.doc_id + "_p" + std::to_string(page.page_index);
}

bool valid_within(const BBox& box, double width, double height) {
  return box.x0 >= 0 && box.y0 >= 0 && box.x0 < box.x1 && box.y0 < box.y1 &&
         box.x1 <= width && box.y1 <= height;
}

std::string_view to_string(ComponentLabel label) {
  switch (label) {
    case ComponentLabel::Table:
      return "table";
    case ComponentLabel::Text:
      return "text";
    case ComponentLabel::Title:
      return "title";
    case ComponentLabel::Figure:
      return "figure";
    case ComponentLabel::List:
      return "list";
    case ComponentLabel::Page:
      return "page";
  }
  return "text";
}

ComponentLabel label_from_string(std::string_view name) {
  for (auto label : {ComponentLabel::Table, ComponentLabel::Text,
                     ComponentLabel::Title, ComponentLabel::Figure,
                     ComponentLabel::List, ComponentLabel::Page}) {
    if (to_string(label) == name) return label;
  }
  throw Error("unknown component label: " + std::string(name));
}

std::string_view to_string(Origin origin) {
  return origin == Origin::Region ? "region" : "page_fallback";
}

Origin origin_from_string(std::string_view name) {
  if (name == "region") return Origin::Region;
  if (name == "page_fallback") return Origin::PageFallback;
  throw Error("unknown origin: " + std::string(name));
}

bool ImageRef::empty() const {
  return std::holds_alternative<std::monostate>(source_);
}

Bytes ImageRef::load() const {
  if (const auto* path = std::get_if<std::filesystem::path>(&source_)) {
    std::ifstream in(*path, std::ios::binary);
    if (!in) throw ImageError("cannot open image " + path->string());
    return Bytes(std::istreambuf_iterator<char>(in), {});
  }
  if (const auto* bytes = std::get_if<std::shared_ptr<const Bytes>>(&source_)) {
    return **bytes;
  }
  throw ImageError("empty image reference");
}

std::optional<std::filesystem::path> ImageRef::path() const {
  if (const auto* path = std::get_if<std::filesystem::path>(&source_)) {
    return *path;
  }
  return std::nullopt;
}

namespace {

bool ends_with_arrow(std::string_view level) {
  constexpr std::string_view arrow = " ->";
  return level.size() >= arrow.size() &&
         level.substr(level.size() - arrow.size()) == arrow;
}

}  // namespace

HeaderPath::HeaderPath(std::vector<std::string> levels)
    : levels_(std::move(levels)) {
  if (levels_.empty()) throw MalformedHeaderPath("header path has no levels");
  for (std::size_t i = 0; i < levels_.size(); ++i) {
    const auto& level = levels_[i];
    if (level.empty()) {
      throw MalformedHeaderPath("header level " + std::to_string(i) +
                                " is empty");
    }
    if (level.find(kHeaderSeparator) != std::string::npos) {
      throw MalformedHeaderPath("header level contains separator: " + level);
    }
    if (i + 1 < levels_.size() && ends_with_arrow(level)) {
      throw MalformedHeaderPath("header level ends in \" ->\": " + level);
    }
  }
}

HeaderPath parse_header_path(std::string_view s) {
  if (s.empty()) throw MalformedHeaderPath("empty header path");
  std::vector<std::string> levels;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(kHeaderSeparator, start);
    if (pos == std::string_view::npos) {
      levels.emplace_back(s.substr(start));
      break;
    }
    levels.emplace_back(s.substr(start, pos - start));
    start = pos + kHeaderSeparator.size();
  }
  return HeaderPath(std::move(levels));
}

std::string serialize_header_path(const HeaderPath& path) {
  std::string out;
  for (const auto& level : path.levels()) {
    if (!out.empty()) out += kHeaderSeparator;
    out += level;
  }
  return out;
}

void to_json(nlohmann::json& j, const PageRef& page) {
  j = {{"doc_id", page.doc_id}, {"page_index", page.page_index}};
}

void from_json(const nlohmann::json& j, PageRef& page) {
  j.at("doc_id").get_to(page.doc_id);
  j.at("page_index").get_to(page.page_index);
}

void to_json(nlohmann::json& j, const CellTriple& cell) {
  j = nlohmann::json::object();
  j["row"] = cell.row;
  j["column"] = cell.column;
  j["value"] = cell.value ? nlohmann::json(*cell.value) : nlohmann::json();
}

void from_json(const nlohmann::json& j, CellTriple& cell) {
  j.at("row").get_to(cell.row);
  j.at("column").get_to(cell.column);
  const auto& value = j.at("value");
  cell.value = value.is_null() ? std::nullopt
                               : std::optional(value.get<std::string>());
}

void to_json(nlohmann::json& j, const StructuredRegion& region) {
  j = nlohmann::json::object();
  j["component_id"] = region.component_id;
  j["kind"] = to_string(region.kind);
  j["cells"] = region.cells;
  j["text"] = region.text ? nlohmann::json(*region.text) : nlohmann::json();
  j["origin"] = to_string(region.origin);
}

void from_json(const nlohmann::json& j, StructuredRegion& region) {
  j.at("component_id").get_to(region.component_id);
  region.kind = label_from_string(j.at("kind").get<std::string>());
  region.cells = j.value("cells", std::vector<CellTriple>{});
  const auto text = j.value("text", nlohmann::json());
  region.text = text.is_null() ? std::nullopt
                               : std::optional(text.get<std::string>());
  region.origin = origin_from_string(j.at("origin").get<std::string>());
}

void to_json(nlohmann::json& j, const LayoutComponent& component) {
  j = nlohmann::json::object();
  j["component_id"] = component.component_id;
  j["page"] = component.page;
  j["bbox"] = {component.bbox.x0, component.bbox.y0, component.bbox.x1,
               component.bbox.y1};
  j["label"] = to_string(component.label);
  j["confidence"] = component.confidence;
  if (auto path = component.crop.path()) j["crop"] = path->string();
  j["attached_ids"] = component.attached_ids;
}

}  // namespace gridrag
