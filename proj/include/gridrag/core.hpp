#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace gridrag {

using Bytes = std::vector<std::uint8_t>;

// One single-page unit of a corpus.
struct PageRef {
  std::string doc_id;
  int page_index = 0;

  auto operator<=>(const PageRef&) const = default;
};

// "{doc_id}_p{page_index}", the file naming convention for single pages.
std::string page_stem(const PageRef& page);

// Axis-aligned box in page-image pixel coordinates.
struct BBox {
  double x0 = 0;
  double y0 = 0;
  double x1 = 0;
  double y1 = 0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  bool operator==(const BBox&) const = default;
};

// True iff 0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height.
bool valid_within(const BBox& box, double width, double height);

enum class ComponentLabel { Table, Text, Title, Figure, List, Page };

std::string_view to_string(ComponentLabel label);
// Accepts the lowercase names produced by to_string; throws Error otherwise.
ComponentLabel label_from_string(std::string_view name);

enum class Origin { Region, PageFallback };

std::string_view to_string(Origin origin);
Origin origin_from_string(std::string_view name);

// Reference to image bytes: either a file on disk or an in-memory buffer.
class ImageRef {
 public:
  ImageRef() = default;
  explicit ImageRef(std::filesystem::path path) : source_(std::move(path)) {}
  explicit ImageRef(Bytes bytes)
      : source_(std::make_shared<const Bytes>(std::move(bytes))) {}

  bool empty() const;
  // Reads the file or copies the buffer. Throws ImageError on I/O failure.
  Bytes load() const;
  std::optional<std::filesystem::path> path() const;

 private:
  std::variant<std::monostate, std::filesystem::path,
               std::shared_ptr<const Bytes>>
      source_;
};

struct LayoutComponent {
  std::string component_id;
  PageRef page;
  BBox bbox;
  ComponentLabel label = ComponentLabel::Text;
  double confidence = 1.0;
  ImageRef crop;
  std::vector<std::string> attached_ids;
};

inline constexpr std::string_view kHeaderSeparator = " -> ";

// Multi-level column header. Levels are non-empty, never contain the
// separator, and no level other than the last ends in " ->" (which would make
// the joined form ambiguous).
class HeaderPath {
 public:
  explicit HeaderPath(std::vector<std::string> levels);

  const std::vector<std::string>& levels() const { return levels_; }
  std::size_t depth() const { return levels_.size(); }
  bool operator==(const HeaderPath&) const = default;

 private:
  std::vector<std::string> levels_;
};

HeaderPath parse_header_path(std::string_view s);
std::string serialize_header_path(const HeaderPath& path);

struct CellTriple {
  std::string row;
  std::string column;
  std::optional<std::string> value;

  bool operator==(const CellTriple&) const = default;
};

struct StructuredRegion {
  std::string component_id;
  ComponentLabel kind = ComponentLabel::Text;
  std::vector<CellTriple> cells;
  std::optional<std::string> text;
  Origin origin = Origin::Region;

  bool operator==(const StructuredRegion&) const = default;
};

// Canonical JSON shapes (snake_case field names).
void to_json(nlohmann::json& j, const PageRef& page);
void from_json(const nlohmann::json& j, PageRef& page);
void to_json(nlohmann::json& j, const CellTriple& cell);
void from_json(const nlohmann::json& j, CellTriple& cell);
void to_json(nlohmann::json& j, const StructuredRegion& region);
void from_json(const nlohmann::json& j, StructuredRegion& region);
// The crop is written as its path when it has one, else omitted.
void to_json(nlohmann::json& j, const LayoutComponent& component);

}  // namespace gridrag
