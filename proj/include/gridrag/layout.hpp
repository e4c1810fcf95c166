#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridrag/core.hpp"
#include "gridrag/image.hpp"

namespace gridrag {

// Reads {dir}/{doc_id}_p{page_index}.layout.json.
struct PrecomputedFiles {
  std::filesystem::path dir;
};

// POST {base_url}/detect with a multipart "image" field.
struct HttpService {
  std::string base_url;
  std::chrono::milliseconds timeout{30000};
};

// No detector: every page goes straight to the whole-page component. This is
// also the direct page-level VLM parsing mode.
struct NoLayout {};

using LayoutProvider = std::variant<NoLayout, PrecomputedFiles, HttpService>;

// A decoded single-page image together with its original encoded bytes.
struct PageImage {
  PageRef page;
  Bytes png;
  Image pixels;
  std::optional<std::filesystem::path> path;

  // Throws ImageError if the file is missing or not a PNG.
  static PageImage load(const PageRef& page, const std::filesystem::path& path);
  static PageImage from_bytes(const PageRef& page, Bytes png);

  double width() const { return pixels.width; }
  double height() const { return pixels.height; }
};

std::string layout_file_name(const PageRef& page);

// Converts a detector response {"components":[{"bbox","label","score"}]} into
// components: boxes clipped to the page, degenerate boxes dropped, unknown
// labels read as text, crops cut from the page unless the entry names a
// "crop" file (resolved against crop_dir).
std::vector<LayoutComponent> components_from_json(
    const nlohmann::json& response, const PageImage& image,
    const std::filesystem::path& crop_dir = {});

// Throws LayoutUnavailable on provider I/O or format failure.
std::vector<LayoutComponent> detect_layout(const PageImage& image,
                                           const LayoutProvider& provider);

struct GroupingThresholds {
  double max_gap_fraction = 0.03;  // of page height
  double min_overlap_ratio = 0.5;  // of the narrower box's width
};

// Vertical gap between two boxes; 0 when they overlap vertically.
double vertical_gap(const BBox& a, const BBox& b);
// Horizontal intersection divided by the narrower width.
double horizontal_overlap_ratio(const BBox& a, const BBox& b);

// Reading-order sort (y0, then x0) plus caption/title attachment: each
// Table/Figure lists the Text/Title components close above or below it.
// Recomputes attached_ids from scratch, so the result depends only on the
// input set.
std::vector<LayoutComponent> group_components(
    std::vector<LayoutComponent> components, double page_height,
    const GroupingThresholds& thresholds = {});

// Whole-page component with id "{doc_id}_p{page_index}_page".
LayoutComponent fallback_component(const PageImage& image);

}  // namespace gridrag
