#include "gridrag/layout.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "gridrag/errors.hpp"

namespace gridrag {

PageImage PageImage::load(const PageRef& page,
                          const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open page image " + path.string());
  PageImage image = from_bytes(page, Bytes(std::istreambuf_iterator<char>(in), {}));
  image.path = path;
  return image;
}

PageImage PageImage::from_bytes(const PageRef& page, Bytes png) {
  PageImage image;
  image.page = page;
  image.pixels = decode_png(png);
  image.png = std::move(png);
  return image;
}

std::string layout_file_name(const PageRef& page) {
  return page_stem(page) + ".layout.json";
}

namespace {

ComponentLabel map_provider_label(std::string label) {
  std::transform(label.begin(), label.end(), label.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (label == "table") return ComponentLabel::Table;
  if (label == "title") return ComponentLabel::Title;
  if (label == "figure") return ComponentLabel::Figure;
  if (label == "list") return ComponentLabel::List;
  return ComponentLabel::Text;
}

std::string component_id(const PageRef& page, std::size_t index) {
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "_c%03zu", index);
  return page_stem(page) + suffix;
}

}  // namespace

std::vector<LayoutComponent> components_from_json(
    const nlohmann::json& response, const PageImage& image,
    const std::filesystem::path& crop_dir) {
  if (!response.is_object() || !response.contains("components") ||
      !response["components"].is_array()) {
    throw LayoutUnavailable("layout response lacks a components array");
  }
  std::vector<LayoutComponent> out;
  const auto& entries = response["components"];
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& entry = entries[i];
    try {
      const auto& bbox = entry.at("bbox");
      if (!bbox.is_array() || bbox.size() != 4) {
        throw LayoutUnavailable("bbox must hold four numbers");
      }
      BBox box{std::clamp(bbox[0].get<double>(), 0.0, image.width()),
               std::clamp(bbox[1].get<double>(), 0.0, image.height()),
               std::clamp(bbox[2].get<double>(), 0.0, image.width()),
               std::clamp(bbox[3].get<double>(), 0.0, image.height())};
      if (!valid_within(box, image.width(), image.height())) {
        spdlog::warn("{}: dropping degenerate layout box {}",
                     page_stem(image.page), i);
        continue;
      }
      LayoutComponent component;
      component.component_id = component_id(image.page, i);
      component.page = image.page;
      component.bbox = box;
      component.label = map_provider_label(entry.value("label", "text"));
      component.confidence = std::clamp(entry.value("score", 1.0), 0.0, 1.0);
      if (entry.contains("crop")) {
        component.crop =
            ImageRef(crop_dir / entry["crop"].get<std::string>());
      } else {
        component.crop = ImageRef(encode_png(crop(image.pixels, box)));
      }
      out.push_back(std::move(component));
    } catch (const nlohmann::json::exception& e) {
      throw LayoutUnavailable("malformed layout entry " + std::to_string(i) +
                              ": " + e.what());
    }
  }
  return out;
}

namespace {

std::vector<LayoutComponent> detect_precomputed(const PageImage& image,
                                                const PrecomputedFiles& files) {
  const auto path = files.dir / layout_file_name(image.page);
  std::ifstream in(path);
  if (!in) throw LayoutUnavailable("missing layout file " + path.string());
  nlohmann::json response;
  try {
    in >> response;
  } catch (const nlohmann::json::exception& e) {
    throw LayoutUnavailable("unreadable layout file " + path.string() + ": " +
                            e.what());
  }
  return components_from_json(response, image, files.dir);
}

std::vector<LayoutComponent> detect_http(const PageImage& image,
                                         const HttpService& service) {
  httplib::Client client(service.base_url);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(service.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
      service.timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  httplib::MultipartFormDataItems items = {
      {"image", std::string(image.png.begin(), image.png.end()),
       page_stem(image.page) + ".png", "image/png"}};
  auto result = client.Post("/detect", items);
  if (!result) {
    throw LayoutUnavailable("layout service unreachable: " +
                            httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    throw LayoutUnavailable("layout service returned status " +
                            std::to_string(result->status));
  }
  auto response = nlohmann::json::parse(result->body, nullptr, false);
  if (response.is_discarded()) {
    throw LayoutUnavailable("layout service returned invalid JSON");
  }
  return components_from_json(response, image);
}

}  // namespace

std::vector<LayoutComponent> detect_layout(const PageImage& image,
                                           const LayoutProvider& provider) {
  return std::visit(
      [&](const auto& p) -> std::vector<LayoutComponent> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PrecomputedFiles>) {
          return detect_precomputed(image, p);
        } else if constexpr (std::is_same_v<T, HttpService>) {
          return detect_http(image, p);
        } else {
          return {};
        }
      },
      provider);
}

double vertical_gap(const BBox& a, const BBox& b) {
  return std::max(0.0, std::max(a.y0, b.y0) - std::min(a.y1, b.y1));
}

double horizontal_overlap_ratio(const BBox& a, const BBox& b) {
  const double overlap = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double narrower = std::min(a.width(), b.width());
  if (overlap <= 0 || narrower <= 0) return 0.0;
  return overlap / narrower;
}

std::vector<LayoutComponent> group_components(
    std::vector<LayoutComponent> components, double page_height,
    const GroupingThresholds& thresholds) {
  std::sort(components.begin(), components.end(),
            [](const LayoutComponent& a, const LayoutComponent& b) {
              return std::tie(a.bbox.y0, a.bbox.x0, a.component_id) <
                     std::tie(b.bbox.y0, b.bbox.x0, b.component_id);
            });
  const double max_gap = thresholds.max_gap_fraction * page_height;
  for (auto& target : components) {
    target.attached_ids.clear();
    if (target.label != ComponentLabel::Table &&
        target.label != ComponentLabel::Figure) {
      continue;
    }
    for (const auto& other : components) {
      if (other.label != ComponentLabel::Text &&
          other.label != ComponentLabel::Title) {
        continue;
      }
      if (vertical_gap(other.bbox, target.bbox) <= max_gap &&
          horizontal_overlap_ratio(other.bbox, target.bbox) >=
              thresholds.min_overlap_ratio) {
        target.attached_ids.push_back(other.component_id);
      }
    }
  }
  return components;
}

LayoutComponent fallback_component(const PageImage& image) {
  LayoutComponent component;
  component.component_id = page_stem(image.page) + "_page";
  component.page = image.page;
  component.bbox = BBox{0, 0, image.width(), image.height()};
  component.label = ComponentLabel::Page;
  component.confidence = 1.0;
  component.crop = image.path ? ImageRef(*image.path) : ImageRef(image.png);
  return component;
}

}  // namespace gridrag
