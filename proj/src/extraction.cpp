#include "gridrag/extraction.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <optional>

#include <spdlog/spdlog.h>

#include "gridrag/errors.hpp"
#include "gridrag/parallel.hpp"
#include "gridrag/prompts.hpp"

namespace gridrag {

std::string strip_code_fences(std::string_view raw) {
  constexpr std::string_view fence = "```";
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    if (raw.substr(i, fence.size()) == fence) {
      i += fence.size();
      while (i < raw.size() && std::isalpha(static_cast<unsigned char>(raw[i]))) ++i;
      continue;
    }
    out.push_back(raw[i++]);
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

std::vector<CellTriple> parse_cell_triples(std::string_view raw,
                                           TripleParseStats* stats) {
  const std::string cleaned = strip_code_fences(raw);
  const auto open = cleaned.find('[');
  const auto close = cleaned.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw NoArrayFound("no JSON array in model output");
  }
  auto parsed = nlohmann::json::parse(cleaned.substr(open, close - open + 1),
                                      nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) {
    throw ParseFailure("model output is not a valid JSON array");
  }

  TripleParseStats local;
  std::vector<CellTriple> cells;
  for (const auto& element : parsed) {
    ++local.elements;
    if (!element.is_object()) {
      ++local.malformed;
      continue;
    }
    const auto row = element.find("row");
    const auto column = element.find("column");
    const auto value = element.find("value");
    if (row == element.end() || column == element.end() ||
        value == element.end() || !row->is_string() || !column->is_string() ||
        !(value->is_string() || value->is_null())) {
      ++local.malformed;
      continue;
    }
    if (element.size() > 3) ++local.extra_keys;
    CellTriple cell{row->get<std::string>(), column->get<std::string>(),
                    value->is_null() ? std::nullopt
                                     : std::optional(value->get<std::string>())};
    if (cell.row.empty() || cell.column.empty()) {
      ++local.empty_labels;
      continue;
    }
    cells.push_back(std::move(cell));
  }
  if (local.extra_keys > 0) {
    spdlog::warn("dropped extra keys from {} cell objects", local.extra_keys);
  }
  if (stats) *stats = local;
  if (cells.empty()) {
    throw EmptyExtraction("no valid cell triples (" +
                          std::to_string(local.elements) + " elements)");
  }
  return cells;
}

StructuredRegion extract_region(const LayoutComponent& component,
                                const Gateway& gateway) {
  try {
    ChatRequest request = gateway.request_for(Role::Vlm);
    ImagePart image{std::make_shared<const Bytes>(component.crop.load())};
    request.messages.push_back(
        {"user", {std::string(build_prompt(component.label)), std::move(image)}});
    const auto response = gateway.client(Role::Vlm).chat(request);

    StructuredRegion region;
    region.component_id = component.component_id;
    region.kind = component.label;
    region.origin = component.label == ComponentLabel::Page
                        ? Origin::PageFallback
                        : Origin::Region;
    if (component.label == ComponentLabel::Table) {
      region.cells = parse_cell_triples(response.text);
    } else {
      auto text = trim(response.text);
      if (text.empty()) throw EmptyExtraction("model returned no text");
      region.text = std::move(text);
    }
    return region;
  } catch (const std::exception& e) {
    std::throw_with_nested(RegionError(component.component_id, e.what()));
  }
}

std::string_view to_string(FallbackPolicy policy) {
  return policy == FallbackPolicy::Always ? "always" : "on_failure_only";
}

FallbackPolicy policy_from_string(std::string_view name) {
  if (name == "always") return FallbackPolicy::Always;
  if (name == "on_failure_only") return FallbackPolicy::OnFailureOnly;
  throw ConfigError("unknown fallback policy: " + std::string(name));
}

namespace {

std::string describe(const std::exception_ptr& error) {
  try {
    std::rethrow_exception(error);
  } catch (const std::exception& e) {
    return e.what();
  } catch (...) {
    return "unknown error";
  }
}

}  // namespace

PageExtraction extract_page(const PageImage& image,
                            const std::vector<LayoutComponent>& components,
                            const Gateway& gateway, FallbackPolicy policy,
                            int workers) {
  const LayoutComponent page = fallback_component(image);
  std::vector<const LayoutComponent*> jobs;
  for (const auto& component : components) jobs.push_back(&component);
  if (policy == FallbackPolicy::Always) jobs.push_back(&page);

  std::vector<std::optional<StructuredRegion>> results(jobs.size());
  auto errors = parallel_for(jobs.size(), workers, [&](std::size_t i) {
    results[i] = extract_region(*jobs[i], gateway);
  });

  PageExtraction out;
  out.fallback_attempted = policy == FallbackPolicy::Always;
  std::size_t tables = 0;
  std::size_t failed_tables = 0;
  std::size_t region_successes = 0;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const bool is_table = jobs[i]->label == ComponentLabel::Table;
    tables += is_table;
    if (errors[i]) {
      failed_tables += is_table;
      out.failures.push_back({jobs[i]->component_id, describe(errors[i])});
      spdlog::warn("extraction failed: {}", out.failures.back().message);
      continue;
    }
    if (jobs[i] != &page) ++region_successes;
    out.fallback_used = out.fallback_used || jobs[i] == &page;
    out.regions.push_back(std::move(*results[i]));
  }

  if (policy == FallbackPolicy::OnFailureOnly &&
      (components.empty() || (tables > 0 && failed_tables == tables) ||
       region_successes == 0)) {
    out.fallback_attempted = true;
    try {
      out.regions.push_back(extract_region(page, gateway));
      out.fallback_used = true;
    } catch (const std::exception& e) {
      out.failures.push_back({page.component_id, e.what()});
      spdlog::warn("page fallback failed: {}", e.what());
    }
  }

  if (out.regions.empty()) {
    throw PageExtractionFailed(page_stem(image.page) +
                               ": every extraction failed (" +
                               std::to_string(out.failures.size()) + " errors)");
  }
  return out;
}

}  // namespace gridrag
