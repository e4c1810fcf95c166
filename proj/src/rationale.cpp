#include "gridrag/rationale.hpp"

#include <cctype>
#include <vector>

#include <spdlog/spdlog.h>

#include "gridrag/errors.hpp"
#include "gridrag/prompts.hpp"

namespace gridrag {

std::string_view to_string(RationaleMode mode) {
  switch (mode) {
    case RationaleMode::Template:
      return "template";
    case RationaleMode::Model:
      return "model";
    case RationaleMode::Passthrough:
      return "passthrough";
  }
  return "template";
}

RationaleMode rationale_mode_from_string(std::string_view name) {
  if (name == "template") return RationaleMode::Template;
  if (name == "model") return RationaleMode::Model;
  if (name == "passthrough") return RationaleMode::Passthrough;
  throw ConfigError("unknown rationale mode: " + std::string(name));
}

std::string template_sentence(const CellTriple& cell) {
  std::vector<std::string> levels;
  try {
    levels = parse_header_path(cell.column).levels();
  } catch (const MalformedHeaderPath&) {
    levels = {cell.column};
  }
  const std::string& last = levels.back();
  const bool plural =
      !last.empty() && std::tolower(static_cast<unsigned char>(last.back())) == 's';
  const std::string tail = cell.row + " " + last + (plural ? " are " : " is ") +
                           cell.value.value_or("not specified") + ".";
  if (levels.size() == 1) return "The " + tail;
  std::string clause = "In ";
  if (levels.size() == 2) {
    clause += levels[0];
  } else {
    clause += levels[1] + " of " + levels[0];
    for (std::size_t i = 2; i + 1 < levels.size(); ++i) clause += ", " + levels[i];
  }
  return clause + ", the " + tail;
}

std::string template_rationale(std::span<const CellTriple> cells) {
  std::string out;
  for (const auto& cell : cells) {
    if (!out.empty()) out += '\n';
    out += template_sentence(cell);
  }
  return out;
}

namespace {

std::vector<std::string> nonblank_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string_view::npos) {
      const auto last = line.find_last_not_of(" \t\r");
      lines.emplace_back(line.substr(first, last - first + 1));
    }
    start = end + 1;
  }
  return lines;
}

}  // namespace

bool rationale_matches_cells(std::string_view text,
                             std::span<const CellTriple> cells) {
  const auto lines = nonblank_lines(text);
  if (lines.size() != cells.size()) return false;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].value && lines[i].find(*cells[i].value) == std::string::npos) {
      return false;
    }
  }
  return true;
}

Rationale rationalize(const StructuredRegion& region, const PageRef& page,
                      const Gateway* gateway, RationaleMode mode) {
  Rationale rationale;
  rationale.rationale_id = region.component_id;
  rationale.page = page;
  rationale.component_id = region.component_id;
  rationale.origin = region.origin;

  if (region.kind != ComponentLabel::Table) {
    rationale.text = region.text.value_or("");
    rationale.mode = RationaleMode::Passthrough;
    return rationale;
  }

  if (mode == RationaleMode::Model && gateway) {
    try {
      ChatRequest request = gateway->request_for(Role::Llm);
      request.messages.push_back({"system", {std::string(rationale_prompt())}});
      request.messages.push_back(
          {"user", {nlohmann::json({{"cells", region.cells}}).dump()}});
      const auto response = gateway->client(Role::Llm).chat(request);
      if (rationale_matches_cells(response.text, region.cells)) {
        std::string text;
        for (const auto& line : nonblank_lines(response.text)) {
          if (!text.empty()) text += '\n';
          text += line;
        }
        rationale.text = std::move(text);
        rationale.mode = RationaleMode::Model;
        return rationale;
      }
      spdlog::warn("{}: model rationale failed validation, using template",
                   region.component_id);
    } catch (const std::exception& e) {
      spdlog::warn("{}: model rationale unavailable ({}), using template",
                   region.component_id, e.what());
    }
  }
  rationale.text = template_rationale(region.cells);
  rationale.mode = RationaleMode::Template;
  return rationale;
}

}  // namespace gridrag
