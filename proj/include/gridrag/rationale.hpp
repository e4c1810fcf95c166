#pragma once

#include <span>
#include <string>
#include <string_view>

#include "gridrag/core.hpp"
#include "gridrag/gateway.hpp"

namespace gridrag {

enum class RationaleMode { Template, Model, Passthrough };

std::string_view to_string(RationaleMode mode);
RationaleMode rationale_mode_from_string(std::string_view name);

// Natural-language description of one structured region; the retrieval unit.
struct Rationale {
  std::string rationale_id;
  PageRef page;
  std::string component_id;
  Origin origin = Origin::Region;
  std::string text;
  RationaleMode mode = RationaleMode::Passthrough;

  bool operator==(const Rationale&) const = default;
};

// Renders one sentence for a cell with header levels L1..Ln:
//   n = 1   "The {row} {L1} {verb} {value}."
//   n = 2   "In {L1}, the {row} {L2} {verb} {value}."
//   n >= 3  "In {L2} of {L1}[, {L3} .. , {Ln-1}], the {row} {Ln} {verb} {value}."
// verb is "are" when Ln ends in 's' (case-insensitive), else "is"; a null
// value reads "not specified". Columns that are not valid header paths are
// treated as a single level.
std::string template_sentence(const CellTriple& cell);

// One template_sentence per cell, newline separated, input order.
std::string template_rationale(std::span<const CellTriple> cells);

// True when `text` has exactly one non-blank line per cell and each cell's
// value occurs on its own line.
bool rationale_matches_cells(std::string_view text,
                             std::span<const CellTriple> cells);

// Turns a region into its rationale. Tables use the templater, or in Model
// mode the LLM (falling back to the templater, mode Template, when the call
// fails or its output does not validate). Other regions pass their text
// through unchanged.
Rationale rationalize(const StructuredRegion& region, const PageRef& page,
                      const Gateway* gateway, RationaleMode mode);

}  // namespace gridrag
