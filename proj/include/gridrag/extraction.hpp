#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "gridrag/core.hpp"
#include "gridrag/gateway.hpp"
#include "gridrag/layout.hpp"

namespace gridrag {

// Counts of array elements discarded while validating VLM table output.
struct TripleParseStats {
  std::size_t elements = 0;
  std::size_t extra_keys = 0;      // kept, extra keys dropped
  std::size_t malformed = 0;       // missing key or wrong type
  std::size_t empty_labels = 0;    // empty row or column
};

// Removes ``` fences together with a trailing language tag such as "json".
std::string strip_code_fences(std::string_view raw);

// Repairs (fence stripping, first '[' to last ']') and validates a JSON array
// of {"row","column","value"} objects. Values are kept verbatim.
// Throws NoArrayFound, ParseFailure or EmptyExtraction.
std::vector<CellTriple> parse_cell_triples(std::string_view raw,
                                           TripleParseStats* stats = nullptr);

// One VLM call for one component. Tables become cells, everything else
// trimmed text. Failures are rethrown as RegionError with the original
// exception nested.
StructuredRegion extract_region(const LayoutComponent& component,
                                const Gateway& gateway);

enum class FallbackPolicy { Always, OnFailureOnly };

std::string_view to_string(FallbackPolicy policy);
FallbackPolicy policy_from_string(std::string_view name);

struct RegionFailure {
  std::string component_id;
  std::string message;
};

struct PageExtraction {
  std::vector<StructuredRegion> regions;  // reading order, page region last
  std::vector<RegionFailure> failures;
  bool fallback_attempted = false;
  bool fallback_used = false;
};

// Extracts every region of a page, plus the whole-page component: always
// under FallbackPolicy::Always; under OnFailureOnly only when detection found
// nothing, every table failed, or no region succeeded. Throws
// PageExtractionFailed when nothing could be extracted.
PageExtraction extract_page(const PageImage& image,
                            const std::vector<LayoutComponent>& components,
                            const Gateway& gateway, FallbackPolicy policy,
                            int workers = 1);

}  // namespace gridrag
