#pragma once

#include <string_view>
#include <vector>

#include "gridrag/core.hpp"

namespace gridrag {

// Prompt files compiled in from prompts/ at build time, byte for byte.
namespace detail {
struct EmbeddedPrompt {
  std::string_view file_name;
  std::string_view text;
};
const std::vector<EmbeddedPrompt>& embedded_prompts();
}  // namespace detail

// Throws Error for an unknown file name.
std::string_view prompt_text(std::string_view file_name);

// VLM extraction prompt per component kind; List reuses the text prompt.
std::string_view build_prompt(ComponentLabel kind);

// Structured-to-text prompt for table cells.
std::string_view rationale_prompt();

// Default yes/no equivalence judge prompt with {question}, {gold} and
// {candidate} placeholders.
std::string_view judge_prompt();

}  // namespace gridrag
