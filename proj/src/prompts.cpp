#include "gridrag/prompts.hpp"

#include <string>

#include "gridrag/errors.hpp"

namespace gridrag {

std::string_view prompt_text(std::string_view file_name) {
  for (const auto& prompt : detail::embedded_prompts()) {
    if (prompt.file_name == file_name) return prompt.text;
  }
  throw Error("no embedded prompt named " + std::string(file_name));
}

std::string_view build_prompt(ComponentLabel kind) {
  switch (kind) {
    case ComponentLabel::Table:
      return prompt_text("table.txt");
    case ComponentLabel::Title:
      return prompt_text("title.txt");
    case ComponentLabel::Figure:
      return prompt_text("figure.txt");
    case ComponentLabel::Page:
      return prompt_text("page.txt");
    case ComponentLabel::Text:
    case ComponentLabel::List:
      break;
  }
  return prompt_text("text.txt");
}

std::string_view rationale_prompt() { return prompt_text("llm_table.txt"); }

std::string_view judge_prompt() { return prompt_text("l3score_judge.txt"); }

}  // namespace gridrag
