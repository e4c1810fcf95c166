#include <doctest.h>

#include "checksum.hpp"
#include "gridrag/errors.hpp"
#include "gridrag/prompts.hpp"
#include "support.hpp"

using namespace gridrag;

TEST_CASE("sha1 helper matches the FIPS 180 test vector") {
  CHECK(testing::sha1_hex("abc") == "a9993e364706816aba3e25717850c26c9cd0d89d");
}

TEST_CASE("embedded prompts match the pinned checksums") {
  for (const auto& p : testing::kPromptChecksums) {
    CAPTURE(p.file);
    const auto text = prompt_text(p.file);
    CHECK(text.size() == p.size);
    CHECK(testing::sha1_hex(text) == p.sha1);
  }
}

TEST_CASE("build_prompt picks the prompt per component kind") {
  CHECK(build_prompt(ComponentLabel::Table).starts_with(
      "You are a precise information extraction engine."));
  CHECK(build_prompt(ComponentLabel::Page).starts_with(
      "Please parse everything in the attached image"));
  CHECK(build_prompt(ComponentLabel::Title).find("**title text**") != std::string_view::npos);
  CHECK(build_prompt(ComponentLabel::List) == build_prompt(ComponentLabel::Text));
  CHECK(build_prompt(ComponentLabel::Figure) == prompt_text("figure.txt"));
  CHECK(rationale_prompt() == prompt_text("llm_table.txt"));
  CHECK_THROWS_AS(prompt_text("nope.txt"), Error);
}

TEST_CASE("the LLM prompt's worked example is the templater golden") {
  CHECK(rationale_prompt().find(testing::kGoldenLines) != std::string_view::npos);
  for (const auto& c : testing::kGoldenCells) {
    const std::string line = std::string("{\"row\": \"") + c.row + "\", \"column\": \"" +
                             c.column + "\", \"value\": \"" + c.value + "\"}";
    CAPTURE(line);
    CHECK(rationale_prompt().find(line) != std::string_view::npos);
  }
}

TEST_CASE("judge prompt carries its placeholders") {
  for (const char* slot : {"{question}", "{gold}", "{candidate}"}) {
    CHECK(judge_prompt().find(slot) != std::string_view::npos);
  }
}
