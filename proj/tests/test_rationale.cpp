#include <doctest.h>

#include <random>
#include <sstream>

#include "gridrag/extraction.hpp"
#include "gridrag/mock_server.hpp"
#include "gridrag/prompts.hpp"
#include "gridrag/rationale.hpp"
#include "support.hpp"

using namespace gridrag;

namespace {

CellTriple cell(std::string row, std::string column, std::optional<std::string> value) {
  return {std::move(row), std::move(column), std::move(value)};
}

StructuredRegion table_region(std::vector<CellTriple> cells) {
  StructuredRegion r;
  r.component_id = "doc_p0_c000";
  r.kind = ComponentLabel::Table;
  r.cells = std::move(cells);
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("template sentences for one, two and three header levels") {
  CHECK(template_sentence(cell("Sales", "2024 -> Q1 -> Revenue", "1,000")) ==
        "In Q1 of 2024, the Sales Revenue is 1,000.");
  CHECK(template_sentence(cell("Sales", "Notes", "N/A")) == "The Sales Notes are N/A.");
  CHECK(template_sentence(cell("Cost", "2023 -> Profit", "(90)")) ==
        "In 2023, the Cost Profit is (90).");
}

TEST_CASE("template details: deeper paths, plural verb, null values") {
  CHECK(template_sentence(cell("Cost", "2024 -> H1 -> Q2 -> EMEA -> Units", "7")) ==
        "In H1 of 2024, Q2, EMEA, the Cost Units are 7.");
  CHECK(template_sentence(cell("Cost", "2024 -> Sales", "7")) == "In 2024, the Cost Sales are 7.");
  CHECK(template_sentence(cell("Cost", "TOTALS", "7")) == "The Cost TOTALS are 7.");
  CHECK(template_sentence(cell("Cost", "Notes", std::nullopt)) ==
        "The Cost Notes are not specified.");
  // No separator: the whole header is one level.
  CHECK(template_sentence(cell("Non-current assets", "2019 $ million", "196.9")) ==
        "The Non-current assets 2019 $ million is 196.9.");
  // Not a valid path (empty level): treated as a single level.
  CHECK(template_sentence(cell("A", "X -> ", "1")) == "The A X ->  is 1.");
}

TEST_CASE("the sixteen-line worked example renders byte-exactly") {
  const auto cells = testing::golden_cells();
  CHECK(template_rationale(cells) == testing::kGoldenLines);
}

TEST_CASE("template invariants over random tables") {
  std::mt19937_64 rng(5);
  const std::string alphabet = "ABDEFGHIJKMNPQSTUVXYZabdefghijkmnpqstuvxyz0123456789 ";
  std::uniform_int_distribution<int> count(1, 20);
  std::uniform_int_distribution<int> depth(1, 4);
  std::bernoulli_distribution blank(0.1);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<CellTriple> cells;
    for (int i = count(rng); i > 0; --i) {
      std::vector<std::string> levels;
      for (int d = depth(rng); d > 0; --d) levels.push_back(testing::random_word(rng, alphabet));
      std::optional<std::string> value;
      if (!blank(rng)) value = testing::random_word(rng, "0123456789,.()-$%", 8);
      cells.push_back({testing::random_word(rng, alphabet),
                       serialize_header_path(HeaderPath(levels)), value});
    }
    const auto text = template_rationale(cells);
    const auto lines = lines_of(text);
    REQUIRE(lines.size() == cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      REQUIRE(lines[i].find(cells[i].value.value_or("not specified")) != std::string::npos);
    }
    REQUIRE(rationale_matches_cells(text, cells));
    REQUIRE(template_rationale(cells) == text);
    // The generator avoids the letters of "row", "column" and "cell" in
    // identifiers (no 'c', 'l', 'o', 'r', 'w'), so none may appear.
    for (const char* word : {"row", "column", "cell"}) {
      std::string lower = text;
      for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      REQUIRE(lower.find(word) == std::string::npos);
    }
  }
}

TEST_CASE("the fenced eight-triple table in template mode") {
  const auto region = table_region(parse_cell_triples(testing::kFencedVlmOutput));
  const auto r = rationalize(region, {"doc", 0}, nullptr, RationaleMode::Template);
  const auto lines = lines_of(r.text);
  REQUIRE(lines.size() == 8);
  CHECK(lines[0] == "The Non-current assets 2019 $ million is 196.9.");
  CHECK(lines[4] == "The Europe, Middle East and Africa 2019 $ million is 215.8.");
  CHECK(r.mode == RationaleMode::Template);
  CHECK(r.rationale_id == "doc_p0_c000");
  CHECK(r.component_id == "doc_p0_c000");
  CHECK(r.origin == Origin::Region);
}

TEST_CASE("non-table regions pass through") {
  StructuredRegion text;
  text.component_id = "doc_p0_c001";
  text.kind = ComponentLabel::Text;
  text.text = "Quarterly report.";
  const auto r = rationalize(text, {"doc", 0}, nullptr, RationaleMode::Model);
  CHECK(r.text == "Quarterly report.");
  CHECK(r.mode == RationaleMode::Passthrough);

  StructuredRegion page;
  page.component_id = "doc_p0_page";
  page.kind = ComponentLabel::Page;
  page.text = "Everything on the page.";
  page.origin = Origin::PageFallback;
  const auto p = rationalize(page, {"doc", 0}, nullptr, RationaleMode::Template);
  CHECK(p.origin == Origin::PageFallback);
  CHECK(p.text == "Everything on the page.");
}

TEST_CASE("model mode keeps valid LLM output and falls back otherwise") {
  const auto cells = parse_cell_triples(testing::kFencedVlmOutput);
  const auto region = table_region(cells);
  const auto template_text = template_rationale(cells);

  std::string eight;
  const char* values[] = {"196.9", "184.6", "7.4", "11.5", "215.8", "4.4", "5.1", "194.1"};
  for (const char* v : values) eight += std::string("In that year the amount is ") + v + ".\n";
  const std::string seven = eight.substr(0, eight.rfind("In that"));

  SUBCASE("valid output is used") {
    MockOptions o;
    o.default_fixture = testing::text_fixture(eight);
    MockServer server(o);
    server.start();
    const auto gateway = testing::mock_gateway(server);
    const auto r = rationalize(region, {"doc", 0}, &gateway, RationaleMode::Model);
    CHECK(r.mode == RationaleMode::Model);
    CHECK(lines_of(r.text).size() == 8);
  }
  SUBCASE("seven lines for eight cells falls back to the template") {
    MockOptions o;
    o.default_fixture = testing::text_fixture(seven);
    MockServer server(o);
    server.start();
    const auto gateway = testing::mock_gateway(server);
    const auto r = rationalize(region, {"doc", 0}, &gateway, RationaleMode::Model);
    CHECK(r.mode == RationaleMode::Template);
    CHECK(r.text == template_text);
  }
  SUBCASE("a gateway failure falls back to the template") {
    Gateway gateway;
    auto e = testing::endpoint("http://127.0.0.1:9");
    e.max_attempts = 1;
    gateway.configure(Role::Llm, e);
    const auto r = rationalize(region, {"doc", 0}, &gateway, RationaleMode::Model);
    CHECK(r.mode == RationaleMode::Template);
    CHECK(r.text == template_text);
  }
}

TEST_CASE("validation contract") {
  const std::vector<CellTriple> cells = {cell("A", "B", "1"), cell("C", "D", std::nullopt)};
  CHECK(rationale_matches_cells("one 1\nsomething\n", cells));
  CHECK(rationale_matches_cells("one 1\n\n  \nsomething", cells));
  CHECK_FALSE(rationale_matches_cells("one\nsomething 1", cells));
  CHECK_FALSE(rationale_matches_cells("one 1", cells));
  CHECK(rationale_mode_from_string("model") == RationaleMode::Model);
  CHECK(to_string(RationaleMode::Passthrough) == "passthrough");
}
