#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <unistd.h>

#include "gridrag/core.hpp"
#include "gridrag/gateway.hpp"
#include "gridrag/image.hpp"
#include "gridrag/mock_server.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("gridrag-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline void write_bytes(const fs::path& path, const gridrag::Bytes& bytes) {
  write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// Solid PNG; when `key` is set the bytes carry "FX:<key>" so the mock server
// routes image-only requests to that fixture.
inline gridrag::Bytes fixture_png(int width, int height, std::string_view key = {},
                                  std::uint8_t shade = 200) {
  auto png = gridrag::encode_png(gridrag::make_image(width, height, shade, shade, shade));
  if (!key.empty()) png = gridrag::insert_png_text(png, "Comment", "FX:" + std::string(key));
  return png;
}

inline gridrag::EndpointConfig endpoint(const std::string& base_url,
                                        gridrag::Role role = gridrag::Role::Llm) {
  auto e = gridrag::role_defaults(role);
  e.base_url = base_url;
  e.model = "mock-" + std::string(gridrag::to_string(role));
  e.initial_backoff = std::chrono::milliseconds(5);
  e.timeout = std::chrono::milliseconds(5000);
  return e;
}

inline gridrag::Gateway mock_gateway(const gridrag::MockServer& server) {
  gridrag::Gateway gateway;
  for (auto role : {gridrag::Role::Vlm, gridrag::Role::Llm, gridrag::Role::Judge,
                    gridrag::Role::Embedder}) {
    gateway.configure(role, endpoint(server.base_url(), role));
  }
  return gateway;
}

inline gridrag::Fixture text_fixture(std::string text) {
  gridrag::Fixture f;
  f.text = std::move(text);
  return f;
}

inline gridrag::Fixture echo_fixture() {
  gridrag::Fixture f;
  f.echo = true;
  return f;
}

// A fenced VLM table answer with eight triples, verbatim.
inline constexpr std::string_view kFencedVlmOutput =
    "```json\n"
    "[\n"
    "    {\"row\": \"Non-current assets\", \"column\": \"2019 $ million\", \"value\": \"196.9\"},\n"
    "    {\"row\": \"Non-current assets\", \"column\": \"2018 $ million\", \"value\": \"184.6\"},\n"
    "    {\"row\": \"Americas\", \"column\": \"2019 $ million\", \"value\": \"7.4\"},\n"
    "    {\"row\": \"Asia Pacific\", \"column\": \"2019 $ million\", \"value\": \"11.5\"},\n"
    "    {\"row\": \"Europe, Middle East and Africa\", \"column\": \"2019 $ million\", \"value\": \"215.8\"},\n"
    "    {\"row\": \"Non-current assets\", \"column\": \"2018 $ million\", \"value\": \"4.4\"},\n"
    "    {\"row\": \"Americas\", \"column\": \"2018 $ million\", \"value\": \"5.1\"},\n"
    "    {\"row\": \"Asia Pacific\", \"column\": \"2018 $ million\", \"value\": \"194.1\"}\n"
    "]\n"
    "```";

// Input triples and expected sentences of the LLM prompt's worked example.
struct GoldenCell {
  const char* row;
  const char* column;
  const char* value;
};

inline constexpr GoldenCell kGoldenCells[] = {
    {"Sales", "2024 -> Q1 -> Revenue", "1,000"},
    {"Sales", "2024 -> Q1 -> Profit", "300"},
    {"Sales", "2024 -> Q2 -> Revenue", "900"},
    {"Sales", "2024 -> Q2 -> Profit", "250"},
    {"Sales", "2023 -> Revenue", "1,700"},
    {"Sales", "2023 -> Profit", "550"},
    {"Sales", "Growth %", "12%"},
    {"Sales", "Notes", "N/A"},
    {"Cost", "2024 -> Q1 -> Revenue", "(200)"},
    {"Cost", "2024 -> Q1 -> Profit", "(50)"},
    {"Cost", "2024 -> Q2 -> Revenue", "-180"},
    {"Cost", "2024 -> Q2 -> Profit", "-40"},
    {"Cost", "2023 -> Revenue", "(380)"},
    {"Cost", "2023 -> Profit", "(90)"},
    {"Cost", "Growth %", "N/A"},
    {"Cost", "Notes", "Adjusted"},
};

inline constexpr std::string_view kGoldenLines =
    "In Q1 of 2024, the Sales Revenue is 1,000.\n"
    "In Q1 of 2024, the Sales Profit is 300.\n"
    "In Q2 of 2024, the Sales Revenue is 900.\n"
    "In Q2 of 2024, the Sales Profit is 250.\n"
    "In 2023, the Sales Revenue is 1,700.\n"
    "In 2023, the Sales Profit is 550.\n"
    "The Sales Growth % is 12%.\n"
    "The Sales Notes are N/A.\n"
    "In Q1 of 2024, the Cost Revenue is (200).\n"
    "In Q1 of 2024, the Cost Profit is (50).\n"
    "In Q2 of 2024, the Cost Revenue is -180.\n"
    "In Q2 of 2024, the Cost Profit is -40.\n"
    "In 2023, the Cost Revenue is (380).\n"
    "In 2023, the Cost Profit is (90).\n"
    "The Cost Growth % is N/A.\n"
    "The Cost Notes are Adjusted.";

inline std::vector<gridrag::CellTriple> golden_cells() {
  std::vector<gridrag::CellTriple> cells;
  for (const auto& c : kGoldenCells) cells.push_back({c.row, c.column, std::string(c.value)});
  return cells;
}

// Random printable ASCII word of length [1, max_len] drawn from `alphabet`.
inline std::string random_word(std::mt19937_64& rng, std::string_view alphabet,
                               int max_len = 8) {
  std::uniform_int_distribution<int> len(1, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s;
  for (int i = len(rng); i > 0; --i) s += alphabet[pick(rng)];
  return s;
}

}  // namespace testing
