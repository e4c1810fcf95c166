#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridrag/errors.hpp"
#include "gridrag/extraction.hpp"
#include "gridrag/gateway.hpp"
#include "gridrag/layout.hpp"
#include "gridrag/rationale.hpp"
#include "gridrag/store.hpp"

namespace gridrag {

struct CorpusPage {
  PageRef page;
  std::filesystem::path image;
};

// {"pages":[{"doc_id","page_index","image"}]}; image paths resolve against
// the manifest's directory.
struct CorpusManifest {
  std::vector<CorpusPage> pages;
};

CorpusManifest manifest_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir = {});
// Throws ConfigError on unreadable or malformed manifests.
CorpusManifest load_manifest(const std::filesystem::path& path);

// Sorts pages by (doc_id, page_index) and splits them into consecutive groups
// of `group_size`.
std::vector<std::vector<CorpusPage>> partition_pages(std::vector<CorpusPage> pages,
                                                     std::size_t group_size);

struct IngestOptions {
  LayoutProvider layout = NoLayout{};
  FallbackPolicy policy = FallbackPolicy::Always;
  RationaleMode rationale_mode = RationaleMode::Template;
  int workers = 4;
};

struct PageReport {
  PageRef page;
  bool ok = false;
  std::string error;
  std::string layout_error;
  std::size_t components = 0;
  std::size_t regions_extracted = 0;
  std::size_t region_failures = 0;
  bool fallback_used = false;
  std::size_t rationales = 0;
  std::size_t template_fallbacks = 0;  // Model mode answers that failed validation
};

struct IngestReport {
  std::vector<PageReport> pages;
  std::size_t records = 0;

  std::size_t pages_ok() const;
  std::size_t pages_failed() const;
  nlohmann::json to_json() const;
};

struct IngestResult {
  std::vector<Rationale> rationales;
  IngestReport report;
};

// Layout, grouping, extraction and rationalization for every page. Page
// failures are recorded in the report and never abort the corpus. Throws
// ConfigError up front when a needed endpoint is missing.
IngestResult ingest_rationales(const CorpusManifest& manifest,
                               const IngestOptions& options,
                               const Gateway& gateway);

// ingest_rationales followed by build_store.
RagStore ingest(const CorpusManifest& manifest, const IngestOptions& options,
                const Gateway& gateway, const Embedder& embedder,
                IngestReport* report = nullptr);

// Instruction, the numbered documents separated by blank lines, the question.
std::string build_generation_prompt(std::string_view question,
                                    std::span<const std::string> documents);

// Single LLM call with the generation prompt.
std::string generate(std::string_view question,
                     std::span<const std::string> documents,
                     const Gateway& gateway);

struct GroundedAnswer {
  std::string text;
  std::vector<RetrievalHit> hits;
};

// The generation step failed; the retrieval result is still attached.
class AnswerUnavailable : public Error {
 public:
  AnswerUnavailable(std::vector<RetrievalHit> hits, const std::string& what)
      : Error(what), hits_(std::move(hits)) {}

  const std::vector<RetrievalHit>& hits() const { return hits_; }

 private:
  std::vector<RetrievalHit> hits_;
};

// Retrieves the top k rationales and asks the LLM to answer from them.
GroundedAnswer answer(std::string_view query, const RagStore& store, int k,
                      const Gateway& gateway, const Embedder& embedder);

}  // namespace gridrag
