#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridrag/config.hpp"
#include "gridrag/gateway.hpp"
#include "gridrag/store.hpp"

namespace gridrag {

struct QaItem {
  std::string question;
  std::vector<std::string> answers;
  PageRef gold;
};

// JSONL, one {"question","answers":[...],"doc_id","page_index"} per line.
std::vector<QaItem> load_qa_file(const std::filesystem::path& path);

struct ItemScore {
  std::size_t index = 0;
  double value = 0;
  std::optional<int> rank;     // retrieval: rank of the first relevant hit
  std::optional<bool> matched; // accuracy: exact match outcome
  std::string error;
};

struct SkippedItem {
  std::size_t index = 0;
  std::string reason;
};

struct EvalReport {
  std::string metric;
  double value = 0;   // mean of per_item values
  double stderr_ = 0; // sample standard deviation / sqrt(n)
  std::vector<ItemScore> per_item;
  std::vector<SkippedItem> skipped;

  nlohmann::json to_json() const;
};

// Fills value and stderr_ from per_item. Throws EvalError when empty.
void aggregate(EvalReport& report);

// NFKC, lowercase, drop everything but letters, digits and white space,
// collapse white space runs, trim.
std::string normalize_answer(std::string_view s);

// Every normalized gold answer occurs in the normalized response.
bool exact_match(std::string_view response, std::span<const std::string> golds);

struct PageHit {
  int rank = 0;
  PageRef page;
};

// Reciprocal rank of the first hit on the gold page within the top 10, else
// 0, averaged over queries.
EvalReport mrr_at_10(const std::vector<std::vector<PageHit>>& per_query_hits,
                     const std::vector<PageRef>& golds);

// Scores a first-token yes/no distribution: p_yes when yes is at least as
// likely as no, 1 - p_no when no is more likely, 0 when neither appears.
double l3score_from_logprobs(const TokenLogprob& first_token);

// Asks the judge whether `candidate` answers `question` like `gold` and reads
// the first token's log-probabilities. Throws JudgeUnsupported when the
// endpoint returns none.
double l3score(std::string_view candidate, std::string_view gold,
               std::string_view question, const Gateway& gateway,
               std::string_view judge_prompt_template);

// The partition holding records of `page`, or null.
const RagStore* store_for_page(std::span<const RagStore> stores, const PageRef& page);

// For each item: gather context from the gold page (all its rationales, or
// top-k retrieval among them), generate an answer and score it by exact match
// or L3Score. Items whose gold page is absent are skipped and reported.
EvalReport run_generation_eval(std::span<const RagStore> stores,
                               const std::vector<QaItem>& items,
                               const Gateway& gateway, const Embedder& embedder,
                               const PipelineConfig& config);

// MRR@k over the partition that holds each item's gold page.
EvalReport run_retrieval_eval(std::span<const RagStore> stores,
                              const std::vector<QaItem>& items,
                              const Embedder& embedder, int k = 10,
                              int workers = 1);

}  // namespace gridrag
