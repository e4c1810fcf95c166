#include "gridrag/eval.hpp"

#include <cmath>
#include <fstream>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/locid.h>

#include "gridrag/errors.hpp"
#include "gridrag/parallel.hpp"
#include "gridrag/rag.hpp"

namespace gridrag {

std::vector<QaItem> load_qa_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open QA file " + path.string());
  std::vector<QaItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw ConfigError("invalid JSON");
      QaItem item;
      item.question = j.at("question").get<std::string>();
      item.answers = j.at("answers").get<std::vector<std::string>>();
      item.gold = {j.at("doc_id").get<std::string>(), j.at("page_index").get<int>()};
      if (item.answers.empty()) throw ConfigError("answers must be non-empty");
      items.push_back(std::move(item));
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return items;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& s : per_item) {
    nlohmann::json entry = {{"index", s.index}, {"value", s.value}};
    if (s.rank) entry["rank"] = *s.rank;
    if (s.matched) entry["matched"] = *s.matched;
    if (!s.error.empty()) entry["error"] = s.error;
    items.push_back(std::move(entry));
  }
  nlohmann::json skipped_items = nlohmann::json::array();
  for (const auto& s : skipped) {
    skipped_items.push_back({{"index", s.index}, {"reason", s.reason}});
  }
  return {{metric, value},      {"metric", metric},
          {"value", value},     {"stderr", stderr_},
          {"n", per_item.size()}, {"skipped", skipped_items},
          {"per_item", items}};
}

void aggregate(EvalReport& report) {
  const std::size_t n = report.per_item.size();
  if (n == 0) throw EvalError("no evaluated items");
  double sum = 0;
  for (const auto& s : report.per_item) sum += s.value;
  report.value = sum / static_cast<double>(n);
  if (n < 2) {
    report.stderr_ = 0;
    return;
  }
  double sq = 0;
  for (const auto& s : report.per_item) sq += (s.value - report.value) * (s.value - report.value);
  report.stderr_ = std::sqrt(sq / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

std::string normalize_answer(std::string_view s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfkc = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error("ICU NFKC normalizer unavailable");
  auto text = nfkc->normalize(
      icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size()))),
      status);
  if (U_FAILURE(status)) throw Error("ICU normalization failed");
  text.toLower(icu::Locale::getRoot());

  icu::UnicodeString out;
  bool pending_space = false;
  for (int32_t i = 0; i < text.length(); i = text.moveIndex32(i, 1)) {
    const UChar32 c = text.char32At(i);
    if (u_isUWhiteSpace(c)) {
      pending_space = !out.isEmpty();
    } else if (u_isalpha(c) || u_isdigit(c)) {
      if (pending_space) out.append(static_cast<UChar>(' '));
      pending_space = false;
      out.append(c);
    }
  }
  std::string utf8;
  out.toUTF8String(utf8);
  return utf8;
}

bool exact_match(std::string_view response, std::span<const std::string> golds) {
  const std::string normalized = normalize_answer(response);
  if (normalized.empty() || golds.empty()) return false;
  for (const auto& gold : golds) {
    if (normalized.find(normalize_answer(gold)) == std::string::npos) return false;
  }
  return true;
}

EvalReport mrr_at_10(const std::vector<std::vector<PageHit>>& per_query_hits,
                     const std::vector<PageRef>& golds) {
  if (per_query_hits.empty()) throw EvalError("empty query set");
  if (per_query_hits.size() != golds.size()) {
    throw EvalError("hit lists and gold pages differ in count");
  }
  EvalReport report;
  report.metric = "mrr@10";
  for (std::size_t q = 0; q < per_query_hits.size(); ++q) {
    ItemScore score;
    score.index = q;
    int best = 0;
    for (const auto& hit : per_query_hits[q]) {
      if (hit.rank < 1) throw EvalError("hit ranks start at 1");
      if (hit.rank <= 10 && hit.page == golds[q] && (best == 0 || hit.rank < best)) {
        best = hit.rank;
      }
    }
    if (best > 0) {
      score.rank = best;
      score.value = 1.0 / best;
    }
    report.per_item.push_back(score);
  }
  aggregate(report);
  return report;
}

namespace {

std::string lower_trimmed(std::string_view token) {
  const auto first = token.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = token.find_last_not_of(" \t\r\n");
  std::string out(token.substr(first, last - first + 1));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Single left-to-right pass, so placeholder text inside a substituted value
// stays literal.
std::string fill_template(std::string_view tmpl,
                          const std::vector<std::pair<std::string_view, std::string_view>>& vars) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    bool replaced = false;
    for (const auto& [name, value] : vars) {
      if (tmpl.substr(pos, name.size()) == name) {
        out += value;
        pos += name.size();
        replaced = true;
        break;
      }
    }
    if (!replaced) out += tmpl[pos++];
  }
  return out;
}

}  // namespace

double l3score_from_logprobs(const TokenLogprob& first_token) {
  std::vector<TokenAlternative> candidates = first_token.top_alternatives;
  candidates.push_back({first_token.token, first_token.logprob});
  std::optional<double> p_yes;
  std::optional<double> p_no;
  for (const auto& c : candidates) {
    const auto token = lower_trimmed(c.token);
    const double p = std::exp(c.logprob);
    if (token == "yes") p_yes = std::max(p_yes.value_or(0.0), p);
    if (token == "no") p_no = std::max(p_no.value_or(0.0), p);
  }
  if (!p_yes && !p_no) return 0.0;
  const double yes = p_yes.value_or(0.0);
  const double no = p_no.value_or(0.0);
  return std::clamp(yes >= no ? yes : 1.0 - no, 0.0, 1.0);
}

double l3score(std::string_view candidate, std::string_view gold,
               std::string_view question, const Gateway& gateway,
               std::string_view judge_prompt_template) {
  std::string prompt = fill_template(
      judge_prompt_template,
      {{"{question}", question}, {"{gold}", gold}, {"{candidate}", candidate}});
  ChatRequest request = gateway.request_for(Role::Judge);
  request.want_logprobs = true;
  request.top_logprobs = 5;
  request.max_tokens = 1;
  request.messages.push_back({"user", {std::move(prompt)}});
  const auto response = gateway.client(Role::Judge).chat(request);
  if (!response.token_logprobs || response.token_logprobs->empty()) {
    throw JudgeUnsupported("judge endpoint returned no token log-probabilities");
  }
  return l3score_from_logprobs(response.token_logprobs->front());
}

const RagStore* store_for_page(std::span<const RagStore> stores, const PageRef& page) {
  for (const auto& store : stores) {
    for (const auto& record : store.records()) {
      if (record.rationale.page == page) return &store;
    }
  }
  return nullptr;
}

EvalReport run_generation_eval(std::span<const RagStore> stores,
                               const std::vector<QaItem>& items,
                               const Gateway& gateway, const Embedder& embedder,
                               const PipelineConfig& config) {
  const bool use_l3 = config.generation_metric == GenerationMetric::L3Score;
  const std::string judge_template = use_l3 ? judge_prompt_template(config) : std::string();

  std::vector<std::optional<ItemScore>> scores(items.size());
  std::vector<std::optional<SkippedItem>> skips(items.size());
  auto errors = parallel_for(items.size(), config.workers, [&](std::size_t i) {
    const auto& item = items[i];
    const RagStore* store = store_for_page(stores, item.gold);
    if (!store) {
      skips[i] = SkippedItem{i, "gold page " + page_stem(item.gold) + " not in any store"};
      return;
    }
    const RagStore page_store = store->filter(
        [&](const StoreRecord& r) { return r.rationale.page == item.gold; });

    ItemScore score;
    score.index = i;
    try {
      std::vector<std::string> documents;
      if (config.generation_context == GenerationContext::GoldPage) {
        for (const auto& record : page_store.records()) documents.push_back(record.rationale.text);
      } else {
        for (const auto& hit : retrieve_top_k(item.question, page_store, config.k, embedder)) {
          documents.push_back(page_store.find(hit.record_id)->rationale.text);
        }
      }
      const std::string response = generate(item.question, documents, gateway);
      if (use_l3) {
        for (const auto& gold : item.answers) {
          score.value = std::max(
              score.value, l3score(response, gold, item.question, gateway, judge_template));
        }
      } else {
        score.matched = exact_match(response, item.answers);
        score.value = *score.matched ? 1.0 : 0.0;
      }
    } catch (const JudgeUnsupported&) {
      throw;
    } catch (const std::exception& e) {
      score.value = 0;
      if (!use_l3) score.matched = false;
      score.error = e.what();
    }
    scores[i] = std::move(score);
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.metric = use_l3 ? "l3score" : "accuracy";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (scores[i]) report.per_item.push_back(std::move(*scores[i]));
    if (skips[i]) report.skipped.push_back(std::move(*skips[i]));
  }
  aggregate(report);
  return report;
}

EvalReport run_retrieval_eval(std::span<const RagStore> stores,
                              const std::vector<QaItem>& items,
                              const Embedder& embedder, int k, int workers) {
  std::vector<std::optional<std::vector<PageHit>>> hits(items.size());
  std::vector<std::string> skip_reason(items.size());
  auto errors = parallel_for(items.size(), workers, [&](std::size_t i) {
    const RagStore* store = store_for_page(stores, items[i].gold);
    if (!store) {
      skip_reason[i] = "gold page " + page_stem(items[i].gold) + " not in any store";
      return;
    }
    std::vector<PageHit> page_hits;
    for (const auto& hit : retrieve_top_k(items[i].question, *store, k, embedder)) {
      page_hits.push_back({hit.rank, store->find(hit.record_id)->rationale.page});
    }
    hits[i] = std::move(page_hits);
  });
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<std::vector<PageHit>> evaluated;
  std::vector<PageRef> golds;
  std::vector<std::size_t> indices;
  std::vector<SkippedItem> skipped;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (hits[i]) {
      evaluated.push_back(std::move(*hits[i]));
      golds.push_back(items[i].gold);
      indices.push_back(i);
    } else {
      skipped.push_back({i, skip_reason[i]});
    }
  }
  if (evaluated.empty()) throw EvalError("no evaluable items");
  EvalReport report = mrr_at_10(evaluated, golds);
  for (std::size_t j = 0; j < indices.size(); ++j) report.per_item[j].index = indices[j];
  report.skipped = std::move(skipped);
  return report;
}

}  // namespace gridrag
