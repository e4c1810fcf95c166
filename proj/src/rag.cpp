#include "gridrag/rag.hpp"

#include <algorithm>
#include <fstream>

#include <spdlog/spdlog.h>

#include "gridrag/parallel.hpp"

namespace gridrag {

CorpusManifest manifest_from_json(const nlohmann::json& j,
                                  const std::filesystem::path& base_dir) {
  CorpusManifest manifest;
  try {
    for (const auto& entry : j.at("pages")) {
      CorpusPage page;
      page.page.doc_id = entry.at("doc_id").get<std::string>();
      page.page.page_index = entry.at("page_index").get<int>();
      if (page.page.doc_id.empty() || page.page.page_index < 0) {
        throw ConfigError("manifest page needs a doc_id and page_index >= 0");
      }
      std::filesystem::path image(entry.at("image").get<std::string>());
      page.image = image.is_absolute() || base_dir.empty() ? image : base_dir / image;
      manifest.pages.push_back(std::move(page));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid manifest: ") + e.what());
  }
  std::vector<PageRef> refs;
  for (const auto& p : manifest.pages) refs.push_back(p.page);
  std::sort(refs.begin(), refs.end());
  if (std::adjacent_find(refs.begin(), refs.end()) != refs.end()) {
    throw ConfigError("manifest lists a page twice");
  }
  return manifest;
}

CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("manifest is not valid JSON: " + path.string());
  return manifest_from_json(j, path.parent_path());
}

std::vector<std::vector<CorpusPage>> partition_pages(std::vector<CorpusPage> pages,
                                                     std::size_t group_size) {
  if (group_size == 0) throw ConfigError("partition size must be at least 1");
  std::sort(pages.begin(), pages.end(),
            [](const CorpusPage& a, const CorpusPage& b) { return a.page < b.page; });
  std::vector<std::vector<CorpusPage>> groups;
  for (std::size_t i = 0; i < pages.size(); i += group_size) {
    const auto end = std::min(pages.size(), i + group_size);
    groups.emplace_back(pages.begin() + i, pages.begin() + end);
  }
  return groups;
}

std::size_t IngestReport::pages_ok() const {
  return std::count_if(pages.begin(), pages.end(), [](const auto& p) { return p.ok; });
}

std::size_t IngestReport::pages_failed() const { return pages.size() - pages_ok(); }

nlohmann::json IngestReport::to_json() const {
  nlohmann::json page_list = nlohmann::json::array();
  std::size_t regions = 0;
  std::size_t fallbacks = 0;
  std::size_t failures = 0;
  for (const auto& p : pages) {
    regions += p.regions_extracted;
    fallbacks += p.fallback_used;
    failures += p.region_failures;
    nlohmann::json entry = {{"doc_id", p.page.doc_id},
                            {"page_index", p.page.page_index},
                            {"ok", p.ok},
                            {"components", p.components},
                            {"regions_extracted", p.regions_extracted},
                            {"region_failures", p.region_failures},
                            {"fallback_used", p.fallback_used},
                            {"rationales", p.rationales},
                            {"template_fallbacks", p.template_fallbacks}};
    if (!p.error.empty()) entry["error"] = p.error;
    if (!p.layout_error.empty()) entry["layout_error"] = p.layout_error;
    page_list.push_back(std::move(entry));
  }
  return {{"pages_ok", pages_ok()},
          {"pages_failed", pages_failed()},
          {"regions_extracted", regions},
          {"region_failures", failures},
          {"fallbacks_used", fallbacks},
          {"records", records},
          {"pages", page_list}};
}

IngestResult ingest_rationales(const CorpusManifest& manifest,
                               const IngestOptions& options,
                               const Gateway& gateway) {
  if (!gateway.has(Role::Vlm)) {
    throw ConfigError("ingest needs a vlm endpoint; there is no offline extraction route");
  }
  if (options.rationale_mode == RationaleMode::Model && !gateway.has(Role::Llm)) {
    throw ConfigError("rationale_mode=model needs an llm endpoint");
  }
  if (options.rationale_mode == RationaleMode::Passthrough) {
    throw ConfigError("rationale_mode must be template or model");
  }

  const auto& pages = manifest.pages;
  std::vector<PageReport> reports(pages.size());
  std::vector<std::vector<Rationale>> per_page(pages.size());

  parallel_for(pages.size(), options.workers, [&](std::size_t i) {
    auto& report = reports[i];
    report.page = pages[i].page;
    try {
      const auto image = PageImage::load(pages[i].page, pages[i].image);
      std::vector<LayoutComponent> components;
      try {
        components = detect_layout(image, options.layout);
      } catch (const LayoutUnavailable& e) {
        report.layout_error = e.what();
        spdlog::warn("{}: layout unavailable, using page only: {}",
                     page_stem(image.page), e.what());
      }
      components = group_components(std::move(components), image.height());
      report.components = components.size();

      auto extraction = extract_page(image, components, gateway, options.policy);
      report.regions_extracted = extraction.regions.size();
      report.region_failures = extraction.failures.size();
      report.fallback_used = extraction.fallback_used;
      for (const auto& region : extraction.regions) {
        auto rationale = rationalize(region, image.page, &gateway, options.rationale_mode);
        if (rationale.text.empty()) continue;
        report.template_fallbacks += options.rationale_mode == RationaleMode::Model &&
                                     rationale.mode == RationaleMode::Template;
        per_page[i].push_back(std::move(rationale));
      }
      report.rationales = per_page[i].size();
      report.ok = true;
    } catch (const std::exception& e) {
      report.ok = false;
      report.error = e.what();
      per_page[i].clear();
      spdlog::error("{}: page failed: {}", page_stem(pages[i].page), e.what());
    }
  });

  IngestResult result;
  result.report.pages = std::move(reports);
  for (auto& rationales : per_page) {
    for (auto& r : rationales) result.rationales.push_back(std::move(r));
  }
  return result;
}

RagStore ingest(const CorpusManifest& manifest, const IngestOptions& options,
                const Gateway& gateway, const Embedder& embedder,
                IngestReport* report) {
  auto result = ingest_rationales(manifest, options, gateway);
  auto store = build_store(result.rationales, embedder);
  result.report.records = store.size();
  if (report) *report = std::move(result.report);
  return store;
}

std::string build_generation_prompt(std::string_view question,
                                    std::span<const std::string> documents) {
  std::string prompt =
      "Use the information from the following documents to answer the question. "
      "Documents:\n";
  for (std::size_t i = 0; i < documents.size(); ++i) {
    if (i > 0) prompt += "\n\n";
    prompt += "[" + std::to_string(i + 1) + "] " + documents[i];
  }
  prompt += "\nQuestion: ";
  prompt += question;
  prompt += "\nAnswer:";
  return prompt;
}

std::string generate(std::string_view question,
                     std::span<const std::string> documents,
                     const Gateway& gateway) {
  ChatRequest request = gateway.request_for(Role::Llm);
  request.messages.push_back({"user", {build_generation_prompt(question, documents)}});
  return gateway.client(Role::Llm).chat(request).text;
}

GroundedAnswer answer(std::string_view query, const RagStore& store, int k,
                      const Gateway& gateway, const Embedder& embedder) {
  GroundedAnswer out;
  out.hits = retrieve_top_k(query, store, k, embedder);
  std::vector<std::string> documents;
  for (const auto& hit : out.hits) documents.push_back(store.find(hit.record_id)->rationale.text);
  try {
    out.text = generate(query, documents, gateway);
  } catch (const std::exception& e) {
    throw AnswerUnavailable(out.hits, std::string("generation failed: ") + e.what());
  }
  return out;
}

}  // namespace gridrag
