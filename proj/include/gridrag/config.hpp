#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "gridrag/embedding.hpp"
#include "gridrag/extraction.hpp"
#include "gridrag/gateway.hpp"
#include "gridrag/layout.hpp"
#include "gridrag/rationale.hpp"

namespace gridrag {

// Where generation-eval context comes from: every rationale of the gold page,
// or top-k retrieval restricted to the gold page.
enum class GenerationContext { GoldPage, Retrieval };
enum class GenerationMetric { Accuracy, L3Score };

struct PipelineConfig {
  std::map<Role, EndpointConfig> endpoints;
  LayoutProvider layout = NoLayout{};
  FallbackPolicy policy = FallbackPolicy::Always;
  RationaleMode rationale_mode = RationaleMode::Template;
  std::string embedder = "hashing";  // "hashing" or "gateway"
  int hashing_dims = kDefaultHashingDims;
  int k = 10;
  int workers = 4;
  std::size_t partition_size = 25;
  GenerationContext generation_context = GenerationContext::GoldPage;
  GenerationMetric generation_metric = GenerationMetric::Accuracy;
  std::optional<std::filesystem::path> judge_prompt_file;
};

// Relative paths inside the document resolve against `base_dir`.
PipelineConfig config_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base_dir = {});
// Throws ConfigError if the file is missing or malformed.
PipelineConfig load_config(const std::filesystem::path& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// GRIDRAG_<ROLE>_BASE_URL, _MODEL and _API_KEY (ROLE = VLM, LLM, JUDGE,
// EMBEDDER) override or create endpoint entries.
void apply_env_overrides(PipelineConfig& config, const EnvLookup& env);

Gateway make_gateway(const PipelineConfig& config);
// Throws ConfigError for "gateway" without an embedder endpoint.
std::unique_ptr<Embedder> make_embedder(const PipelineConfig& config,
                                        const Gateway& gateway);

std::string judge_prompt_template(const PipelineConfig& config);

}  // namespace gridrag
