#include "gridrag/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <iterator>

#include "gridrag/errors.hpp"
#include "gridrag/prompts.hpp"

namespace gridrag {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

EndpointConfig endpoint_from_json(Role role, const nlohmann::json& j) {
  EndpointConfig e = role_defaults(role);
  e.base_url = j.value("base_url", e.base_url);
  e.model = j.value("model", e.model);
  e.api_key = j.value("api_key", e.api_key);
  e.timeout = std::chrono::milliseconds(j.value("timeout_ms", e.timeout.count()));
  e.max_attempts = j.value("max_attempts", e.max_attempts);
  e.initial_backoff = std::chrono::milliseconds(
      j.value("initial_backoff_ms", e.initial_backoff.count()));
  e.max_concurrency = j.value("max_concurrency", e.max_concurrency);
  e.max_image_bytes = j.value("max_image_bytes", e.max_image_bytes);
  e.temperature = j.value("temperature", e.temperature);
  e.max_tokens = j.value("max_tokens", e.max_tokens);
  e.max_batch = j.value("max_batch", e.max_batch);
  return e;
}

LayoutProvider layout_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base) {
  const auto provider = j.value("provider", "none");
  if (provider == "none") return NoLayout{};
  if (provider == "precomputed") {
    return PrecomputedFiles{resolve(base, j.at("dir").get<std::string>())};
  }
  if (provider == "http") {
    return HttpService{j.at("base_url").get<std::string>(),
                       std::chrono::milliseconds(j.value("timeout_ms", 30000))};
  }
  throw ConfigError("unknown layout provider: " + provider);
}

}  // namespace

PipelineConfig config_from_json(const nlohmann::json& j,
                                const std::filesystem::path& base_dir) {
  PipelineConfig config;
  try {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    const auto endpoints = j.value("endpoints", nlohmann::json::object());
    for (const auto& [name, endpoint] : endpoints.items()) {
      const Role role = role_from_string(name);
      config.endpoints[role] = endpoint_from_json(role, endpoint);
    }
    if (j.contains("layout")) config.layout = layout_from_json(j["layout"], base_dir);
    config.policy = policy_from_string(j.value("policy", "always"));
    config.rationale_mode = rationale_mode_from_string(j.value("rationale_mode", "template"));
    config.embedder = j.value("embedder", config.embedder);
    config.hashing_dims = j.value("hashing_dims", config.hashing_dims);
    config.k = j.value("k", config.k);
    config.workers = j.value("workers", config.workers);
    config.partition_size = j.value("partition_size", config.partition_size);
    const auto context = j.value("generation_context", "gold_page");
    if (context == "gold_page") {
      config.generation_context = GenerationContext::GoldPage;
    } else if (context == "retrieval") {
      config.generation_context = GenerationContext::Retrieval;
    } else {
      throw ConfigError("unknown generation_context: " + context);
    }
    const auto metric = j.value("generation_metric", "accuracy");
    if (metric == "accuracy") {
      config.generation_metric = GenerationMetric::Accuracy;
    } else if (metric == "l3score") {
      config.generation_metric = GenerationMetric::L3Score;
    } else {
      throw ConfigError("unknown generation_metric: " + metric);
    }
    if (j.contains("judge_prompt")) {
      config.judge_prompt_file = resolve(base_dir, j["judge_prompt"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (config.embedder != "hashing" && config.embedder != "gateway") {
    throw ConfigError("embedder must be hashing or gateway");
  }
  if (config.k < 1) throw ConfigError("k must be at least 1");
  if (config.workers < 1) throw ConfigError("workers must be at least 1");
  if (config.partition_size < 1) throw ConfigError("partition_size must be at least 1");
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
  return config_from_json(j, path.parent_path());
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

void apply_env_overrides(PipelineConfig& config, const EnvLookup& env) {
  for (auto role : {Role::Vlm, Role::Llm, Role::Judge, Role::Embedder}) {
    std::string prefix = "GRIDRAG_" + std::string(to_string(role)) + "_";
    std::transform(prefix.begin(), prefix.end(), prefix.begin(),
                   [](unsigned char c) { return std::toupper(c); });
    const auto base_url = env(prefix + "BASE_URL");
    const auto model = env(prefix + "MODEL");
    const auto api_key = env(prefix + "API_KEY");
    if (!base_url && !model && !api_key) continue;
    auto [it, inserted] = config.endpoints.try_emplace(role, role_defaults(role));
    if (base_url) it->second.base_url = *base_url;
    if (model) it->second.model = *model;
    if (api_key) it->second.api_key = *api_key;
  }
}

Gateway make_gateway(const PipelineConfig& config) {
  Gateway gateway;
  for (const auto& [role, endpoint] : config.endpoints) {
    gateway.configure(role, endpoint);
  }
  return gateway;
}

std::unique_ptr<Embedder> make_embedder(const PipelineConfig& config,
                                        const Gateway& gateway) {
  if (config.embedder == "gateway") {
    return std::make_unique<GatewayEmbedder>(gateway.client(Role::Embedder));
  }
  return std::make_unique<HashingEmbedder>(config.hashing_dims);
}

std::string judge_prompt_template(const PipelineConfig& config) {
  if (!config.judge_prompt_file) return std::string(judge_prompt());
  std::ifstream in(*config.judge_prompt_file, std::ios::binary);
  if (!in) throw ConfigError("cannot open judge prompt " + config.judge_prompt_file->string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace gridrag
