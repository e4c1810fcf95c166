#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gridrag/core.hpp"

namespace gridrag {

// The four model roles a pipeline talks to.
enum class Role { Vlm, Llm, Judge, Embedder };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

struct EndpointConfig {
  std::string base_url;  // scheme://host:port, requests go to /v1/...
  std::string model;
  std::string api_key;
  std::chrono::milliseconds timeout{120000};
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};  // doubles per retry
  int max_concurrency = 4;
  std::size_t max_image_bytes = 32u << 20;
  double temperature = 1.0;
  int max_tokens = 8192;
  std::size_t max_batch = 32;  // embedding texts per HTTP request
};

// Sampling defaults per role: temperature 1.0 everywhere, 16384 max tokens
// for the VLM and 8192 for the text models.
EndpointConfig role_defaults(Role role);

struct ImagePart {
  std::shared_ptr<const Bytes> data;
  std::string mime = "image/png";
};

using MessagePart = std::variant<std::string, ImagePart>;

struct ChatMessage {
  std::string role;
  std::vector<MessagePart> parts;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_tokens = 8192;
  bool want_logprobs = false;
  int top_logprobs = 0;
};

struct TokenAlternative {
  std::string token;
  double logprob = 0;

  bool operator==(const TokenAlternative&) const = default;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0;
  std::vector<TokenAlternative> top_alternatives;

  bool operator==(const TokenLogprob&) const = default;
};

struct ChatResponse {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
};

struct EmbedRequest {
  std::string model;
  std::vector<std::string> texts;
};

struct EmbedResponse {
  std::vector<std::vector<double>> vectors;
};

// Chat-completions wire format.
nlohmann::json chat_request_to_json(const ChatRequest& request);
ChatRequest chat_request_from_json(const nlohmann::json& j);
nlohmann::json chat_response_to_json(const ChatResponse& response,
                                     std::string_view id);
ChatResponse chat_response_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const TokenLogprob& token);
void from_json(const nlohmann::json& j, TokenLogprob& token);

std::string to_data_uri(const ImagePart& image);
// Throws Error on anything that is not a base64 data URI.
ImagePart from_data_uri(std::string_view uri);

// Client for one endpoint. Copies share the concurrency limit; calls are
// safe from multiple threads.
class ModelClient {
 public:
  explicit ModelClient(EndpointConfig config);

  // Non-streaming completion. Retries timeouts and 5xx with exponential
  // backoff; throws GatewayError carrying the request id otherwise.
  ChatResponse chat(const ChatRequest& request) const;
  // Splits into batches of max_batch; result order matches request order.
  EmbedResponse embed(const EmbedRequest& request) const;

  const EndpointConfig& config() const { return config_; }

 private:
  nlohmann::json post(std::string_view path, const nlohmann::json& body) const;

  EndpointConfig config_;
  std::shared_ptr<std::counting_semaphore<>> slots_;
  std::shared_ptr<std::atomic<std::uint64_t>> sequence_;
};

// Role-indexed set of endpoints.
class Gateway {
 public:
  void configure(Role role, EndpointConfig config);
  bool has(Role role) const;
  // Throws ConfigError when the role is not configured.
  const ModelClient& client(Role role) const;
  // A request pre-filled with the role's model and sampling settings.
  ChatRequest request_for(Role role) const;

 private:
  std::map<Role, std::shared_ptr<const ModelClient>> clients_;
};

}  // namespace gridrag
