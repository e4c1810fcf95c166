#include "gridrag/gateway.hpp"

#include <thread>

#include <boost/beast/core/detail/base64.hpp>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "gridrag/errors.hpp"

namespace gridrag {

namespace base64 = boost::beast::detail::base64;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Vlm:
      return "vlm";
    case Role::Llm:
      return "llm";
    case Role::Judge:
      return "judge";
    case Role::Embedder:
      return "embedder";
  }
  return "llm";
}

Role role_from_string(std::string_view name) {
  for (auto role : {Role::Vlm, Role::Llm, Role::Judge, Role::Embedder}) {
    if (to_string(role) == name) return role;
  }
  throw ConfigError("unknown model role: " + std::string(name));
}

EndpointConfig role_defaults(Role role) {
  EndpointConfig config;
  config.temperature = 1.0;
  config.max_tokens = role == Role::Vlm ? 16384 : 8192;
  return config;
}

std::string to_data_uri(const ImagePart& image) {
  const auto& bytes = *image.data;
  std::string encoded(base64::encoded_size(bytes.size()), '\0');
  encoded.resize(base64::encode(encoded.data(), bytes.data(), bytes.size()));
  return "data:" + image.mime + ";base64," + encoded;
}

ImagePart from_data_uri(std::string_view uri) {
  constexpr std::string_view prefix = "data:";
  constexpr std::string_view marker = ";base64,";
  const auto pos = uri.find(marker);
  if (uri.substr(0, prefix.size()) != prefix || pos == std::string_view::npos) {
    throw Error("image url is not a base64 data URI");
  }
  ImagePart image;
  image.mime = std::string(uri.substr(prefix.size(), pos - prefix.size()));
  const auto payload = uri.substr(pos + marker.size());
  Bytes bytes(base64::decoded_size(payload.size()));
  bytes.resize(base64::decode(bytes.data(), payload.data(), payload.size()).first);
  image.data = std::make_shared<const Bytes>(std::move(bytes));
  return image;
}

nlohmann::json chat_request_to_json(const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& message : request.messages) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& part : message.parts) {
      if (const auto* text = std::get_if<std::string>(&part)) {
        content.push_back({{"type", "text"}, {"text", *text}});
      } else {
        content.push_back(
            {{"type", "image_url"},
             {"image_url",
              {{"url", to_data_uri(std::get<ImagePart>(part))}}}});
      }
    }
    messages.push_back({{"role", message.role}, {"content", content}});
  }
  nlohmann::json j = {{"model", request.model},
                      {"messages", messages},
                      {"temperature", request.temperature},
                      {"max_tokens", request.max_tokens},
                      {"stream", false}};
  if (request.want_logprobs) {
    j["logprobs"] = true;
    j["top_logprobs"] = request.top_logprobs;
  }
  return j;
}

ChatRequest chat_request_from_json(const nlohmann::json& j) {
  ChatRequest request;
  request.model = j.value("model", "");
  request.temperature = j.value("temperature", 1.0);
  request.max_tokens = j.value("max_tokens", 8192);
  request.want_logprobs = j.value("logprobs", false);
  request.top_logprobs = j.value("top_logprobs", 0);
  for (const auto& m : j.at("messages")) {
    ChatMessage message;
    message.role = m.at("role").get<std::string>();
    const auto& content = m.at("content");
    if (content.is_string()) {
      message.parts.emplace_back(content.get<std::string>());
    } else {
      for (const auto& part : content) {
        const auto type = part.at("type").get<std::string>();
        if (type == "text") {
          message.parts.emplace_back(part.at("text").get<std::string>());
        } else if (type == "image_url") {
          message.parts.emplace_back(from_data_uri(
              part.at("image_url").at("url").get<std::string>()));
        }
      }
    }
    request.messages.push_back(std::move(message));
  }
  return request;
}

void to_json(nlohmann::json& j, const TokenLogprob& token) {
  nlohmann::json alternatives = nlohmann::json::array();
  for (const auto& alt : token.top_alternatives) {
    alternatives.push_back({{"token", alt.token}, {"logprob", alt.logprob}});
  }
  j = {{"token", token.token},
       {"logprob", token.logprob},
       {"top_logprobs", alternatives}};
}

void from_json(const nlohmann::json& j, TokenLogprob& token) {
  j.at("token").get_to(token.token);
  j.at("logprob").get_to(token.logprob);
  token.top_alternatives.clear();
  for (const auto& alt : j.value("top_logprobs", nlohmann::json::array())) {
    token.top_alternatives.push_back(
        {alt.at("token").get<std::string>(), alt.at("logprob").get<double>()});
  }
}

nlohmann::json chat_response_to_json(const ChatResponse& response,
                                     std::string_view id) {
  nlohmann::json choice = {
      {"index", 0},
      {"message", {{"role", "assistant"}, {"content", response.text}}},
      {"finish_reason", "stop"}};
  if (response.token_logprobs) {
    choice["logprobs"] = {{"content", *response.token_logprobs}};
  }
  return {{"id", id},
          {"object", "chat.completion"},
          {"choices", nlohmann::json::array({choice})}};
}

ChatResponse chat_response_from_json(const nlohmann::json& j) {
  const auto& choice = j.at("choices").at(0);
  const auto& content = choice.at("message").at("content");
  ChatResponse response;
  if (content.is_string()) {
    response.text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", "") == "text") response.text += part.at("text").get<std::string>();
    }
  } else if (!content.is_null()) {
    throw GatewayError(GatewayError::Kind::MalformedResponse, j.value("id", ""),
                       200, "message content is not text");
  }
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("content") &&
      choice["logprobs"]["content"].is_array()) {
    response.token_logprobs =
        choice["logprobs"]["content"].get<std::vector<TokenLogprob>>();
  }
  return response;
}

ModelClient::ModelClient(EndpointConfig config)
    : config_(std::move(config)),
      slots_(std::make_shared<std::counting_semaphore<>>(
          std::max(1, config_.max_concurrency))),
      sequence_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (config_.base_url.empty()) throw ConfigError("endpoint has no base_url");
}

namespace {

GatewayError transport_error(httplib::Error error, const std::string& id) {
  using Kind = GatewayError::Kind;
  const auto kind = (error == httplib::Error::ConnectionTimeout ||
                     error == httplib::Error::Read ||
                     error == httplib::Error::Write)
                        ? Kind::Timeout
                        : Kind::Transport;
  return GatewayError(kind, id, 0,
                      "request " + id + " failed: " + httplib::to_string(error));
}

struct SlotGuard {
  explicit SlotGuard(std::counting_semaphore<>& s) : slots(s) { slots.acquire(); }
  ~SlotGuard() { slots.release(); }
  std::counting_semaphore<>& slots;
};

}  // namespace

nlohmann::json ModelClient::post(std::string_view path,
                                 const nlohmann::json& body) const {
  const std::string id =
      (config_.model.empty() ? std::string("request") : config_.model) + "-" +
      std::to_string(sequence_->fetch_add(1) + 1);
  const std::string payload = body.dump();
  httplib::Headers headers = {{"X-Request-Id", id}};
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
      config_.timeout - seconds);

  auto backoff = config_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    std::optional<GatewayError> failure;
    {
      SlotGuard guard(*slots_);
      httplib::Client client(config_.base_url);
      client.set_connection_timeout(seconds.count(), micros.count());
      client.set_read_timeout(seconds.count(), micros.count());
      client.set_write_timeout(seconds.count(), micros.count());
      auto result = client.Post(std::string(path), headers, payload, "application/json");
      if (!result) {
        failure = transport_error(result.error(), id);
      } else if (result->status != 200) {
        failure = GatewayError(GatewayError::Kind::BadStatus, id, result->status,
                               "request " + id + " returned status " +
                                   std::to_string(result->status));
      } else {
        auto parsed = nlohmann::json::parse(result->body, nullptr, false);
        if (parsed.is_discarded()) {
          throw GatewayError(GatewayError::Kind::MalformedResponse, id, 200,
                             "request " + id + " returned invalid JSON");
        }
        return parsed;
      }
    }
    if (!failure->retriable() || attempt >= config_.max_attempts) throw *failure;
    spdlog::warn("{}; retrying in {} ms (attempt {}/{})", failure->what(),
                 backoff.count(), attempt + 1, config_.max_attempts);
    std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

ChatResponse ModelClient::chat(const ChatRequest& request) const {
  ChatRequest filled = request;
  if (filled.model.empty()) filled.model = config_.model;
  for (const auto& message : filled.messages) {
    for (const auto& part : message.parts) {
      const auto* image = std::get_if<ImagePart>(&part);
      if (image && image->data->size() > config_.max_image_bytes) {
        throw GatewayError(GatewayError::Kind::BadStatus, "", 413,
                           "image of " + std::to_string(image->data->size()) +
                               " bytes exceeds the configured cap");
      }
    }
  }
  const auto j = post("/v1/chat/completions", chat_request_to_json(filled));
  try {
    auto response = chat_response_from_json(j);
    if (!filled.want_logprobs) response.token_logprobs.reset();
    return response;
  } catch (const nlohmann::json::exception& e) {
    throw GatewayError(GatewayError::Kind::MalformedResponse, j.value("id", ""),
                       200, std::string("malformed chat response: ") + e.what());
  }
}

EmbedResponse ModelClient::embed(const EmbedRequest& request) const {
  EmbedResponse out;
  out.vectors.reserve(request.texts.size());
  const std::string model = request.model.empty() ? config_.model : request.model;
  const std::size_t batch = std::max<std::size_t>(1, config_.max_batch);
  for (std::size_t begin = 0; begin < request.texts.size(); begin += batch) {
    const std::size_t end = std::min(request.texts.size(), begin + batch);
    nlohmann::json body = {
        {"model", model},
        {"input", std::vector<std::string>(request.texts.begin() + begin,
                                           request.texts.begin() + end)}};
    const auto j = post("/v1/embeddings", body);
    try {
      const auto& data = j.at("data");
      if (data.size() != end - begin) {
        throw GatewayError(GatewayError::Kind::MalformedResponse, j.value("id", ""),
                           200, "embedding count does not match input count");
      }
      std::vector<std::vector<double>> vectors(data.size());
      for (const auto& item : data) {
        const auto index = item.at("index").get<std::size_t>();
        if (index >= vectors.size()) {
          throw GatewayError(GatewayError::Kind::MalformedResponse,
                             j.value("id", ""), 200, "embedding index out of range");
        }
        vectors[index] = item.at("embedding").get<std::vector<double>>();
      }
      for (auto& v : vectors) {
        if (v.empty() || (!out.vectors.empty() && v.size() != out.vectors.front().size())) {
          throw GatewayError(GatewayError::Kind::MalformedResponse,
                             j.value("id", ""), 200, "inconsistent embedding dimension");
        }
        out.vectors.push_back(std::move(v));
      }
    } catch (const nlohmann::json::exception& e) {
      throw GatewayError(GatewayError::Kind::MalformedResponse, j.value("id", ""),
                         200, std::string("malformed embedding response: ") + e.what());
    }
  }
  return out;
}

void Gateway::configure(Role role, EndpointConfig config) {
  clients_[role] = std::make_shared<const ModelClient>(std::move(config));
}

bool Gateway::has(Role role) const { return clients_.contains(role); }

const ModelClient& Gateway::client(Role role) const {
  auto it = clients_.find(role);
  if (it == clients_.end()) {
    throw ConfigError("no endpoint configured for role " +
                      std::string(to_string(role)));
  }
  return *it->second;
}

ChatRequest Gateway::request_for(Role role) const {
  const auto& config = client(role).config();
  ChatRequest request;
  request.model = config.model;
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  return request;
}

}  // namespace gridrag
