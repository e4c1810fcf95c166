#include "gridrag/mock_server.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include <spdlog/spdlog.h>

#include "gridrag/embedding.hpp"
#include "gridrag/errors.hpp"

// After Eigen: <resolv.h> defines a _res macro that breaks Eigen headers.
#include <httplib.h>

namespace gridrag {

MockOptions load_fixture_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("fixture directory not found: " + dir.string());
  }
  MockOptions options;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& path : files) {
    const auto ext = path.extension().string();
    if (ext != ".txt" && ext != ".json") continue;
    std::ifstream in(path, std::ios::binary);
    std::string content(std::istreambuf_iterator<char>(in), {});
    Fixture fixture;
    if (ext == ".txt") {
      fixture.text = std::move(content);
    } else {
      auto j = nlohmann::json::parse(content, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        throw ConfigError("invalid fixture file " + path.string());
      }
      fixture.text = j.value("text", "");
      fixture.echo = j.value("echo", false);
      if (j.contains("logprobs")) {
        fixture.logprobs = j["logprobs"].get<std::vector<TokenLogprob>>();
      }
    }
    const auto key = path.stem().string();
    if (options.fixtures.contains(key) ||
        (key == "default" && options.default_fixture)) {
      throw ConfigError("duplicate fixture key " + key);
    }
    if (key == "default") {
      options.default_fixture = std::move(fixture);
    } else {
      options.fixtures.emplace(key, std::move(fixture));
    }
  }
  return options;
}

const Fixture* select_fixture(const MockOptions& options,
                              const ChatRequest& request) {
  const Fixture* best = nullptr;
  std::size_t best_len = 0;
  auto contains = [](std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
  };
  for (const auto& [key, fixture] : options.fixtures) {
    const std::string marker = "FX:" + key;
    bool hit = false;
    for (const auto& message : request.messages) {
      for (const auto& part : message.parts) {
        if (const auto* text = std::get_if<std::string>(&part)) {
          hit = hit || contains(*text, marker);
        } else {
          const auto& bytes = *std::get<ImagePart>(part).data;
          hit = hit ||
                contains(std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                          bytes.size()),
                         marker);
        }
      }
    }
    if (hit && key.size() >= best_len) {
      best = &fixture;
      best_len = key.size();
    }
  }
  if (best) return best;
  return options.default_fixture ? &*options.default_fixture : nullptr;
}

namespace {

std::string echo_text(const ChatRequest& request) {
  std::string out;
  for (const auto& message : request.messages) {
    for (const auto& part : message.parts) {
      if (const auto* text = std::get_if<std::string>(&part)) {
        if (!out.empty()) out += "\n";
        out += *text;
      }
    }
  }
  return out;
}

std::string response_id(const std::string& body) {
  char id[32];
  std::snprintf(id, sizeof id, "mock-%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  return id;
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json({{"error", {{"message", message}}}}).dump(),
                  "application/json");
}

}  // namespace

MockServer::MockServer(MockOptions options)
    : options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()),
      failures_left_(options_.transient_failures) {
  install_routes();
}

MockServer::~MockServer() { stop(); }

void MockServer::install_routes() {
  server_->Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });

  auto transient = [this](httplib::Response& res) {
    if (failures_left_.fetch_sub(1) > 0) {
      send_error(res, 503, "transient failure");
      return true;
    }
    return false;
  };

  server_->Post("/v1/chat/completions", [this, transient](const httplib::Request& req,
                                                         httplib::Response& res) {
    if (transient(res)) return;
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded()) return send_error(res, 400, "invalid JSON");
    ChatRequest request;
    try {
      request = chat_request_from_json(body);
    } catch (const std::exception& e) {
      return send_error(res, 400, e.what());
    }
    const Fixture* fixture = select_fixture(options_, request);
    if (!fixture) return send_error(res, 404, "no fixture matches the request");
    ChatResponse response;
    response.text = fixture->echo ? echo_text(request) : fixture->text;
    if (request.want_logprobs) response.token_logprobs = fixture->logprobs;
    res.set_content(chat_response_to_json(response, response_id(req.body)).dump(),
                    "application/json");
  });

  server_->Post("/v1/embeddings", [this, transient](const httplib::Request& req,
                                                   httplib::Response& res) {
    if (transient(res)) return;
    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("input")) {
      return send_error(res, 400, "invalid embedding request");
    }
    std::vector<std::string> texts;
    if (body["input"].is_string()) {
      texts.push_back(body["input"].get<std::string>());
    } else {
      texts = body["input"].get<std::vector<std::string>>();
    }
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = 0; i < texts.size(); ++i) {
      const auto v = hashing_embed(texts[i], options_.embed_dims);
      data.push_back({{"object", "embedding"},
                      {"index", i},
                      {"embedding", std::vector<double>(v.begin(), v.end())}});
    }
    res.set_content(nlohmann::json({{"id", response_id(req.body)},
                                    {"object", "list"},
                                    {"model", body.value("model", "")},
                                    {"data", data}})
                        .dump(),
                    "application/json");
  });
}

int MockServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw Error("mock server could not bind " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockServer::run(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->bind_to_port(host, port)) {
    throw Error("mock server could not bind " + host + ":" + std::to_string(port));
  }
  server_->listen_after_bind();
}

void MockServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockServer::base_url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace gridrag
