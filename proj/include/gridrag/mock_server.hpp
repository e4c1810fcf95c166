#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gridrag/gateway.hpp"

namespace httplib {
class Server;
}

namespace gridrag {

// Canned chat reply. An echo fixture answers with the request's text parts
// joined by newlines instead of `text`.
struct Fixture {
  std::string text;
  std::optional<std::vector<TokenLogprob>> logprobs;
  bool echo = false;
};

struct MockOptions {
  std::map<std::string, Fixture> fixtures;
  std::optional<Fixture> default_fixture;
  int embed_dims = 256;
  // The first N chat/embedding requests get 503, to exercise retries.
  int transient_failures = 0;
};

// Loads <key>.txt (plain text) and <key>.json ({"text","logprobs","echo"})
// files; the key "default" becomes the default fixture.
MockOptions load_fixture_dir(const std::filesystem::path& dir);

// Picks the fixture for a request: the longest key whose "FX:<key>" marker
// occurs in a text part or in the raw bytes of an image part.
const Fixture* select_fixture(const MockOptions& options,
                              const ChatRequest& request);

// Deterministic stand-in for a chat-completions + embeddings server.
// GET /health, POST /v1/chat/completions, POST /v1/embeddings. Responses are
// a pure function of the request body.
class MockServer {
 public:
  explicit MockServer(MockOptions options);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds (port 0 picks a free one) and serves on a background thread.
  // Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Binds and serves on the calling thread until stop() is called.
  void run(const std::string& host, int port);
  void stop();

  int port() const { return port_; }
  std::string base_url() const;

 private:
  void install_routes();

  MockOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<int> failures_left_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
};

}  // namespace gridrag
