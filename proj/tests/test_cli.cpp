#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "corpus.hpp"
#include "gridrag/store.hpp"
#include "process.hpp"

#include <httplib.h>

using namespace gridrag;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// A five-page corpus, a mock server serving its fixtures and a config file
// pointing at it.
struct CliFixture {
  testing::TempDir dir;
  testing::FixtureCorpus corpus;
  MockServer server;
  std::string config;

  CliFixture()
      : corpus(testing::make_fixture_corpus(dir.path(), 5)), server(corpus.mock) {
    server.start();
    config = (dir / "config.json").string();
    testing::write_file(config, testing::mock_config(server.base_url(), corpus).dump(2));
  }

  std::string store() const { return (dir / "store.jsonl").string(); }

  Run ingest(std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"ingest", "--config", config, "--manifest",
                                     corpus.manifest.string(), "--store", store()};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }
};

}  // namespace

TEST_CASE("ingest, query and eval through the command line") {
  CliFixture fx;
  const auto ingest = fx.ingest({"--json", "--report", (fx.dir / "report.json").string()});
  REQUIRE(ingest.code == cli::kOk);
  const auto report = nlohmann::json::parse(ingest.out);
  CHECK(report["pages_ok"] == 5);
  CHECK(report["records"] == 15);
  CHECK(report["stores"][0] == fx.store());
  CHECK(nlohmann::json::parse(testing::read_file(fx.dir / "report.json")) == report);
  CHECK(load_store(fx.store()).size() == 15);

  const auto query = run_cli({"query", "--config", fx.config, "--store", fx.store(), "--json",
                              "--k", "2", "Non-current assets 2019 $ million"});
  REQUIRE(query.code == cli::kOk);
  const auto answer = nlohmann::json::parse(query.out);
  CHECK(answer["hits"].size() == 2);
  CHECK(answer["hits"][0]["record_id"] == "report_p0_c001");
  CHECK(answer["answer"].get<std::string>().find("196.9") != std::string::npos);

  const auto retrieve = run_cli({"query", "--store", fx.store(), "--retrieve-only", "--json",
                                 "segment 3 revenue FY2024"});
  REQUIRE(retrieve.code == cli::kOk);
  const auto hits = nlohmann::json::parse(retrieve.out)["hits"];
  CHECK(hits.size() == 10);
  CHECK(hits[0]["doc_id"] == "report");
  CHECK(hits[0]["page_index"] == 3);

  const auto gen = run_cli({"eval", "--config", fx.config, "--mode", "generation", "--qa",
                            fx.corpus.qa.string(), "--store", fx.store()});
  REQUIRE(gen.code == cli::kOk);
  CHECK(nlohmann::json::parse(gen.out)["accuracy"] == 1.0);

  const auto ret = run_cli({"eval", "--mode", "retrieval", "--qa", fx.corpus.qa.string(),
                            "--store", fx.store()});
  REQUIRE(ret.code == cli::kOk);
  const auto mrr = nlohmann::json::parse(ret.out);
  CHECK(mrr["metric"] == "mrr@10");
  CHECK(mrr["n"] == 5);
  CHECK(mrr["value"] > 0.0);
}

TEST_CASE("partitioned ingest writes part files that eval reads by base name") {
  CliFixture fx;
  const auto ingest = fx.ingest({"--partition-size", "2", "--json"});
  REQUIRE(ingest.code == cli::kOk);
  CHECK(nlohmann::json::parse(ingest.out)["stores"].size() == 3);
  CHECK_FALSE(std::filesystem::exists(fx.store()));
  for (int i = 0; i < 3; ++i) {
    CHECK(std::filesystem::exists(fx.dir / ("store.part" + std::to_string(i) + ".jsonl")));
  }
  const auto gen = run_cli({"eval", "--config", fx.config, "--mode", "generation", "--qa",
                            fx.corpus.qa.string(), "--store", fx.store()});
  REQUIRE(gen.code == cli::kOk);
  const auto j = nlohmann::json::parse(gen.out);
  CHECK(j["n"] == 5);
  CHECK(j["skipped"].empty());
}

TEST_CASE("dry run prints the plan and writes nothing") {
  CliFixture fx;
  const auto plan = fx.ingest({"--dry-run", "--json", "--policy", "on_failure_only"});
  REQUIRE(plan.code == cli::kOk);
  const auto j = nlohmann::json::parse(plan.out);
  CHECK(j["pages"] == 5);
  CHECK(j["policy"] == "on_failure_only");
  CHECK(j["layout"]["provider"] == "precomputed");
  CHECK_FALSE(std::filesystem::exists(fx.store()));
}

TEST_CASE("usage and configuration errors exit 2") {
  CliFixture fx;
  testing::write_file(fx.dir / "bad_manifest.json", "{\"pages\": 3}");
  CHECK(run_cli({"ingest", "--config", fx.config, "--manifest",
                 (fx.dir / "bad_manifest.json").string(), "--store", fx.store()})
            .code == cli::kUsage);
  CHECK(run_cli({"query", "--store", (fx.dir / "missing.jsonl").string(), "q"}).code ==
        cli::kUsage);
  CHECK(run_cli({"eval", "--mode", "magic", "--qa", fx.corpus.qa.string(), "--store",
                 fx.store()})
            .code == cli::kUsage);
  CHECK(run_cli({"frobnicate"}).code == cli::kUsage);
  CHECK(run_cli({}).code == cli::kUsage);
  CHECK(run_cli({"ingest", "--manifest", fx.corpus.manifest.string()}).code == cli::kUsage);
  CHECK(run_cli({"query", "--store", fx.store(), "--k", "0", "q"}).code == cli::kUsage);
  // No VLM endpoint configured.
  CHECK(run_cli({"ingest", "--manifest", fx.corpus.manifest.string(), "--store", fx.store()})
            .code == cli::kUsage);
  testing::write_file(fx.dir / "corrupt.jsonl", "{\"schema\":1,\"dims\":4,\"embedder\":\"x\"}\n{");
  const auto corrupt = run_cli({"query", "--store", (fx.dir / "corrupt.jsonl").string(),
                                "--retrieve-only", "q"});
  CHECK(corrupt.code == cli::kUsage);
  CHECK(corrupt.err.find("line 2") != std::string::npos);

  const auto help = run_cli({"--help"});
  CHECK(help.code == cli::kOk);
  CHECK(help.out.find("ingest") != std::string::npos);
}

TEST_CASE("a failing generation step exits 1 and still prints the hits") {
  CliFixture fx;
  REQUIRE(fx.ingest().code == cli::kOk);
  auto config = testing::mock_config(fx.server.base_url(), fx.corpus);
  config["endpoints"]["llm"] = {{"base_url", "http://127.0.0.1:9"}, {"max_attempts", 1}};
  testing::write_file(fx.dir / "dead.json", config.dump());
  const auto r = run_cli({"query", "--config", (fx.dir / "dead.json").string(), "--store",
                          fx.store(), "--json", "segment 2"});
  CHECK(r.code == cli::kDegraded);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["answer"].is_null());
  CHECK(j["hits"].size() == 10);

  const auto e = run_cli({"eval", "--config", (fx.dir / "dead.json").string(), "--mode",
                          "generation", "--qa", fx.corpus.qa.string(), "--store", fx.store()});
  CHECK(e.code == cli::kDegraded);
  CHECK(nlohmann::json::parse(e.out)["accuracy"] == 0.0);
}

TEST_CASE("environment variables override the config file, flags override both") {
  CliFixture fx;
  REQUIRE(fx.ingest().code == cli::kOk);
  auto config = testing::mock_config(fx.server.base_url(), fx.corpus);
  config["endpoints"]["llm"]["base_url"] = "http://127.0.0.1:9";
  config["endpoints"]["llm"]["max_attempts"] = 1;
  config["k"] = 1;
  testing::write_file(fx.dir / "env.json", config.dump());
  ::setenv("GRIDRAG_LLM_BASE_URL", fx.server.base_url().c_str(), 1);
  const auto r = run_cli({"query", "--config", (fx.dir / "env.json").string(), "--store",
                          fx.store(), "--json", "--k", "3", "segment 2"});
  ::unsetenv("GRIDRAG_LLM_BASE_URL");
  REQUIRE(r.code == cli::kOk);
  CHECK(nlohmann::json::parse(r.out)["hits"].size() == 3);
}

TEST_CASE("mock-serve runs as a process, serves fixtures and stops on SIGTERM") {
  testing::TempDir dir;
  const auto corpus = testing::make_fixture_corpus(dir.path(), 2);
  testing::write_fixture_dir(dir / "fixtures", corpus.mock);
  testing::ChildProcess child({GRIDRAG_CLI_PATH, "mock-serve", "--fixtures",
                               (dir / "fixtures").string(), "--port", "0", "--json"});
  REQUIRE(child.started());
  const auto line = child.read_line();
  REQUIRE_FALSE(line.empty());
  const auto address = nlohmann::json::parse(line);
  const std::string base_url = address["base_url"];
  CHECK(address["port"].get<int>() > 0);
  CHECK(base_url.rfind("http://127.0.0.1:", 0) == 0);

  httplib::Client raw(base_url);
  const auto health = raw.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);

  // Ingest against the separate process.
  testing::write_file(dir / "config.json", testing::mock_config(base_url, corpus).dump());
  const auto ingest = run_cli({"ingest", "--config", (dir / "config.json").string(), "--manifest",
                               corpus.manifest.string(), "--store",
                               (dir / "store.jsonl").string()});
  CHECK(ingest.code == cli::kOk);
  CHECK(load_store(dir / "store.jsonl").find("report_p1_c000")->rationale.text ==
        "Segment 1 results");

  child.signal(SIGTERM);
  CHECK(child.wait() == 0);
}
