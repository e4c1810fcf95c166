#include "cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <pthread.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "gridrag/config.hpp"
#include "gridrag/errors.hpp"
#include "gridrag/eval.hpp"
#include "gridrag/mock_server.hpp"
#include "gridrag/rag.hpp"

namespace gridrag::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string manifest;
  std::vector<std::string> stores;
  std::optional<int> k;
  std::string mode;
  std::string policy;
  std::string embedder;
  std::optional<int> workers;
  std::optional<std::size_t> partition_size;
  std::string context;
  std::string metric;
  bool json = false;
  bool dry_run = false;
  bool retrieve_only = false;
  bool verbose = false;
  std::string qa;
  std::string report;
  std::string question;
  std::string fixtures;
  std::string host = "127.0.0.1";
  int port = 8089;
  int embed_dims = kDefaultHashingDims;
  int transient_failures = 0;
};

void setup_logging(bool verbose) {
  auto logger = spdlog::get("gridrag");
  if (!logger) {
    logger = spdlog::stderr_logger_mt("gridrag");
    spdlog::set_default_logger(logger);
  }
  logger->set_level(verbose ? spdlog::level::info : spdlog::level::warn);
}

// File, then environment, then flags.
PipelineConfig resolve_config(const Options& o) {
  PipelineConfig config = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  apply_env_overrides(config, process_env());
  if (o.k) config.k = *o.k;
  if (o.workers) config.workers = *o.workers;
  if (o.partition_size) config.partition_size = *o.partition_size;
  if (!o.policy.empty()) config.policy = policy_from_string(o.policy);
  if (!o.embedder.empty()) config.embedder = o.embedder;
  if (!o.context.empty()) {
    config.generation_context =
        o.context == "retrieval" ? GenerationContext::Retrieval : GenerationContext::GoldPage;
  }
  if (!o.metric.empty()) {
    config.generation_metric =
        o.metric == "l3score" ? GenerationMetric::L3Score : GenerationMetric::Accuracy;
  }
  if (config.k < 1) throw ConfigError("k must be at least 1");
  if (config.workers < 1) throw ConfigError("workers must be at least 1");
  if (config.partition_size < 1) throw ConfigError("partition size must be at least 1");
  return config;
}

fs::path part_path(const fs::path& store, std::size_t index) {
  return store.parent_path() /
         (store.stem().string() + ".part" + std::to_string(index) + store.extension().string());
}

// A path that does not exist but has <stem>.part0<ext> next to it stands for
// all of its partitions.
std::vector<RagStore> load_stores(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("--store is required");
  std::vector<RagStore> stores;
  for (const auto& p : paths) {
    if (fs::exists(p) || !fs::exists(part_path(p, 0))) {
      try {
        stores.push_back(load_store(p));
      } catch (const LoadError& e) {
        throw ConfigError("cannot load store " + p + ": " + e.what());
      }
      continue;
    }
    for (std::size_t i = 0; fs::exists(part_path(p, i)); ++i) {
      stores.push_back(load_store(part_path(p, i)));
    }
  }
  return stores;
}

// The hashing embedder takes its width from the store so queries always match.
std::unique_ptr<Embedder> query_embedder(const PipelineConfig& config,
                                         const Gateway& gateway, const RagStore& store) {
  if (config.embedder == "hashing") return std::make_unique<HashingEmbedder>(store.dims());
  return make_embedder(config, gateway);
}

nlohmann::json layout_json(const LayoutProvider& layout) {
  return std::visit(
      [](const auto& p) -> nlohmann::json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, PrecomputedFiles>) {
          return {{"provider", "precomputed"}, {"dir", p.dir.string()}};
        } else if constexpr (std::is_same_v<T, HttpService>) {
          return {{"provider", "http"}, {"base_url", p.base_url}};
        } else {
          return {{"provider", "none"}};
        }
      },
      layout);
}

int cmd_ingest(const Options& o, std::ostream& out) {
  PipelineConfig config = resolve_config(o);
  if (!o.mode.empty()) config.rationale_mode = rationale_mode_from_string(o.mode);
  if (o.manifest.empty()) throw ConfigError("--manifest is required");
  if (o.stores.size() != 1) throw ConfigError("ingest takes exactly one --store");
  const auto manifest = load_manifest(o.manifest);
  const fs::path store_path = o.stores.front();
  const auto groups = partition_pages(manifest.pages, config.partition_size);

  std::vector<fs::path> outputs;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    outputs.push_back(groups.size() > 1 ? part_path(store_path, i) : store_path);
  }

  if (o.dry_run) {
    nlohmann::json plan = {{"pages", manifest.pages.size()},
                           {"layout", layout_json(config.layout)},
                           {"policy", to_string(config.policy)},
                           {"rationale_mode", to_string(config.rationale_mode)},
                           {"embedder", config.embedder},
                           {"workers", config.workers},
                           {"partitions", nlohmann::json::array()}};
    for (std::size_t i = 0; i < groups.size(); ++i) {
      plan["partitions"].push_back({{"store", outputs[i].string()}, {"pages", groups[i].size()}});
    }
    nlohmann::json endpoints = nlohmann::json::object();
    for (const auto& [role, e] : config.endpoints) {
      endpoints[std::string(to_string(role))] = {{"base_url", e.base_url}, {"model", e.model}};
    }
    plan["endpoints"] = endpoints;
    if (o.json) {
      out << plan.dump() << "\n";
    } else {
      out << "would ingest " << manifest.pages.size() << " pages into " << groups.size()
          << " store(s):\n";
      for (std::size_t i = 0; i < groups.size(); ++i) {
        out << "  " << outputs[i].string() << " (" << groups[i].size() << " pages)\n";
      }
    }
    return kOk;
  }

  const Gateway gateway = make_gateway(config);
  const auto embedder = make_embedder(config, gateway);
  IngestOptions options{config.layout, config.policy, config.rationale_mode, config.workers};

  IngestReport total;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    IngestReport report;
    const auto store = ingest(CorpusManifest{groups[i]}, options, gateway, *embedder, &report);
    if (outputs[i].has_parent_path()) fs::create_directories(outputs[i].parent_path());
    persist(store, outputs[i]);
    total.records += report.records;
    for (auto& page : report.pages) total.pages.push_back(std::move(page));
  }

  auto report_json = total.to_json();
  report_json["stores"] = nlohmann::json::array();
  for (const auto& p : outputs) report_json["stores"].push_back(p.string());
  if (!o.report.empty()) {
    std::ofstream(o.report) << report_json.dump(2) << "\n";
  }
  if (o.json) {
    out << report_json.dump() << "\n";
  } else {
    out << "pages ok " << total.pages_ok() << ", failed " << total.pages_failed()
        << ", regions " << report_json["regions_extracted"] << ", fallbacks "
        << report_json["fallbacks_used"] << ", records " << total.records << "\n";
    for (const auto& page : total.pages) {
      if (!page.ok) out << "  failed " << page_stem(page.page) << ": " << page.error << "\n";
    }
  }
  return total.records > 0 ? kOk : kDegraded;
}

nlohmann::json hits_json(const std::vector<RetrievalHit>& hits, const RagStore& store) {
  auto list = nlohmann::json::array();
  for (const auto& hit : hits) {
    const auto& r = store.find(hit.record_id)->rationale;
    list.push_back({{"rank", hit.rank},
                    {"score", hit.score},
                    {"record_id", hit.record_id},
                    {"doc_id", r.page.doc_id},
                    {"page_index", r.page.page_index},
                    {"text", r.text}});
  }
  return list;
}

void print_hits(const std::vector<RetrievalHit>& hits, std::ostream& out) {
  for (const auto& hit : hits) {
    out << "  [" << hit.rank << "] " << hit.record_id << " (" << hit.score << ")\n";
  }
}

int cmd_query(const Options& o, std::ostream& out, std::ostream& err) {
  const PipelineConfig config = resolve_config(o);
  if (o.stores.size() != 1) throw ConfigError("query takes exactly one --store");
  const auto store = load_stores(o.stores).front();
  const Gateway gateway = make_gateway(config);
  const auto embedder = query_embedder(config, gateway, store);

  if (o.retrieve_only) {
    const auto hits = retrieve_top_k(o.question, store, config.k, *embedder);
    if (o.json) {
      out << nlohmann::json{{"hits", hits_json(hits, store)}}.dump() << "\n";
    } else {
      print_hits(hits, out);
    }
    return kOk;
  }

  if (!gateway.has(Role::Llm)) throw ConfigError("query needs an llm endpoint (or --retrieve-only)");
  try {
    const auto result = answer(o.question, store, config.k, gateway, *embedder);
    if (o.json) {
      out << nlohmann::json{{"answer", result.text}, {"hits", hits_json(result.hits, store)}}.dump()
          << "\n";
    } else {
      out << result.text << "\n";
      print_hits(result.hits, out);
    }
    return kOk;
  } catch (const AnswerUnavailable& e) {
    if (o.json) {
      out << nlohmann::json{{"answer", nullptr},
                            {"error", e.what()},
                            {"hits", hits_json(e.hits(), store)}}
                 .dump()
          << "\n";
    } else {
      err << e.what() << "\n";
      print_hits(e.hits(), out);
    }
    return kDegraded;
  }
}

int cmd_eval(const Options& o, std::ostream& out) {
  const PipelineConfig config = resolve_config(o);
  if (o.qa.empty()) throw ConfigError("--qa is required");
  const auto items = load_qa_file(o.qa);
  const auto stores = load_stores(o.stores);
  const Gateway gateway = make_gateway(config);
  const auto embedder = query_embedder(config, gateway, stores.front());

  EvalReport report;
  if (o.mode == "retrieval") {
    report = run_retrieval_eval(stores, items, *embedder, config.k, config.workers);
  } else {
    if (!gateway.has(Role::Llm)) throw ConfigError("generation eval needs an llm endpoint");
    if (config.generation_metric == GenerationMetric::L3Score && !gateway.has(Role::Judge)) {
      throw ConfigError("l3score needs a judge endpoint");
    }
    report = run_generation_eval(stores, items, gateway, *embedder, config);
  }

  const auto j = report.to_json();
  if (!o.report.empty()) std::ofstream(o.report) << j.dump(2) << "\n";
  out << j.dump() << "\n";
  const bool degraded = std::any_of(report.per_item.begin(), report.per_item.end(),
                                    [](const ItemScore& s) { return !s.error.empty(); });
  return degraded ? kDegraded : kOk;
}

int cmd_mock_serve(const Options& o, std::ostream& out) {
  MockOptions options;
  if (!o.fixtures.empty()) options = load_fixture_dir(o.fixtures);
  if (!options.default_fixture) options.default_fixture = Fixture{{}, std::nullopt, true};
  options.embed_dims = o.embed_dims;
  options.transient_failures = o.transient_failures;

  // Block the shutdown signals before the server threads exist so they all
  // inherit the mask and sigwait below receives them.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);

  MockServer server(std::move(options));
  try {
    server.start(o.host, o.port);
  } catch (...) {
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    throw;
  }
  if (o.json) {
    out << nlohmann::json{{"base_url", server.base_url()}, {"port", server.port()}}.dump()
        << std::endl;
  } else {
    out << "listening on " << server.base_url() << std::endl;
  }
  int received = 0;
  sigwait(&signals, &received);
  spdlog::info("signal {}: shutting down", received);
  server.stop();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Table-aware retrieval-augmented generation pipeline", "gridrag"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("-v,--verbose", o.verbose, "Log progress to stderr");

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "Pipeline config JSON")->check(CLI::ExistingFile);
    cmd->add_flag("--json", o.json, "Machine-readable output");
    cmd->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    cmd->add_option("--embedder", o.embedder, "Embedder")
        ->check(CLI::IsMember({"hashing", "gateway"}));
  };

  auto* ingest_cmd = app.add_subcommand("ingest", "Build a store from a page corpus");
  add_common(ingest_cmd);
  ingest_cmd->add_option("--manifest", o.manifest, "Corpus manifest JSON")->required();
  ingest_cmd->add_option("--store", o.stores, "Output store (JSONL)")->required();
  ingest_cmd->add_option("--mode", o.mode, "Rationale mode")
      ->check(CLI::IsMember({"template", "model"}));
  ingest_cmd->add_option("--policy", o.policy, "Page fallback policy")
      ->check(CLI::IsMember({"always", "on_failure_only"}));
  ingest_cmd->add_option("--partition-size", o.partition_size, "Pages per store partition")
      ->check(CLI::PositiveNumber);
  ingest_cmd->add_option("--report", o.report, "Write the ingest report here");
  ingest_cmd->add_flag("--dry-run", o.dry_run, "Print the plan, write nothing");

  auto* query_cmd = app.add_subcommand("query", "Answer a question from a store");
  add_common(query_cmd);
  query_cmd->add_option("question", o.question, "Question")->required();
  query_cmd->add_option("--store", o.stores, "Store (JSONL)")->required();
  query_cmd->add_option("--k", o.k, "Rationales to retrieve")->check(CLI::PositiveNumber);
  query_cmd->add_flag("--retrieve-only", o.retrieve_only, "Print hits without generating");

  auto* eval_cmd = app.add_subcommand("eval", "Score generation or retrieval on a QA file");
  add_common(eval_cmd);
  eval_cmd->add_option("--mode", o.mode, "generation or retrieval")
      ->required()
      ->check(CLI::IsMember({"generation", "retrieval"}));
  eval_cmd->add_option("--qa", o.qa, "QA JSONL")->required();
  eval_cmd->add_option("--store", o.stores, "Store(s); a partitioned store by its base name")
      ->required();
  eval_cmd->add_option("--k", o.k, "Retrieval depth")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--context", o.context, "Generation context")
      ->check(CLI::IsMember({"gold_page", "retrieval"}));
  eval_cmd->add_option("--metric", o.metric, "Generation metric")
      ->check(CLI::IsMember({"accuracy", "l3score"}));
  eval_cmd->add_option("--report", o.report, "Write the report here");

  auto* mock_cmd = app.add_subcommand("mock-serve", "Run the deterministic mock model server");
  mock_cmd->add_option("--fixtures", o.fixtures, "Fixture directory")->check(CLI::ExistingDirectory);
  mock_cmd->add_option("--host", o.host, "Bind address");
  mock_cmd->add_option("--port", o.port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  mock_cmd->add_option("--embed-dims", o.embed_dims, "Embedding width")->check(CLI::PositiveNumber);
  mock_cmd->add_option("--transient-failures", o.transient_failures,
                       "Answer the first N requests with 503");
  mock_cmd->add_flag("--json", o.json, "Print the bound address as JSON");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  setup_logging(o.verbose);

  try {
    if (*ingest_cmd) return cmd_ingest(o, out);
    if (*query_cmd) return cmd_query(o, out, err);
    if (*eval_cmd) return cmd_eval(o, out);
    if (*mock_cmd) return cmd_mock_serve(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDegraded;
  }
  return kUsage;
}

}  // namespace gridrag::cli
