#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <optional>

#include "rt2v/bench_io.hpp"
#include "rt2v/engine.hpp"
#include "rt2v/error.hpp"
#include "rt2v/llm.hpp"
#include "rt2v/relations.hpp"
#include "rt2v/service.hpp"
#include "rt2v/trainer.hpp"

namespace fs = std::filesystem;

namespace rt2v {
namespace {

struct EngineFlags {
  std::string config;
  std::string benchmark;
  std::optional<std::size_t> k;
  std::optional<double> tau;
  std::optional<std::string> agg;
  std::string fixtures;
  std::string index;
  std::string heads;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> max_refinements;
  bool live = false;
  bool persist = false;

  // serve is read-only, so it does not offer --persist.
  void bind(CLI::App* app, bool allow_persist = true) {
    app->add_option("--config", config, "Engine configuration JSON");
    app->add_option("--benchmark", benchmark, "Benchmark root directory");
    app->add_option("--k", k, "Candidates passed to the reasoner")->check(CLI::PositiveNumber);
    app->add_option("--tau", tau, "Relevance threshold")->check(CLI::Range(0.0, 1.0));
    app->add_option("--agg", agg, "Sub-query aggregation")
        ->check(CLI::IsMember({"weighted_mean", "min"}));
    app->add_option("--fixtures", fixtures, "Fixture directory for offline LLM responses");
    app->add_option("--index", index, "Prebuilt component index");
    app->add_option("--heads", heads, "Projection head checkpoint");
    app->add_option("--dim", dim, "Embedding dimension")->check(CLI::Range(8, 1 << 16));
    app->add_option("--max-refinements", max_refinements, "Refinement rounds per candidate");
    app->add_flag("--live", live, "Use remote providers instead of fixtures");
    if (allow_persist) {
      app->add_flag("--persist", persist, "Write enriched twins back to the benchmark");
    }
  }

  EngineConfig resolve() const {
    EngineConfig c = config.empty() ? EngineConfig{} : EngineConfig::load(config);
    c.apply_environment();
    if (!benchmark.empty()) c.benchmark = benchmark;
    if (k) c.k = *k;
    if (tau) c.tau = *tau;
    if (agg) c.aggregation = parse_aggregation(*agg);
    if (!fixtures.empty()) c.fixtures_dir = fixtures;
    if (!index.empty()) c.index_path = index;
    if (!heads.empty()) c.heads_path = heads;
    if (dim) c.dim = *dim;
    if (max_refinements) c.max_refinements = *max_refinements;
    if (live) c.fixture_mode = false;
    if (persist) c.write_back = true;
    return c;
  }
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void emit(std::ostream& out, const json& doc) { out << canonical_json(doc) << "\n"; }

std::vector<fs::path> twin_files(const fs::path& in) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(in)) {
    files.push_back(in);
  } else if (fs::is_directory(in)) {
    // A benchmark root reads its twin directory; any other directory is scanned as is.
    fs::path dir = in;
    if (fs::is_regular_file(in / "manifest.json")) {
      const json manifest = parse_json(read_text_file(in / "manifest.json"));
      dir = in / manifest.value("twin_dir", std::string("twins"));
    }
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
  } else {
    throw Error(ErrorKind::kIo, in.string() + " does not exist");
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::vector<DigitalTwin> load_twin_dir(const fs::path& in) {
  std::vector<DigitalTwin> twins;
  for (const auto& path : twin_files(in)) {
    try {
      twins.push_back(parse_twin(read_text_file(path)));
    } catch (const Error& e) {
      throw Error(e.kind(), path.filename().string() + ": " + e.what());
    }
  }
  return twins;
}

RelationMap relate_all(const std::vector<DigitalTwin>& twins) {
  RelationMap relations;
  for (const auto& twin : twins) relations[twin.video_id] = extract_relations(twin);
  return relations;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reasoning text-to-video retrieval over digital twin documents", "rt2v"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(library_version()));

  // ingest
  std::string ingest_in, ingest_out;
  auto* ingest = app.add_subcommand("ingest", "Validate twins and write them in canonical form");
  ingest->add_option("--benchmark,--in", ingest_in, "Twin file or directory")->required();
  ingest->add_option("--out", ingest_out, "Output directory for canonical twins");

  // relate
  std::string relate_in, relate_out;
  auto* relate = app.add_subcommand("relate", "Extract pairwise relation tuples");
  relate->add_option("--benchmark,--in", relate_in, "Twin directory")->required();
  relate->add_option("--out", relate_out, "Relations JSON output (stdout when omitted)");

  // index
  std::string index_in, index_out, index_heads;
  std::size_t index_dim = kDefaultEmbeddingDim;
  auto* index = app.add_subcommand("index", "Build and persist the component index");
  index->add_option("--benchmark,--in", index_in, "Twin directory")->required();
  index->add_option("--out", index_out, "Index output path")->required();
  index->add_option("--heads", index_heads, "Projection head checkpoint");
  index->add_option("--dim", index_dim, "Embedding dimension")->check(CLI::Range(8, 1 << 16));

  // train
  std::string train_bench, train_fixtures, train_out;
  TrainConfig train_cfg;
  std::size_t train_dim = kDefaultEmbeddingDim;
  std::size_t train_negatives = 8;
  auto* train_cmd = app.add_subcommand("train", "Train projection heads on a benchmark");
  train_cmd->add_option("--benchmark", train_bench, "Benchmark root")->required();
  train_cmd->add_option("--fixtures", train_fixtures, "Decomposition fixtures (default: benchmark fixtures)");
  train_cmd->add_option("--out", train_out, "Head checkpoint output")->required();
  train_cmd->add_option("--seed", train_cfg.seed, "Random seed");
  train_cmd->add_option("--epochs", train_cfg.epochs, "Training epochs");
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Learning rate");
  train_cmd->add_option("--temperature", train_cfg.temperature, "Softmax temperature");
  train_cmd->add_option("--batch-size", train_cfg.batch_size, "Examples per step");
  train_cmd->add_option("--negatives", train_negatives, "Negatives sampled per positive");
  train_cmd->add_option("--dim", train_dim, "Embedding dimension")->check(CLI::Range(8, 1 << 16));

  // query
  EngineFlags query_flags;
  std::string query_text, query_format = "json";
  auto* query = app.add_subcommand("query", "Retrieve videos for one query");
  query_flags.bind(query);
  query->add_option("--query", query_text, "Query text")->required();
  query->add_option("--format", query_format, "Output format")->check(CLI::IsMember({"json", "table"}));

  // eval
  EngineFlags eval_flags;
  std::string eval_format = "json", eval_out;
  std::vector<std::size_t> eval_ks = kDefaultMetricKs;
  auto* eval = app.add_subcommand("eval", "Run every benchmark query and report metrics");
  eval_flags.bind(eval);
  eval->add_option("--format", eval_format, "Output format")->check(CLI::IsMember({"json", "table"}));
  eval->add_option("--out", eval_out, "Also write the JSON report here");
  eval->add_option("--ks", eval_ks, "Comma-separated metric cut-offs")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // generate
  SyntheticSpec gen_spec;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Write a seeded synthetic benchmark");
  generate->add_option("--out", gen_out, "Output directory (absent or empty)")->required();
  generate->add_option("--seed", gen_spec.seed, "Random seed");
  generate->add_option("--videos", gen_spec.video_count, "Total videos, distractors included");
  generate->add_option("--distractors", gen_spec.distractor_count, "Videos without queries");
  generate->add_option("--queries", gen_spec.query_count, "Query count");
  generate->add_option("--min-tracks", gen_spec.min_tracks, "Fewest tracks per video");
  generate->add_option("--max-tracks", gen_spec.max_tracks, "Most tracks per video");

  // serve
  EngineFlags serve_flags;
  std::string serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve retrieval over HTTP (read-only)");
  serve_flags.bind(serve, false);
  serve->add_option("--host", serve_host, "Listen address");
  serve->add_option("--port", serve_port, "Listen port (0 picks one)")->check(CLI::Range(0, 65535));

  std::vector<std::string> argv_store = {"rt2v"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*ingest) {
      const auto twins = load_twin_dir(ingest_in);
      if (!ingest_out.empty()) {
        for (const auto& t : twins) write_text_file(fs::path(ingest_out) / (t.video_id + ".json"), serialize_twin(t));
      }
      json ids = json::array();
      for (const auto& t : twins) ids.push_back(t.video_id);
      emit(out, {{"ingested", twins.size()}, {"video_ids", ids}});
    } else if (*relate) {
      const json doc = relations_to_json(relate_all(load_twin_dir(relate_in)));
      if (relate_out.empty()) {
        emit(out, doc);
      } else {
        write_text_file(relate_out, canonical_json(doc) + "\n");
        emit(out, {{"written", relate_out}});
      }
    } else if (*index) {
      const auto twins = load_twin_dir(index_in);
      HashEmbeddingProvider provider(index_dim);
      const HeadSet heads = index_heads.empty() ? HeadSet::identity(index_dim) : load_heads(index_heads);
      const ComponentIndex built = build_index(twins, relate_all(twins), provider, heads);
      built.save(index_out);
      emit(out, {{"written", index_out},
                 {"entries", built.size()},
                 {"videos", built.video_ids().size()},
                 {"provider", built.metadata().provider_id},
                 {"head_version", built.metadata().head_version}});
    } else if (*train_cmd) {
      const Benchmark bench = load_benchmark(train_bench);
      FixtureLlmClient llm(train_fixtures.empty() ? bench.fixtures_dir() : fs::path(train_fixtures));
      std::vector<MiningQuery> mining;
      for (const auto& q : bench.manifest.queries) {
        MiningQuery m{q.gt_video_id, {}};
        for (const auto& s : decompose(q.text, llm)) m.subquery_texts.push_back(s.text);
        mining.push_back(std::move(m));
      }
      const TrainingDataset dataset = mine_training_dataset(bench.twins, relate_all(bench.twins), mining,
                                                            train_negatives, train_cfg.seed);
      HashEmbeddingProvider provider(train_dim);
      const TrainResult result = train(dataset, provider, train_cfg);
      save_heads(train_out, result.heads, train_cfg);
      emit(out, {{"written", train_out},
                 {"examples", dataset.examples.size()},
                 {"loss_trace", result.loss_trace},
                 {"head_version", result.heads.version()}});
    } else if (*query) {
      if (query_text.empty()) throw UsageError("--query must not be empty");
      EngineConfig cfg = query_flags.resolve();
      Engine engine(cfg);
      const RetrievalResponse r = engine.query(query_text);
      if (query_format == "table") {
        out << r.to_table();
      } else {
        emit(out, r.to_json());
      }
    } else if (*eval) {
      Engine engine(eval_flags.resolve());
      const MetricReport report = engine.evaluate(eval_ks);
      if (!eval_out.empty()) write_text_file(eval_out, canonical_json(report.to_json()) + "\n");
      if (eval_format == "table") {
        out << report.to_table();
      } else {
        emit(out, report.to_json());
      }
    } else if (*generate) {
      generate_synthetic(gen_spec, gen_out);
      emit(out, {{"written", gen_out},
                 {"videos", gen_spec.video_count},
                 {"queries", gen_spec.query_count}});
    } else if (*serve) {
      EngineConfig cfg = serve_flags.resolve();
      cfg.persist_enrichment = false;
      cfg.write_back = false;
      cfg.validate();
      Service service;
      const int port = service.bind(serve_host, serve_port);
      service.load_async(cfg);
      emit(out, {{"listening", serve_host + ":" + std::to_string(port)}});
      out.flush();
      service.listen();
    }
  } catch (const UsageError& e) {
    err << e.what() << "\n" << "Run with --help for more information.\n";
    return kExitUsage;
  } catch (const Error& e) {
    emit(err, {{"error", {{"kind", to_string(e.kind())}, {"message", e.what()}}}});
    return kExitFailure;
  } catch (const std::exception& e) {
    emit(err, {{"error", {{"kind", "internal"}, {"message", e.what()}}}});
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace rt2v
