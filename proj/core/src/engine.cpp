#include "rt2v/engine.hpp"

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <sstream>

#include "rt2v/error.hpp"
#include "rt2v/mask.hpp"
#include "rt2v/relations.hpp"
#include "rt2v/remote.hpp"
#include "rt2v/trainer.hpp"

namespace fs = std::filesystem;

namespace rt2v {

std::string_view library_version() { return RT2V_VERSION; }

void EngineConfig::apply_environment() {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("RT2V_EMBED_URL")) embed_url = *v;
  if (auto v = env("RT2V_LLM_URL")) llm_url = *v;
  if (auto v = env("RT2V_API_KEY")) api_key = *v;
  if (auto v = env("RT2V_FIXTURES")) fixtures_dir = *v;
}

void EngineConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorKind::kInvalidArgument, why); };
  if (benchmark.empty()) fail("a benchmark path is required");
  if (k < 1) fail("k must be at least 1");
  if (!(tau >= 0.0 && tau <= 1.0)) fail("tau must lie in [0, 1]");
  if (dim < 8) fail("embedding dim must be at least 8");
  if (max_reasks < 0) fail("max_reasks must be non-negative");
  if (!fixture_mode && llm_url.empty()) fail("live mode requires an LLM endpoint (RT2V_LLM_URL)");
}

json EngineConfig::to_json() const {
  json doc = {{"benchmark", benchmark},
              {"k", k},
              {"tau", tau},
              {"aggregation", aggregation_name(aggregation)},
              {"dim", dim},
              {"max_refinements", max_refinements},
              {"max_reasks", max_reasks},
              {"fixture_mode", fixture_mode},
              {"fixtures_dir", fixtures_dir},
              {"embed_url", embed_url},
              {"embed_model", embed_model},
              {"llm_url", llm_url},
              {"llm_model", llm_model},
              {"persist_enrichment", persist_enrichment},
              {"write_back", write_back},
              {"parallel_rerank", parallel_rerank}};
  doc["index_path"] = index_path ? json(*index_path) : json(nullptr);
  doc["heads_path"] = heads_path ? json(*heads_path) : json(nullptr);
  return doc;
}

EngineConfig EngineConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::kMalformedJson, "config must be a JSON object");
  EngineConfig c;
  try {
    auto get = [&doc](const char* key, auto& field) {
      if (doc.contains(key) && !doc[key].is_null()) doc[key].get_to(field);
    };
    get("benchmark", c.benchmark);
    get("k", c.k);
    get("tau", c.tau);
    get("dim", c.dim);
    get("max_refinements", c.max_refinements);
    get("max_reasks", c.max_reasks);
    get("fixture_mode", c.fixture_mode);
    get("fixtures_dir", c.fixtures_dir);
    get("embed_url", c.embed_url);
    get("embed_model", c.embed_model);
    get("llm_url", c.llm_url);
    get("llm_model", c.llm_model);
    get("api_key", c.api_key);
    get("persist_enrichment", c.persist_enrichment);
    get("write_back", c.write_back);
    get("parallel_rerank", c.parallel_rerank);
    if (doc.contains("index_path") && !doc["index_path"].is_null()) {
      c.index_path = doc["index_path"].get<std::string>();
    }
    if (doc.contains("heads_path") && !doc["heads_path"].is_null()) {
      c.heads_path = doc["heads_path"].get<std::string>();
    }
    if (doc.contains("aggregation")) {
      c.aggregation = parse_aggregation(doc["aggregation"].get<std::string>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kMalformedJson, std::string("config: ") + e.what());
  }
  return c;
}

EngineConfig EngineConfig::load(const fs::path& path) {
  return from_json(parse_json(read_text_file(path)));
}

json RetrievalResponse::to_json() const {
  return {{"query", query},
          {"k", k},
          {"tau", tau},
          {"aggregation", aggregation_name(aggregation)},
          {"subqueries", subqueries_to_json(subqueries)},
          {"entries", ranking_entries_to_json(ranking)},
          {"warnings", ranking.warnings},
          {"timing_ms",
           {{"decompose", timing.decompose_ms},
            {"coarse", timing.coarse_ms},
            {"rerank", timing.rerank_ms}}}};
}

std::string RetrievalResponse::to_table() const {
  std::ostringstream os;
  os << "query: " << query << "\n";
  os << "k=" << k << " tau=" << tau << " aggregation=" << aggregation_name(aggregation) << "\n";
  for (const auto& s : subqueries) {
    os << "  - [" << subquery_kind_name(s.kind) << "] " << s.text << "\n";
  }
  os << std::left << std::setw(6) << "rank" << std::setw(16) << "video" << std::setw(15) << "tier"
     << std::setw(10) << "score" << std::setw(10) << "coarse" << "objects\n";
  os << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < ranking.entries.size(); ++i) {
    const auto& e = ranking.entries[i];
    std::string objects;
    if (e.verdict) {
      for (TrackId id : e.verdict->object_ids) {
        objects += (objects.empty() ? "" : ",") + std::to_string(id);
      }
    }
    os << std::setw(6) << i + 1 << std::setw(16) << e.video_id << std::setw(15) << tier_name(e.tier)
       << std::setw(10) << e.sort_score << std::setw(10) << e.coarse_score << objects << "\n";
  }
  for (const auto& w : ranking.warnings) os << "warning: " << w << "\n";
  os << "timing_ms: decompose=" << timing.decompose_ms << " coarse=" << timing.coarse_ms
     << " rerank=" << timing.rerank_ms << "\n";
  return os.str();
}

namespace {

HttpEndpoint endpoint(const std::string& url, const std::string& key) {
  HttpEndpoint e;
  e.url = url;
  e.api_key = key;
  return e;
}

class StageTimer {
 public:
  explicit StageTimer(bool frozen) : frozen_(frozen), start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    if (frozen_) return 0.0;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool frozen_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
  config_.validate();
  benchmark_ = load_benchmark(config_.benchmark);

  if (config_.fixture_mode) {
    provider_ = std::make_unique<HashEmbeddingProvider>(config_.dim);
    const fs::path fixtures =
        config_.fixtures_dir.empty() ? benchmark_.fixtures_dir() : fs::path(config_.fixtures_dir);
    if (!fs::is_directory(fixtures)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "fixture mode requires a fixture directory; " + fixtures.string() + " is missing");
    }
    llm_ = std::make_unique<FixtureLlmClient>(fixtures);
  } else {
    if (config_.embed_url.empty()) {
      provider_ = std::make_unique<HashEmbeddingProvider>(config_.dim);
    } else {
      provider_ = std::make_unique<RemoteEmbeddingProvider>(
          endpoint(config_.embed_url, config_.api_key), config_.embed_model, config_.dim);
    }
    llm_ = std::make_unique<RemoteLlmClient>(endpoint(config_.llm_url, config_.api_key),
                                             config_.llm_model);
  }

  heads_ = config_.heads_path ? load_heads(*config_.heads_path) : HeadSet::identity(config_.dim);
  for (const ProjectionHead* h : {&heads_.query, &heads_.object, &heads_.relation}) {
    if (h->in_dim() != provider_->dim() || h->out_dim() != heads_.query.out_dim()) {
      throw Error(ErrorKind::kDimensionMismatch,
                  "heads expect input dim " + std::to_string(h->in_dim()) + ", provider emits " +
                      std::to_string(provider_->dim()));
    }
  }

  if (config_.index_path && fs::exists(*config_.index_path)) {
    index_ = ComponentIndex::load(*config_.index_path);
    const auto& meta = index_.metadata();
    if (meta.provider_id != provider_->id() || meta.head_version != heads_.version()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "index " + *config_.index_path + " was built with provider " + meta.provider_id +
                      " and heads " + meta.head_version + "; engine uses " + provider_->id() +
                      " and " + heads_.version());
    }
  } else {
    RelationMap relations;
    for (const auto& twin : benchmark_.twins) relations[twin.video_id] = extract_relations(twin);
    index_ = build_index(benchmark_.twins, relations, *provider_, heads_);
  }
  for (const auto& twin : benchmark_.twins) {
    if (!index_.contains(twin.video_id)) {
      throw Error(ErrorKind::kNotFound, "index has no entries for video " + twin.video_id);
    }
  }

  tools_ = default_stub_tools();
  std::optional<fs::path> write_back;
  if (config_.persist_enrichment && config_.write_back) write_back = benchmark_.twin_dir();
  store_ = std::make_unique<TwinStore>(benchmark_.twins, write_back);
}

Engine::~Engine() = default;

RetrievalResponse Engine::query(std::string_view text, std::optional<std::size_t> k,
                                std::optional<double> tau) {
  RetrievalResponse r;
  r.query = std::string(text);
  r.k = k.value_or(config_.k);
  r.tau = tau.value_or(config_.tau);
  r.aggregation = config_.aggregation;
  if (text.empty()) throw Error(ErrorKind::kInvalidArgument, "query text is empty");
  if (r.k < 1) throw Error(ErrorKind::kInvalidArgument, "k must be at least 1");
  if (!(r.tau >= 0.0 && r.tau <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "tau must lie in [0, 1]");

  const bool frozen = config_.fixture_mode;
  StageTimer t_decompose(frozen);
  r.subqueries = decompose(text, *llm_, config_.max_reasks);
  r.timing.decompose_ms = t_decompose.elapsed_ms();

  StageTimer t_coarse(frozen);
  const auto vectors = embed_subqueries(r.subqueries, *provider_, heads_.query);
  AggregationSpec agg{config_.aggregation, {}};
  for (const auto& s : r.subqueries) agg.weights.push_back(s.weight);
  const auto coarse = rank_all(index_, vectors, agg);
  r.timing.coarse_ms = t_coarse.elapsed_ms();

  StageTimer t_rerank(frozen);
  RerankOptions opts;
  opts.tau = r.tau;
  opts.max_refinements = config_.max_refinements;
  opts.max_reasks = config_.max_reasks;
  opts.persist_enrichment = config_.persist_enrichment;
  opts.parallel = config_.parallel_rerank;
  opts.clock = frozen ? frozen_clock(0) : system_clock();
  r.ranking = rerank(text, r.subqueries, coarse, r.k, *store_, *llm_, tools_, opts);
  r.timing.rerank_ms = t_rerank.elapsed_ms();
  return r;
}

MaskSet Engine::load_masks(const DigitalTwin& twin, const std::vector<MaskTrack>& tracks) const {
  MaskSet out;
  for (const auto& track : tracks) {
    for (const auto& [frame, ref] : track.frames) {
      out[{track.object_id, frame}] = read_mask_file(benchmark_.mask_path(ref));
    }
  }
  (void)twin;
  return out;
}

MetricReport Engine::evaluate(std::span<const std::size_t> ks) {
  std::vector<QueryOutcome> outcomes;
  for (const auto& q : benchmark_.manifest.queries) {
    const RetrievalResponse r = query(q.text);
    QueryOutcome o;
    o.query_id = q.query_id;
    o.rank = r.ranking.rank_of(q.gt_video_id);
    const DigitalTwin& gt_twin = *benchmark_.find(q.gt_video_id);
    ReasonerVerdict gt_verdict;
    gt_verdict.object_ids = q.gt_object_ids;
    o.ground_truth = load_masks(gt_twin, extract_masks(gt_verdict, gt_twin));
    // Grounding is scored on the top-ranked video only when it is the right one.
    if (!r.ranking.entries.empty()) {
      const auto& top = r.ranking.entries.front();
      if (top.video_id == q.gt_video_id) o.predicted = load_masks(gt_twin, top.masks);
    }
    outcomes.push_back(std::move(o));
  }
  return compute_report(outcomes, ks);
}

DigitalTwin Engine::twin(std::string_view video_id) const {
  auto t = store_->get(video_id);
  if (!t) throw Error(ErrorKind::kNotFound, "unknown video \"" + std::string(video_id) + "\"");
  return *t;
}

std::string Engine::mask_rle(std::string_view video_id, TrackId instance, FrameIndex frame) const {
  const DigitalTwin* t = benchmark_.find(video_id);
  if (t == nullptr) throw Error(ErrorKind::kNotFound, "unknown video \"" + std::string(video_id) + "\"");
  for (const auto& f : t->frames) {
    if (f.frame_index != frame) continue;
    if (const InstanceRecord* inst = f.find(instance)) {
      return rle_encode(read_mask_file(benchmark_.mask_path(inst->mask_ref)));
    }
  }
  throw Error(ErrorKind::kNotFound, "video \"" + std::string(video_id) + "\" has no instance " +
                                        std::to_string(instance) + " in frame " + std::to_string(frame));
}

json Engine::health() const {
  const auto& meta = index_.metadata();
  return {{"status", "ok"},
          {"version", library_version()},
          {"benchmark", {{"name", benchmark_.manifest.name},
                         {"videos", benchmark_.twins.size()},
                         {"queries", benchmark_.manifest.queries.size()}}},
          {"index", {{"format_version", kIndexFormatVersion},
                     {"provider", meta.provider_id},
                     {"head_version", meta.head_version},
                     {"dim", meta.dim},
                     {"entries", index_.size()}}},
          {"defaults", {{"k", config_.k}, {"tau", config_.tau}}}};
}

}  // namespace rt2v
