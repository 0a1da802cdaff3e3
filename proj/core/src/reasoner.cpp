#include "rt2v/reasoner.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <mutex>
#include <set>

#include "rt2v/error.hpp"

namespace rt2v {

namespace {

std::set<FrameIndex> frame_indices(const DigitalTwin& twin) {
  std::set<FrameIndex> out;
  for (const auto& f : twin.frames) out.insert(f.frame_index);
  return out;
}

std::pair<FrameIndex, FrameIndex> call_range(const ToolCall& call, const DigitalTwin& twin) {
  if (call.frames.empty()) {
    return {twin.frames.front().frame_index, twin.frames.back().frame_index};
  }
  auto [lo, hi] = std::minmax_element(call.frames.begin(), call.frames.end());
  return {*lo, *hi};
}

std::vector<TrackId> call_targets(const ToolCall& call, const DigitalTwin& twin,
                                  FrameIndex first, FrameIndex last) {
  if (!call.instance_ids.empty()) return call.instance_ids;
  std::set<TrackId> ids;
  for (const auto& f : twin.frames) {
    if (f.frame_index < first || f.frame_index > last) continue;
    for (const auto& inst : f.instances) ids.insert(inst.instance_id);
  }
  return {ids.begin(), ids.end()};
}

}  // namespace

void validate_plan(const ExecutionPlan& plan, const DigitalTwin& twin, const ToolRegistry& tools) {
  if (plan.calls.empty()) throw Error(ErrorKind::kPlanRejected, "plan has no calls");
  if (plan.calls.size() > kMaxPlanCalls) {
    throw Error(ErrorKind::kPlanRejected, "plan has " + std::to_string(plan.calls.size()) +
                                              " calls; at most " +
                                              std::to_string(kMaxPlanCalls) + " are allowed");
  }
  for (const auto& call : plan.calls) {
    if (!tools.contains(call.tool)) {
      throw Error(ErrorKind::kPlanRejected, "plan names unregistered tool \"" + call.tool + "\"");
    }
  }
  const auto frames = frame_indices(twin);
  for (const auto& call : plan.calls) {
    for (TrackId id : call.instance_ids) {
      if (!twin.has_track(id)) {
        throw Error(ErrorKind::kPlanRejected, "tool \"" + call.tool + "\" targets unknown instance " +
                                                  std::to_string(id));
      }
    }
    for (FrameIndex f : call.frames) {
      if (frames.count(f) == 0) {
        throw Error(ErrorKind::kPlanRejected, "tool \"" + call.tool + "\" targets unknown frame " +
                                                  std::to_string(f));
      }
    }
    if (call.instance_ids.empty() && call.frames.empty()) {
      throw Error(ErrorKind::kPlanRejected, "tool \"" + call.tool + "\" has no targets");
    }
  }
}

std::vector<EnrichmentRecord> run_plan(const ExecutionPlan& plan, const DigitalTwin& twin,
                                       const ToolRegistry& tools, const Clock& clock) {
  validate_plan(plan, twin, tools);
  std::vector<EnrichmentRecord> out;
  for (const auto& call : plan.calls) {
    ToolClient* tool = tools.find(call.tool);
    const auto [first, last] = call_range(call, twin);
    for (TrackId id : call_targets(call, twin, first, last)) {
      EnrichmentRecord rec{id, first, last, {}, call.tool, 0, std::nullopt};
      try {
        rec.text = tool->run({twin, id, first, last, call.params});
      } catch (const Error& e) {
        rec.error = std::string(to_string(e.kind())) + ": " + e.what();
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      rec.timestamp_ms = clock();
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::string enrichment_descriptor(const EnrichmentRecord& record) {
  return record.text + " [" + record.tool + "]";
}

EnrichmentResult apply_enrichment(const DigitalTwin& twin,
                                  std::span<const EnrichmentRecord> records) {
  EnrichmentResult result{twin, {}};
  for (const auto& rec : records) {
    if (!rec.ok() || !twin.has_track(rec.instance_id)) {
      result.skipped.push_back(rec);
      continue;
    }
    const std::string descriptor = enrichment_descriptor(rec);
    for (auto& frame : result.twin.frames) {
      if (frame.frame_index < rec.first_frame || frame.frame_index > rec.last_frame) continue;
      for (auto& inst : frame.instances) {
        if (inst.instance_id == rec.instance_id) inst.attributes.push_back(descriptor);
      }
    }
  }
  return result;
}

std::vector<MaskTrack> extract_masks(const ReasonerVerdict& verdict, const DigitalTwin& twin) {
  std::vector<MaskTrack> out;
  for (TrackId id : verdict.object_ids) {
    MaskTrack track{id, {}};
    for (const auto& frame : twin.frames) {
      if (const auto* inst = frame.find(id)) track.frames.emplace_back(frame.frame_index, inst->mask_ref);
    }
    if (track.frames.empty()) {
      throw Error(ErrorKind::kNotFound, "verdict object " + std::to_string(id) +
                                            " does not resolve in \"" + twin.video_id + "\"");
    }
    out.push_back(std::move(track));
  }
  return out;
}

TwinStore::TwinStore(std::vector<DigitalTwin> twins,
                     std::optional<std::filesystem::path> write_back_dir)
    : write_back_dir_(std::move(write_back_dir)) {
  for (auto& t : twins) {
    std::string id = t.video_id;
    if (!twins_.emplace(std::move(id), std::move(t)).second) {
      throw Error(ErrorKind::kDuplicateId, "duplicate twin video_id");
    }
  }
}

std::optional<DigitalTwin> TwinStore::get(std::string_view video_id) const {
  std::shared_lock lock(mu_);
  auto it = twins_.find(video_id);
  if (it == twins_.end()) return std::nullopt;
  return it->second;
}

void TwinStore::put(DigitalTwin twin) {
  std::unique_lock lock(mu_);
  if (write_back_dir_) {
    write_text_file(*write_back_dir_ / (twin.video_id + ".json"), serialize_twin(twin));
  }
  std::string id = twin.video_id;
  twins_.insert_or_assign(std::move(id), std::move(twin));
}

std::vector<std::string> TwinStore::ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, twin] : twins_) out.push_back(id);
  return out;
}

std::string_view tier_name(Tier tier) {
  switch (tier) {
    case Tier::kVerified: return "verified";
    case Tier::kSubThreshold: return "sub_threshold";
    case Tier::kUncandidated: return "uncandidated";
  }
  return "";
}

std::size_t FinalRanking::rank_of(std::string_view video_id) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].video_id == video_id) return i + 1;
  }
  return 0;
}

json ranking_entries_to_json(const FinalRanking& ranking) {
  json out = json::array();
  for (const auto& e : ranking.entries) {
    json masks = json::array();
    for (const auto& m : e.masks) {
      json frames = json::array();
      for (const auto& [f, ref] : m.frames) frames.push_back({{"frame_index", f}, {"mask_ref", ref}});
      masks.push_back({{"object_id", m.object_id}, {"frames", std::move(frames)}});
    }
    json verdict = nullptr;
    if (e.verdict) {
      verdict = {{"relevance", e.verdict->relevance},
                 {"trace", e.verdict->trace},
                 {"object_ids", e.verdict->object_ids}};
    }
    out.push_back({{"video_id", e.video_id},
                   {"tier", tier_name(e.tier)},
                   {"score", e.sort_score},
                   {"coarse_score", e.coarse_score},
                   {"verdict", std::move(verdict)},
                   {"masks", std::move(masks)}});
  }
  return out;
}

std::string reasoning_key(std::string_view query, std::string_view video_id) {
  return std::string(query) + "\t" + std::string(video_id);
}

std::string reasoning_prompt(std::string_view query, std::span<const SubQuery> subqueries,
                             const DigitalTwin& twin, const std::vector<std::string>& tool_names,
                             std::size_t refinements_left,
                             const std::vector<std::string>& history) {
  std::string p =
      "[reason.v1]\n"
      "Decide whether the video described by the digital twin below satisfies the query.\n"
      "Reason over objects, attributes, positions and relations. If information needed to\n"
      "decide is missing from the twin, you may request specialist tools.\n\n"
      "Query: ";
  p.append(query);
  p += "\nConditions:\n";
  for (const auto& s : subqueries) {
    p += "- " + s.text + " (" + std::string(subquery_kind_name(s.kind)) + ")\n";
  }
  p += "Tools:";
  for (const auto& t : tool_names) p += " " + t;
  p += "\n";
  if (refinements_left > 0) {
    p += "Refinements remaining: " + std::to_string(refinements_left) + "\n";
    p += "Answer with ONE JSON object, either\n"
         "  {\"action\":\"refine\",\"plan\":{\"calls\":[{\"tool\":<name>,\"instance_ids\":[...],"
         "\"frames\":[...],\"params\":{}}]}}  (1 to 4 calls)\nor\n";
  } else {
    p += "No refinements remain: you must answer with a verdict.\nAnswer with ONE JSON object\n";
  }
  p += "  {\"action\":\"verdict\",\"verdict\":{\"relevance\":<0..1>,\"trace\":<text>,"
       "\"object_ids\":[...]}}\n\nDigital twin:\n";
  p += serialize_twin(twin);
  p += "\n";
  for (const auto& h : history) p += "\n" + h + "\n";
  return p;
}

namespace {

using Reply = std::variant<ExecutionPlan, ReasonerVerdict>;

[[noreturn]] void schema_error(const std::string& why) { throw Error(ErrorKind::kSchema, why); }

std::vector<std::uint64_t> unsigned_list(const json& obj, const char* key, const std::string& at) {
  std::vector<std::uint64_t> out;
  if (!obj.contains(key)) return out;
  if (!obj[key].is_array()) schema_error(at + "." + key + " must be an array");
  for (const json& v : obj[key]) {
    if (!v.is_number_unsigned()) schema_error(at + "." + key + " must hold non-negative integers");
    out.push_back(v.get<std::uint64_t>());
  }
  return out;
}

Reply parse_reply(std::string_view text, const DigitalTwin& twin, const ToolRegistry& tools,
                  bool verdict_only) {
  json doc;
  try {
    doc = parse_json(text);
  } catch (const Error& e) {
    schema_error(std::string("response is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("action") || !doc["action"].is_string()) {
    schema_error("response must be an object with a string \"action\"");
  }
  const std::string action = doc["action"].get<std::string>();

  if (action == "refine") {
    if (verdict_only) schema_error("no refinements remain; a verdict is required");
    if (!doc.contains("plan") || !doc["plan"].is_object() || !doc["plan"].contains("calls") ||
        !doc["plan"]["calls"].is_array()) {
      schema_error("refine needs plan.calls");
    }
    ExecutionPlan plan;
    for (const json& c : doc["plan"]["calls"]) {
      const std::string at = "plan.calls[" + std::to_string(plan.calls.size()) + "]";
      if (!c.is_object() || !c.contains("tool") || !c["tool"].is_string()) {
        schema_error(at + " needs a string \"tool\"");
      }
      ToolCall call;
      call.tool = c["tool"].get<std::string>();
      call.instance_ids = unsigned_list(c, "instance_ids", at);
      call.frames = unsigned_list(c, "frames", at);
      if (c.contains("params")) {
        if (!c["params"].is_object()) schema_error(at + ".params must be an object");
        for (const auto& [k, v] : c["params"].items()) {
          call.params[k] = v.is_string() ? v.get<std::string>() : canonical_json(v);
        }
      }
      plan.calls.push_back(std::move(call));
    }
    try {
      validate_plan(plan, twin, tools);
    } catch (const Error& e) {
      schema_error(e.what());
    }
    return plan;
  }

  if (action == "verdict") {
    if (!doc.contains("verdict") || !doc["verdict"].is_object()) schema_error("verdict missing");
    const json& v = doc["verdict"];
    if (!v.contains("relevance") || !v["relevance"].is_number()) {
      schema_error("verdict.relevance must be a number");
    }
    ReasonerVerdict verdict;
    verdict.relevance = v["relevance"].get<double>();
    if (!(verdict.relevance >= 0.0 && verdict.relevance <= 1.0)) {
      schema_error("verdict.relevance must lie in [0,1]");
    }
    if (!v.contains("trace") || !v["trace"].is_string() || v["trace"].get<std::string>().empty()) {
      schema_error("verdict.trace must be a non-empty string");
    }
    verdict.trace = v["trace"].get<std::string>();
    verdict.object_ids = unsigned_list(v, "object_ids", "verdict");
    for (TrackId id : verdict.object_ids) {
      if (!twin.has_track(id)) {
        schema_error("verdict object " + std::to_string(id) + " is not a track of the video");
      }
    }
    return verdict;
  }
  schema_error("unknown action \"" + action + "\"");
}

struct CandidateOutcome {
  std::optional<ReasonerVerdict> verdict;
  std::vector<MaskTrack> masks;
  std::vector<std::string> warnings;
};

CandidateOutcome reason_candidate(std::string_view query, std::span<const SubQuery> subqueries,
                                  const std::string& video_id, TwinStore& store, LlmClient& llm,
                                  const ToolRegistry& tools, const RerankOptions& opt) {
  CandidateOutcome out;
  auto stored = store.get(video_id);
  if (!stored) {
    out.warnings.push_back(video_id + ": twin not found; candidate left unverified");
    return out;
  }
  DigitalTwin twin = std::move(*stored);
  const std::string key = reasoning_key(query, video_id);
  const auto tool_names = tools.names();

  std::vector<std::string> history;
  std::size_t refinements = 0;
  std::size_t turn = 0;
  int reasks = 0;
  while (true) {
    const std::size_t left = opt.max_refinements - std::min(refinements, opt.max_refinements);
    const std::string prompt = reasoning_prompt(query, subqueries, twin, tool_names, left, history);
    std::string text;
    try {
      text = llm.complete({std::string(kReasonSchema), prompt, key, turn++});
    } catch (const std::exception& e) {
      out.warnings.push_back(video_id + ": reasoning call failed: " + e.what());
      return out;
    }

    Reply reply;
    try {
      reply = parse_reply(text, twin, tools, left == 0);
    } catch (const Error& e) {
      if (reasks >= opt.max_reasks) {
        out.warnings.push_back(video_id + ": no valid reasoning response after " +
                               std::to_string(reasks) + " re-ask(s): " + e.what());
        return out;
      }
      ++reasks;
      history.push_back("Previous response: " + text + "\nRejected: " + e.what() +
                        "\nRespond again following the schema.");
      continue;
    }
    reasks = 0;

    if (auto* verdict = std::get_if<ReasonerVerdict>(&reply)) {
      out.masks = extract_masks(*verdict, twin);
      out.verdict = std::move(*verdict);
      return out;
    }

    const auto& plan = std::get<ExecutionPlan>(reply);
    const auto records = run_plan(plan, twin, tools, opt.clock);
    auto enriched = apply_enrichment(twin, records);
    twin = std::move(enriched.twin);
    ++refinements;
    std::string note = "Previous response: " + text + "\nTool results:";
    for (const auto& r : records) {
      note += "\n- " + r.tool + " on instance " + std::to_string(r.instance_id) + ": " +
              (r.ok() ? r.text : "error: " + *r.error);
    }
    history.push_back(std::move(note));
    for (const auto& r : enriched.skipped) {
      out.warnings.push_back(video_id + ": enrichment from " + r.tool + " on instance " +
                             std::to_string(r.instance_id) + " skipped" +
                             (r.error ? ": " + *r.error : ""));
    }
    if (opt.persist_enrichment) store.put(twin);
  }
}

}  // namespace

FinalRanking rerank(std::string_view query, std::span<const SubQuery> subqueries,
                    std::span<const CoarseCandidate> coarse_ranking, std::size_t k,
                    TwinStore& twins, LlmClient& llm, const ToolRegistry& tools,
                    const RerankOptions& options) {
  if (!(options.tau >= 0.0 && options.tau <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "tau must lie in [0,1]");
  }
  if (k == 0) throw Error(ErrorKind::kInvalidArgument, "K must be >= 1");
  const std::size_t n_candidates = std::min(k, coarse_ranking.size());

  std::vector<CandidateOutcome> outcomes(n_candidates);
  if (options.parallel && n_candidates > 1) {
    std::vector<std::future<CandidateOutcome>> futures;
    for (std::size_t i = 0; i < n_candidates; ++i) {
      futures.push_back(std::async(std::launch::async, [&, i] {
        return reason_candidate(query, subqueries, coarse_ranking[i].video_id, twins, llm, tools,
                                options);
      }));
    }
    for (std::size_t i = 0; i < n_candidates; ++i) outcomes[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < n_candidates; ++i) {
      outcomes[i] = reason_candidate(query, subqueries, coarse_ranking[i].video_id, twins, llm,
                                     tools, options);
    }
  }

  FinalRanking ranking;
  std::vector<RankedEntry> verified, below;
  for (std::size_t i = 0; i < n_candidates; ++i) {
    auto& o = outcomes[i];
    RankedEntry e;
    e.video_id = coarse_ranking[i].video_id;
    e.coarse_score = coarse_ranking[i].score;
    ranking.warnings.insert(ranking.warnings.end(), o.warnings.begin(), o.warnings.end());
    if (o.verdict && o.verdict->relevance >= options.tau) {
      e.tier = Tier::kVerified;
      e.sort_score = o.verdict->relevance;
      e.masks = std::move(o.masks);
      e.verdict = std::move(o.verdict);
      verified.push_back(std::move(e));
    } else {
      e.tier = Tier::kSubThreshold;
      e.sort_score = e.coarse_score;
      e.verdict = std::move(o.verdict);
      below.push_back(std::move(e));
    }
  }

  auto by_score = [](const RankedEntry& a, const RankedEntry& b) {
    if (a.sort_score != b.sort_score) return a.sort_score > b.sort_score;
    if (a.coarse_score != b.coarse_score) return a.coarse_score > b.coarse_score;
    return a.video_id < b.video_id;
  };
  std::sort(verified.begin(), verified.end(), by_score);
  std::sort(below.begin(), below.end(), by_score);

  ranking.entries = std::move(verified);
  for (auto& e : below) ranking.entries.push_back(std::move(e));
  std::vector<RankedEntry> rest;
  for (std::size_t i = n_candidates; i < coarse_ranking.size(); ++i) {
    RankedEntry e;
    e.video_id = coarse_ranking[i].video_id;
    e.tier = Tier::kUncandidated;
    e.sort_score = e.coarse_score = coarse_ranking[i].score;
    rest.push_back(std::move(e));
  }
  std::sort(rest.begin(), rest.end(), by_score);
  for (auto& e : rest) ranking.entries.push_back(std::move(e));
  return ranking;
}

}  // namespace rt2v
