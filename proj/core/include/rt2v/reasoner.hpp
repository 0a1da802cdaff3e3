#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "rt2v/decomposer.hpp"
#include "rt2v/index.hpp"
#include "rt2v/llm.hpp"
#include "rt2v/tools.hpp"
#include "rt2v/twin.hpp"

namespace rt2v {

inline constexpr double kDefaultTau = 0.5;
inline constexpr std::size_t kDefaultMaxRefinements = 2;
inline constexpr std::size_t kMaxPlanCalls = 4;

struct ReasonerVerdict {
  double relevance = 0.0;  // [0,1]
  std::string trace;
  std::vector<TrackId> object_ids;

  bool operator==(const ReasonerVerdict&) const = default;
};

struct ToolCall {
  std::string tool;
  std::vector<TrackId> instance_ids;
  std::vector<FrameIndex> frames;  // empty means the whole video
  ToolParams params;
};

struct ExecutionPlan {
  std::vector<ToolCall> calls;
};

/// Checks tool names, call count, and that every target resolves in the twin.
/// Throws kPlanRejected naming the first offending tool or target.
void validate_plan(const ExecutionPlan& plan, const DigitalTwin& twin, const ToolRegistry& tools);

struct EnrichmentRecord {
  TrackId instance_id = 0;
  FrameIndex first_frame = 0;
  FrameIndex last_frame = 0;
  std::string text;
  std::string tool;
  std::int64_t timestamp_ms = 0;
  std::optional<std::string> error;  // set when the call failed; text is empty

  bool ok() const { return !error.has_value(); }
};

/// Executes every call (one record per targeted instance). An unknown tool
/// rejects the plan before any call runs; a failing call yields an error
/// record and the remaining calls proceed.
std::vector<EnrichmentRecord> run_plan(const ExecutionPlan& plan, const DigitalTwin& twin,
                                       const ToolRegistry& tools,
                                       const Clock& clock = system_clock());

/// Attribute text an enrichment appends: "<text> [<tool>]".
std::string enrichment_descriptor(const EnrichmentRecord& record);

struct EnrichmentResult {
  DigitalTwin twin;
  std::vector<EnrichmentRecord> skipped;  // dangling or failed records
};

/// Append-only: each successful record appends its descriptor to the target
/// instance in every frame of its range. Nothing else changes.
EnrichmentResult apply_enrichment(const DigitalTwin& twin,
                                  std::span<const EnrichmentRecord> records);

struct MaskTrack {
  TrackId object_id = 0;
  std::vector<std::pair<FrameIndex, std::string>> frames;  // (frame_index, mask_ref)

  bool operator==(const MaskTrack&) const = default;
};

/// Mask references for each verdict object, in frame order.
std::vector<MaskTrack> extract_masks(const ReasonerVerdict& verdict, const DigitalTwin& twin);

/// Current twins keyed by video id. Reads return copies; enrichment write-back
/// replaces a twin atomically and, with a backing directory, rewrites its file.
class TwinStore {
 public:
  TwinStore() = default;
  explicit TwinStore(std::vector<DigitalTwin> twins,
                     std::optional<std::filesystem::path> write_back_dir = std::nullopt);

  std::optional<DigitalTwin> get(std::string_view video_id) const;
  void put(DigitalTwin twin);
  std::vector<std::string> ids() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, DigitalTwin, std::less<>> twins_;
  std::optional<std::filesystem::path> write_back_dir_;
};

enum class Tier { kVerified, kSubThreshold, kUncandidated };
std::string_view tier_name(Tier tier);

struct RankedEntry {
  std::string video_id;
  Tier tier = Tier::kUncandidated;
  double sort_score = 0.0;  // relevance when verified, coarse score otherwise
  double coarse_score = 0.0;
  std::optional<ReasonerVerdict> verdict;
  std::vector<MaskTrack> masks;
};

/// Every database video exactly once: verified, then sub_threshold, then
/// uncandidated.
struct FinalRanking {
  std::vector<RankedEntry> entries;
  std::vector<std::string> warnings;

  /// 1-based position of a video, or 0 when absent.
  std::size_t rank_of(std::string_view video_id) const;
};

json ranking_entries_to_json(const FinalRanking& ranking);

struct RerankOptions {
  double tau = kDefaultTau;
  std::size_t max_refinements = kDefaultMaxRefinements;
  int max_reasks = kDefaultReasks;
  bool persist_enrichment = true;
  bool parallel = false;
  Clock clock = system_clock();
};

/// The reasoner prompt for one turn (schema reason.v1).
std::string reasoning_prompt(std::string_view query, std::span<const SubQuery> subqueries,
                             const DigitalTwin& twin, const std::vector<std::string>& tool_names,
                             std::size_t refinements_left, const std::vector<std::string>& history);

/// Fixture key of one (query, video) reasoning exchange.
std::string reasoning_key(std::string_view query, std::string_view video_id);

/// Fine-grained stage over the first k entries of `coarse_ranking` (the full
/// coarse ordering of the database). Each candidate runs an exchange whose
/// turns either request refinement or return a verdict; verdicts with
/// relevance >= tau are verified, the rest and failed exchanges fall to
/// sub_threshold, and the remaining videos keep their coarse order.
FinalRanking rerank(std::string_view query, std::span<const SubQuery> subqueries,
                    std::span<const CoarseCandidate> coarse_ranking, std::size_t k,
                    TwinStore& twins, LlmClient& llm, const ToolRegistry& tools,
                    const RerankOptions& options = {});

}  // namespace rt2v
