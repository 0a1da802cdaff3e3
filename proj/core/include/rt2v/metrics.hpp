#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rt2v/json_util.hpp"
#include "rt2v/mask.hpp"
#include "rt2v/twin.hpp"

namespace rt2v {

/// Rank cut-offs reported for R@K and AP@K.
inline const std::vector<std::size_t> kDefaultMetricKs = {1, 5, 10, 50, 100};

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k);
double median_rank(std::span<const std::size_t> ranks);
double mean_rank(std::span<const std::size_t> ranks);
/// One relevant item per query: AP@K of a query is 1/rank when rank <= K.
double ap_at_k(std::span<const std::size_t> ranks, std::size_t k);
/// Mean of AP@K over `ks`.
double mean_average_precision(std::span<const std::size_t> ranks,
                              std::span<const std::size_t> ks = kDefaultMetricKs);

/// Intersection over union; 1 when both masks are empty.
double region_similarity(const MaskBitmap& pred, const MaskBitmap& gt);

/// ceil(0.008 * image diagonal).
std::uint32_t default_boundary_tolerance(std::uint32_t width, std::uint32_t height);

/// Foreground pixels with a background 4-neighbour or lying on the image edge.
MaskBitmap boundary_map(const MaskBitmap& mask);

/// Boundary F-measure: precision is the fraction of predicted boundary pixels
/// within `tolerance_px` (Euclidean) of a ground-truth boundary pixel, recall
/// the converse. 1 when both boundaries are empty, 0 when exactly one is.
double contour_accuracy(const MaskBitmap& pred, const MaskBitmap& gt,
                        std::optional<std::uint32_t> tolerance_px = std::nullopt);

using MaskKey = std::pair<TrackId, FrameIndex>;  // (object, frame)
using MaskSet = std::map<MaskKey, MaskBitmap>;

struct JfScore {
  double j = 0.0;
  double f = 0.0;
};

/// J and F averaged over every ground-truth (object, frame) pair; a missing
/// prediction scores 0 on that pair. No ground truth yields (1, 1).
JfScore video_jf(const MaskSet& pred, const MaskSet& gt);

struct QueryOutcome {
  std::string query_id;
  std::size_t rank = 0;  // 1-based position of the ground-truth video
  MaskSet predicted;
  MaskSet ground_truth;
};

struct QueryMetricRow {
  std::string query_id;
  std::size_t rank = 0;
  double j = 0.0;
  double f = 0.0;
};

struct MetricReport {
  std::vector<std::size_t> ks;
  std::vector<double> recall;  // aligned with ks
  std::vector<double> ap;      // aligned with ks
  double median_rank = 0.0;
  double mean_rank = 0.0;
  double map = 0.0;
  double mean_j = 0.0;
  double mean_f = 0.0;
  std::vector<QueryMetricRow> queries;

  json to_json() const;
  /// Aligned-column table: one header row of metric names, one value row,
  /// then the per-query table.
  std::string to_table() const;
};

MetricReport compute_report(std::span<const QueryOutcome> outcomes,
                            std::span<const std::size_t> ks = kDefaultMetricKs);

}  // namespace rt2v
