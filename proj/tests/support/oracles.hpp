#pragma once

// Straightforward re-implementations used only to check the library. They
// trade speed for obviousness and share no code with core/.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rt2v/bench_io.hpp"
#include "rt2v/embedding.hpp"
#include "rt2v/index.hpp"
#include "rt2v/mask.hpp"
#include "rt2v/relations.hpp"
#include "rt2v/twin.hpp"

namespace oracle {

using rt2v::DigitalTwin;
using rt2v::MaskBitmap;

// Rank metrics, written from the definitions.
double recall(const std::vector<std::size_t>& ranks, std::size_t k);
double median(std::vector<std::size_t> ranks);
double mean(const std::vector<std::size_t>& ranks);
/// General average precision over a 0/1 relevance list of length K with
/// one relevant item at `rank`.
double average_precision(const std::vector<std::size_t>& ranks, std::size_t k);

// Mask metrics by pixel enumeration.
double iou(const MaskBitmap& a, const MaskBitmap& b);
std::vector<std::pair<int, int>> boundary_pixels(const MaskBitmap& m);
double boundary_f(const MaskBitmap& pred, const MaskBitmap& gt, double tolerance);

// Relation extraction by direct per-pair, per-frame evaluation.
std::vector<rt2v::RelationTuple> relations(const DigitalTwin& twin, const rt2v::RelationConfig& cfg = {});

/// Whether some (subject, reference) track pair realizes the combination,
/// decided from spatial properties alone.
bool combination_holds(const DigitalTwin& twin, const rt2v::QueryCombination& combo);

/// Compositional score as a double loop over raw (video, vector) rows.
struct Row {
  std::string video_id;
  std::vector<double> v;
};
double compositional_score(const std::vector<Row>& rows, const std::string& video_id,
                           const std::vector<rt2v::EmbeddingVector>& subqueries, bool use_min,
                           const std::vector<double>& weights = {});

// Random generators.
DigitalTwin random_twin(std::mt19937_64& rng, const std::string& video_id = "v");
MaskBitmap random_mask(std::mt19937_64& rng, std::uint32_t max_side = 64);
std::vector<double> random_unit(std::mt19937_64& rng, std::size_t dim);

/// A twin with one frame per entry of `positions`; each inner list holds
/// (instance_id, category, x, y, depth, size).
struct Placement {
  rt2v::TrackId id;
  std::string category;
  double x, y, depth, size;
};
DigitalTwin make_twin(const std::string& video_id, const std::vector<std::vector<Placement>>& frames);

}  // namespace oracle
