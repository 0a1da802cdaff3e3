#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rt2v/json_util.hpp"
#include "rt2v/twin.hpp"

namespace rt2v {

enum class Predicate {
  kLeftOf,
  kRightOf,
  kAbove,
  kBelow,
  kInFrontOf,
  kBehind,
  kLargerThan,
  kNear,
  kApproaching,
  kReceding,
};

inline constexpr std::array<Predicate, 10> kAllPredicates = {
    Predicate::kLeftOf,    Predicate::kRightOf, Predicate::kAbove,      Predicate::kBelow,
    Predicate::kInFrontOf, Predicate::kBehind,  Predicate::kLargerThan, Predicate::kNear,
    Predicate::kApproaching, Predicate::kReceding,
};

/// Wire name, e.g. "left_of".
std::string_view predicate_name(Predicate p);
std::optional<Predicate> parse_predicate(std::string_view name);
/// The predicate whose truth on (b, a) equals this one on (a, b), if any.
std::optional<Predicate> converse(Predicate p);

struct RelationTuple {
  TrackId subject_id = 0;
  TrackId object_id = 0;
  Predicate predicate = Predicate::kLeftOf;
  double support = 0.0;  // fraction of co-occurring frames, in (0,1]

  bool operator==(const RelationTuple&) const = default;
};

struct RelationConfig {
  double axis_margin = 0.05;
  double depth_margin = 0.05;
  double near_radius = 0.2;
  double size_ratio = 1.5;
  double support_threshold = 0.5;
  double motion_delta = 0.1;

  /// Throws kInvalidArgument unless all values are positive and the support
  /// threshold lies in (0,1].
  void validate() const;
};

/// Video-level relation tuples for every ordered pair of co-occurring tracks,
/// sorted by (subject_id, object_id, predicate declaration order).
///
/// Static predicates are evaluated per frame and kept when their support
/// reaches the threshold. approaching/receding compare the centroid distance
/// at the first and last co-occurrence and are emitted with support 1.
std::vector<RelationTuple> extract_relations(const DigitalTwin& twin,
                                             const RelationConfig& cfg = {});

using RelationMap = std::map<std::string, std::vector<RelationTuple>>;

json relations_to_json(const RelationMap& relations);
RelationMap relations_from_json(const json& doc);

}  // namespace rt2v
