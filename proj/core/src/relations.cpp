#include "rt2v/relations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "rt2v/error.hpp"

namespace rt2v {

std::string_view predicate_name(Predicate p) {
  switch (p) {
    case Predicate::kLeftOf: return "left_of";
    case Predicate::kRightOf: return "right_of";
    case Predicate::kAbove: return "above";
    case Predicate::kBelow: return "below";
    case Predicate::kInFrontOf: return "in_front_of";
    case Predicate::kBehind: return "behind";
    case Predicate::kLargerThan: return "larger_than";
    case Predicate::kNear: return "near";
    case Predicate::kApproaching: return "approaching";
    case Predicate::kReceding: return "receding";
  }
  return "";
}

std::optional<Predicate> parse_predicate(std::string_view name) {
  for (Predicate p : kAllPredicates) {
    if (predicate_name(p) == name) return p;
  }
  return std::nullopt;
}

std::optional<Predicate> converse(Predicate p) {
  switch (p) {
    case Predicate::kLeftOf: return Predicate::kRightOf;
    case Predicate::kRightOf: return Predicate::kLeftOf;
    case Predicate::kAbove: return Predicate::kBelow;
    case Predicate::kBelow: return Predicate::kAbove;
    case Predicate::kInFrontOf: return Predicate::kBehind;
    case Predicate::kBehind: return Predicate::kInFrontOf;
    case Predicate::kNear: return Predicate::kNear;
    case Predicate::kApproaching: return Predicate::kApproaching;
    case Predicate::kReceding: return Predicate::kReceding;
    case Predicate::kLargerThan: return std::nullopt;
  }
  return std::nullopt;
}

void RelationConfig::validate() const {
  for (double v : {axis_margin, depth_margin, near_radius, size_ratio, support_threshold,
                   motion_delta}) {
    if (!(std::isfinite(v) && v > 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "relation config values must be positive");
    }
  }
  if (support_threshold > 1.0) {
    throw Error(ErrorKind::kInvalidArgument, "support threshold must lie in (0,1]");
  }
}

namespace {

constexpr std::size_t kStaticCount = 8;  // predicates before the motion pair

double centroid_distance(const SpatialProps& a, const SpatialProps& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Indexed by the static predicates' declaration order.
std::array<bool, kStaticCount> static_predicates(const SpatialProps& a, const SpatialProps& b,
                                                 const RelationConfig& cfg) {
  return {
      a.x + cfg.axis_margin < b.x,
      b.x + cfg.axis_margin < a.x,
      a.y + cfg.axis_margin < b.y,
      b.y + cfg.axis_margin < a.y,
      a.depth + cfg.depth_margin < b.depth,
      b.depth + cfg.depth_margin < a.depth,
      a.size > cfg.size_ratio * b.size,
      centroid_distance(a, b) < cfg.near_radius,
  };
}

}  // namespace

std::vector<RelationTuple> extract_relations(const DigitalTwin& twin, const RelationConfig& cfg) {
  cfg.validate();

  std::vector<std::size_t> order(twin.frames.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return twin.frames[a].frame_index < twin.frames[b].frame_index;
  });

  const std::vector<TrackId> tracks = twin.track_ids();
  std::unordered_map<TrackId, std::size_t> slot;
  for (std::size_t i = 0; i < tracks.size(); ++i) slot[tracks[i]] = i;

  // presence[f][t] points at track t's spatial props in the f-th ordered frame.
  std::vector<std::vector<const SpatialProps*>> presence(
      order.size(), std::vector<const SpatialProps*>(tracks.size(), nullptr));
  for (std::size_t f = 0; f < order.size(); ++f) {
    for (const auto& inst : twin.frames[order[f]].instances) {
      presence[f][slot[inst.instance_id]] = &inst.spatial;
    }
  }

  std::vector<RelationTuple> out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < tracks.size(); ++j) {
      if (i == j) continue;
      std::array<std::size_t, kStaticCount> hits{};
      std::size_t cooccur = 0;
      const SpatialProps* first_a = nullptr;
      const SpatialProps* first_b = nullptr;
      const SpatialProps* last_a = nullptr;
      const SpatialProps* last_b = nullptr;
      for (const auto& frame : presence) {
        const SpatialProps* a = frame[i];
        const SpatialProps* b = frame[j];
        if (a == nullptr || b == nullptr) continue;
        ++cooccur;
        if (first_a == nullptr) {
          first_a = a;
          first_b = b;
        }
        last_a = a;
        last_b = b;
        const auto holds = static_predicates(*a, *b, cfg);
        for (std::size_t p = 0; p < kStaticCount; ++p) hits[p] += holds[p] ? 1 : 0;
      }
      if (cooccur == 0) continue;

      for (std::size_t p = 0; p < kStaticCount; ++p) {
        if (hits[p] == 0) continue;
        const double support = static_cast<double>(hits[p]) / static_cast<double>(cooccur);
        if (support >= cfg.support_threshold) {
          out.push_back({tracks[i], tracks[j], kAllPredicates[p], support});
        }
      }
      const double d0 = centroid_distance(*first_a, *first_b);
      const double d1 = centroid_distance(*last_a, *last_b);
      if (d1 < d0 - cfg.motion_delta) {
        out.push_back({tracks[i], tracks[j], Predicate::kApproaching, 1.0});
      } else if (d1 > d0 + cfg.motion_delta) {
        out.push_back({tracks[i], tracks[j], Predicate::kReceding, 1.0});
      }
    }
  }
  return out;
}

json relations_to_json(const RelationMap& relations) {
  json doc = json::object();
  for (const auto& [video_id, tuples] : relations) {
    json arr = json::array();
    for (const auto& t : tuples) {
      arr.push_back({{"subject_id", t.subject_id},
                     {"object_id", t.object_id},
                     {"predicate", predicate_name(t.predicate)},
                     {"support", t.support}});
    }
    doc[video_id] = std::move(arr);
  }
  return {{"format_version", 1}, {"relations", std::move(doc)}};
}

RelationMap relations_from_json(const json& doc) {
  RelationMap out;
  const json& rel = require_field(doc, "relations", "relations document");
  if (!rel.is_object()) throw Error(ErrorKind::kMalformedJson, "relations must be an object");
  for (const auto& [video_id, arr] : rel.items()) {
    auto& tuples = out[video_id];
    for (const json& t : arr) {
      const std::string name = require_string(t, "predicate", "relation");
      auto p = parse_predicate(name);
      if (!p) throw Error(ErrorKind::kMalformedJson, "unknown predicate \"" + name + "\"");
      tuples.push_back({require_unsigned(t, "subject_id", "relation"),
                        require_unsigned(t, "object_id", "relation"), *p,
                        require_number(t, "support", "relation")});
    }
  }
  return out;
}

}  // namespace rt2v
