#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rt2v/json_util.hpp"

namespace rt2v {

using TrackId = std::uint64_t;
using FrameIndex = std::uint64_t;

/// Normalized spatial properties of one instance in one frame. Every field
/// lies in [0,1]; depth 0 is nearest to the camera, size is the fraction of
/// the frame area covered by the mask.
struct SpatialProps {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;
  double size = 0.0;

  bool operator==(const SpatialProps&) const = default;
};

struct InstanceRecord {
  TrackId instance_id = 0;
  std::string category;
  std::vector<std::string> attributes;
  std::string mask_ref;  // relative to the benchmark mask directory
  SpatialProps spatial;

  bool operator==(const InstanceRecord&) const = default;
};

struct FrameRecord {
  FrameIndex frame_index = 0;
  double timestamp_s = 0.0;
  std::vector<InstanceRecord> instances;

  bool operator==(const FrameRecord&) const = default;

  const InstanceRecord* find(TrackId id) const;
};

/// Per-video structured scene document: ordered frames of instance records.
/// Instance ids are track ids; the set of distinct ids defines the tracks.
struct DigitalTwin {
  std::string video_id;
  double fps = 1.0;
  std::uint32_t width = 1;
  std::uint32_t height = 1;
  std::vector<FrameRecord> frames;

  bool operator==(const DigitalTwin&) const = default;

  /// Distinct instance ids in ascending order.
  std::vector<TrackId> track_ids() const;
  bool has_track(TrackId id) const;
};

struct Violation {
  std::optional<FrameIndex> frame_index;
  std::optional<TrackId> instance_id;
  std::string rule;

  std::string to_string() const;
};

/// Checks every model invariant. Never throws; an empty result means valid.
std::vector<Violation> validate_twin(const DigitalTwin& twin);

json twin_to_json(const DigitalTwin& twin);
/// Structural decode only (kMalformedJson / kMissingField); no invariant check.
DigitalTwin twin_from_json(const json& doc);

/// Canonical JSON document for a twin.
std::string serialize_twin(const DigitalTwin& twin);
/// Decodes and validates; invariant failures raise kInvariantViolation.
DigitalTwin parse_twin(std::string_view text);

}  // namespace rt2v
