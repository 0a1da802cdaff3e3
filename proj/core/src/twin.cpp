#include "rt2v/twin.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "rt2v/error.hpp"

namespace rt2v {

const InstanceRecord* FrameRecord::find(TrackId id) const {
  for (const auto& inst : instances) {
    if (inst.instance_id == id) return &inst;
  }
  return nullptr;
}

std::vector<TrackId> DigitalTwin::track_ids() const {
  std::set<TrackId> ids;
  for (const auto& frame : frames) {
    for (const auto& inst : frame.instances) ids.insert(inst.instance_id);
  }
  return {ids.begin(), ids.end()};
}

bool DigitalTwin::has_track(TrackId id) const {
  return std::any_of(frames.begin(), frames.end(),
                     [id](const FrameRecord& f) { return f.find(id) != nullptr; });
}

std::string Violation::to_string() const {
  std::string s;
  if (frame_index) s += "frame " + std::to_string(*frame_index) + ": ";
  if (instance_id) s += "instance " + std::to_string(*instance_id) + ": ";
  return s + rule;
}

namespace {

bool unit_interval(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

}  // namespace

std::vector<Violation> validate_twin(const DigitalTwin& twin) {
  std::vector<Violation> out;
  auto report = [&out](std::optional<FrameIndex> f, std::optional<TrackId> i, std::string rule) {
    out.push_back({f, i, std::move(rule)});
  };

  if (twin.video_id.empty()) report({}, {}, "video_id must be non-empty");
  if (!(std::isfinite(twin.fps) && twin.fps > 0.0)) report({}, {}, "fps must be finite and > 0");
  if (twin.width == 0 || twin.height == 0) report({}, {}, "width and height must be positive");
  if (twin.frames.empty()) report({}, {}, "twin must contain at least one frame");

  std::map<TrackId, std::string> category_of;
  for (std::size_t fi = 0; fi < twin.frames.size(); ++fi) {
    const FrameRecord& frame = twin.frames[fi];
    const FrameIndex idx = frame.frame_index;
    if (fi > 0) {
      const FrameRecord& prev = twin.frames[fi - 1];
      if (frame.frame_index <= prev.frame_index) {
        report(idx, {}, "frame_index must be strictly increasing");
      }
      if (!(frame.timestamp_s >= prev.timestamp_s)) {
        report(idx, {}, "timestamps must be non-decreasing");
      }
    }
    if (!(std::isfinite(frame.timestamp_s) && frame.timestamp_s >= 0.0)) {
      report(idx, {}, "timestamp_s must be finite and >= 0");
    }

    std::set<TrackId> seen;
    for (const InstanceRecord& inst : frame.instances) {
      const TrackId id = inst.instance_id;
      if (!seen.insert(id).second) report(idx, id, "instance_id must be unique within a frame");
      if (inst.category.empty()) report(idx, id, "category must be non-empty");
      if (inst.mask_ref.empty()) report(idx, id, "mask_ref must be non-empty");
      const SpatialProps& s = inst.spatial;
      if (!unit_interval(s.x)) report(idx, id, "SpatialProps.x must lie in [0,1]");
      if (!unit_interval(s.y)) report(idx, id, "SpatialProps.y must lie in [0,1]");
      if (!unit_interval(s.depth)) report(idx, id, "SpatialProps.depth must lie in [0,1]");
      if (!unit_interval(s.size)) report(idx, id, "SpatialProps.size must lie in [0,1]");

      auto [it, inserted] = category_of.emplace(id, inst.category);
      if (!inserted && it->second != inst.category) {
        report(idx, id,
               "category must be stable across frames (was \"" + it->second + "\", now \"" +
                   inst.category + "\")");
      }
    }
  }
  return out;
}

json twin_to_json(const DigitalTwin& twin) {
  json frames = json::array();
  for (const auto& frame : twin.frames) {
    json instances = json::array();
    for (const auto& inst : frame.instances) {
      instances.push_back({
          {"instance_id", inst.instance_id},
          {"category", inst.category},
          {"attributes", inst.attributes},
          {"mask_ref", inst.mask_ref},
          {"spatial",
           {{"x", inst.spatial.x},
            {"y", inst.spatial.y},
            {"depth", inst.spatial.depth},
            {"size", inst.spatial.size}}},
      });
    }
    frames.push_back({{"frame_index", frame.frame_index},
                      {"timestamp_s", frame.timestamp_s},
                      {"instances", std::move(instances)}});
  }
  return {{"video_id", twin.video_id},
          {"fps", twin.fps},
          {"width", twin.width},
          {"height", twin.height},
          {"frames", std::move(frames)}};
}

DigitalTwin twin_from_json(const json& doc) {
  DigitalTwin twin;
  twin.video_id = require_string(doc, "video_id", "twin");
  twin.fps = require_number(doc, "fps", "twin");
  const auto width = require_unsigned(doc, "width", "twin");
  const auto height = require_unsigned(doc, "height", "twin");
  if (width > UINT32_MAX || height > UINT32_MAX) {
    throw Error(ErrorKind::kMalformedJson, "twin dimensions out of range");
  }
  twin.width = static_cast<std::uint32_t>(width);
  twin.height = static_cast<std::uint32_t>(height);

  for (const json& f : require_array(doc, "frames", "twin")) {
    FrameRecord frame;
    frame.frame_index = require_unsigned(f, "frame_index", "frame");
    frame.timestamp_s = require_number(f, "timestamp_s", "frame");
    for (const json& i : require_array(f, "instances", "frame")) {
      InstanceRecord inst;
      inst.instance_id = require_unsigned(i, "instance_id", "instance");
      inst.category = require_string(i, "category", "instance");
      for (const json& a : require_array(i, "attributes", "instance")) {
        if (!a.is_string()) {
          throw Error(ErrorKind::kMalformedJson, "instance.attributes must hold strings");
        }
        inst.attributes.push_back(a.get<std::string>());
      }
      inst.mask_ref = require_string(i, "mask_ref", "instance");
      const json& s = require_field(i, "spatial", "instance");
      inst.spatial.x = require_number(s, "x", "spatial");
      inst.spatial.y = require_number(s, "y", "spatial");
      inst.spatial.depth = require_number(s, "depth", "spatial");
      inst.spatial.size = require_number(s, "size", "spatial");
      frame.instances.push_back(std::move(inst));
    }
    twin.frames.push_back(std::move(frame));
  }
  return twin;
}

std::string serialize_twin(const DigitalTwin& twin) { return canonical_json(twin_to_json(twin)); }

DigitalTwin parse_twin(std::string_view text) {
  DigitalTwin twin = twin_from_json(parse_json(text));
  auto violations = validate_twin(twin);
  if (!violations.empty()) {
    std::string msg = "twin \"" + twin.video_id + "\" violates invariants:";
    for (const auto& v : violations) msg += "\n  " + v.to_string();
    throw Error(ErrorKind::kInvariantViolation, msg);
  }
  return twin;
}

}  // namespace rt2v
