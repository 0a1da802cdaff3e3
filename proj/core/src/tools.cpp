#include "rt2v/tools.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "rt2v/error.hpp"

namespace rt2v {

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

Clock frozen_clock(std::int64_t value) {
  return [value] { return value; };
}

void ToolRegistry::add(std::string name, std::shared_ptr<ToolClient> tool) {
  if (!tool) throw Error(ErrorKind::kInvalidArgument, "tool \"" + name + "\" is null");
  auto [it, inserted] = tools_.emplace(std::move(name), std::move(tool));
  if (!inserted) throw Error(ErrorKind::kDuplicateId, "tool \"" + it->first + "\" already registered");
}

ToolClient* ToolRegistry::find(std::string_view name) const {
  auto it = tools_.find(name);
  return it == tools_.end() ? nullptr : it->second.get();
}

std::vector<std::string> ToolRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, tool] : tools_) out.push_back(name);
  return out;
}

namespace {

std::vector<const InstanceRecord*> occurrences(const ToolRequest& r) {
  std::vector<const InstanceRecord*> out;
  for (const auto& frame : r.twin.frames) {
    if (frame.frame_index < r.first_frame || frame.frame_index > r.last_frame) continue;
    if (const auto* inst = frame.find(r.instance_id)) out.push_back(inst);
  }
  return out;
}

std::string frame_span(const ToolRequest& r) {
  return "frames " + std::to_string(r.first_frame) + "-" + std::to_string(r.last_frame);
}

}  // namespace

std::string CaptionerStub::run(const ToolRequest& request) {
  const auto occ = occurrences(request);
  if (occ.empty()) return "not visible in " + frame_span(request);
  std::string text = "close-up: " + occ.front()->category;
  std::vector<std::string> seen;
  for (const auto* inst : occ) {
    for (const auto& a : inst->attributes) {
      if (std::find(seen.begin(), seen.end(), a) == seen.end()) seen.push_back(a);
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) text += (i == 0 ? " that is " : ", ") + seen[i];
  return text + " in " + frame_span(request);
}

std::string ActionRecognizerStub::run(const ToolRequest& request) {
  const auto occ = occurrences(request);
  if (occ.size() < 2) return "stationary in " + frame_span(request);
  const double dx = occ.back()->spatial.x - occ.front()->spatial.x;
  const double dy = occ.back()->spatial.y - occ.front()->spatial.y;
  const double dd = occ.back()->spatial.depth - occ.front()->spatial.depth;
  constexpr double kStill = 0.05;
  std::string motion;
  if (std::abs(dx) >= std::abs(dy) && std::abs(dx) >= std::abs(dd) && std::abs(dx) > kStill) {
    motion = dx > 0 ? "moving right" : "moving left";
  } else if (std::abs(dy) >= std::abs(dd) && std::abs(dy) > kStill) {
    motion = dy > 0 ? "moving down" : "moving up";
  } else if (std::abs(dd) > kStill) {
    motion = dd > 0 ? "moving away from the camera" : "moving toward the camera";
  } else {
    motion = "stationary";
  }
  return motion + " in " + frame_span(request);
}

LlmToolClient::LlmToolClient(std::string tool_name, std::shared_ptr<LlmClient> client)
    : tool_name_(std::move(tool_name)), client_(std::move(client)) {}

std::string LlmToolClient::run(const ToolRequest& request) {
  json params = json::object();
  for (const auto& [k, v] : request.params) params[k] = v;
  const json payload = {{"tool", tool_name_},
                        {"video_id", request.twin.video_id},
                        {"instance_id", request.instance_id},
                        {"first_frame", request.first_frame},
                        {"last_frame", request.last_frame},
                        {"params", params}};
  const std::string prompt = "[tool.v1]\nDescribe the requested instance. Return "
                             "{\"text\": <description>}.\n" +
                             canonical_json(payload) + "\n";
  const std::string key = tool_name_ + "\t" + request.twin.video_id + "\t" +
                          std::to_string(request.instance_id);
  const json doc = parse_json(client_->complete({std::string(kToolSchema), prompt, key, 0}));
  return require_string(doc, "text", "tool response");
}

ToolRegistry default_stub_tools() {
  ToolRegistry registry;
  registry.add("action_recognizer", std::make_shared<ActionRecognizerStub>());
  registry.add("captioner", std::make_shared<CaptionerStub>());
  return registry;
}

}  // namespace rt2v
