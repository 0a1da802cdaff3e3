#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rt2v/llm.hpp"
#include "rt2v/twin.hpp"

namespace rt2v {

/// Milliseconds since the Unix epoch; injectable so fixture runs are
/// reproducible.
using Clock = std::function<std::int64_t()>;
Clock system_clock();
Clock frozen_clock(std::int64_t value = 0);

using ToolParams = std::map<std::string, std::string>;

struct ToolRequest {
  const DigitalTwin& twin;
  TrackId instance_id;
  FrameIndex first_frame;
  FrameIndex last_frame;
  const ToolParams& params;
};

/// A specialist model behind a uniform contract: attribute text for one
/// instance over a frame range. Tools never modify the twin. A timeout is
/// reported by throwing rt2v::Error with ErrorKind::kToolTimeout.
class ToolClient {
 public:
  virtual ~ToolClient() = default;
  virtual std::string run(const ToolRequest& request) = 0;
};

class ToolRegistry {
 public:
  /// Throws kDuplicateId when the name is taken.
  void add(std::string name, std::shared_ptr<ToolClient> tool);
  ToolClient* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::shared_ptr<ToolClient>, std::less<>> tools_;
};

/// Deterministic captioner stand-in: restates category and known attributes.
class CaptionerStub final : public ToolClient {
 public:
  std::string run(const ToolRequest& request) override;
};

/// Deterministic action-recognizer stand-in: reports the dominant centroid
/// motion of the instance across the frame range.
class ActionRecognizerStub final : public ToolClient {
 public:
  std::string run(const ToolRequest& request) override;
};

/// Tool backed by an LLM-style endpoint (schema tool.v1); the response must
/// be {"text": <attribute description>}.
class LlmToolClient final : public ToolClient {
 public:
  LlmToolClient(std::string tool_name, std::shared_ptr<LlmClient> client);
  std::string run(const ToolRequest& request) override;

 private:
  std::string tool_name_;
  std::shared_ptr<LlmClient> client_;
};

/// "captioner" and "action_recognizer" stubs.
ToolRegistry default_stub_tools();

}  // namespace rt2v
