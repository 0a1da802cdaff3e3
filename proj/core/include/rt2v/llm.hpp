#pragma once

#include <cstddef>
#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "rt2v/remote.hpp"

namespace rt2v {

// Response schema ids; each names a versioned prompt/response contract.
inline constexpr std::string_view kDecomposeSchema = "decompose.v1";
inline constexpr std::string_view kReasonSchema = "reason.v1";
inline constexpr std::string_view kToolSchema = "tool.v1";

struct LlmRequest {
  std::string schema_id;
  std::string prompt;
  /// Stable identity of the exchange (query text, or query + video) that
  /// fixture clients key on; remote clients ignore it.
  std::string fixture_key;
  /// Zero-based index of this call within the exchange, re-asks included.
  std::size_t turn = 0;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  /// Raw response text. Transport/lookup failures throw rt2v::Error.
  virtual std::string complete(const LlmRequest& request) = 0;
};

/// Chat-completions client: POST {model, messages, response_format} and read
/// choices[0].message.content.
class RemoteLlmClient final : public LlmClient {
 public:
  RemoteLlmClient(HttpEndpoint endpoint, std::string model);
  std::string complete(const LlmRequest& request) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_;
};

/// Reads `<root>/<subdir>/<fnv1a64_hex(fixture_key)>.json`, a document
/// `{"key": ..., "responses": [...]}`; the response for turn t is
/// responses[min(t, n-1)], rendered as canonical JSON. When the keyed file is
/// absent, `<subdir>/default.json` is used if present.
class FixtureLlmClient final : public LlmClient {
 public:
  explicit FixtureLlmClient(std::filesystem::path root);
  std::string complete(const LlmRequest& request) override;

  static std::string subdir_for(std::string_view schema_id);
  static std::filesystem::path fixture_path(const std::filesystem::path& root,
                                            std::string_view schema_id,
                                            std::string_view fixture_key);

 private:
  std::filesystem::path root_;
};

/// Writes a fixture in the layout FixtureLlmClient reads.
void write_llm_fixture(const std::filesystem::path& root, std::string_view schema_id,
                       std::string_view fixture_key, const json& responses);

/// Test double answering from a callback; records every request.
class ScriptedLlmClient final : public LlmClient {
 public:
  using Script = std::function<std::string(const LlmRequest&)>;
  explicit ScriptedLlmClient(Script script) : script_(std::move(script)) {}

  std::string complete(const LlmRequest& request) override;
  std::vector<LlmRequest> requests() const;

 private:
  Script script_;
  mutable std::mutex mu_;
  std::vector<LlmRequest> requests_;
};

}  // namespace rt2v
