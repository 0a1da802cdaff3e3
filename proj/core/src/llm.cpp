#include "rt2v/llm.hpp"

#include <algorithm>

#include "rt2v/error.hpp"

namespace rt2v {

RemoteLlmClient::RemoteLlmClient(HttpEndpoint endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {}

std::string RemoteLlmClient::complete(const LlmRequest& request) {
  const json body = {
      {"model", model_},
      {"messages",
       json::array({{{"role", "system"},
                     {"content", "Respond with a single JSON document conforming to schema " +
                                     request.schema_id + "."}},
                    {{"role", "user"}, {"content", request.prompt}}})},
      {"response_format", {{"type", "json_object"}}},
  };
  const std::string text = post_json(endpoint_, canonical_json(body));
  json doc;
  try {
    doc = parse_json(text);
  } catch (const Error& e) {
    throw Error(ErrorKind::kProvider, std::string("LLM response: ") + e.what());
  }
  const json* content = nullptr;
  if (doc.is_object() && doc.contains("choices") && doc["choices"].is_array() &&
      !doc["choices"].empty()) {
    const json& choice = doc["choices"][0];
    if (choice.contains("message") && choice["message"].contains("content")) {
      content = &choice["message"]["content"];
    }
  }
  if (content == nullptr || !content->is_string()) {
    throw Error(ErrorKind::kProvider, "LLM response lacks choices[0].message.content");
  }
  return content->get<std::string>();
}

FixtureLlmClient::FixtureLlmClient(std::filesystem::path root) : root_(std::move(root)) {}

std::string FixtureLlmClient::subdir_for(std::string_view schema_id) {
  if (schema_id == kDecomposeSchema) return "decompositions";
  if (schema_id == kReasonSchema) return "reasoner";
  if (schema_id == kToolSchema) return "tools";
  throw Error(ErrorKind::kInvalidArgument, "no fixture directory for schema " +
                                               std::string(schema_id));
}

std::filesystem::path FixtureLlmClient::fixture_path(const std::filesystem::path& root,
                                                     std::string_view schema_id,
                                                     std::string_view fixture_key) {
  return root / subdir_for(schema_id) / (fnv1a64_hex(fixture_key) + ".json");
}

std::string FixtureLlmClient::complete(const LlmRequest& request) {
  auto path = fixture_path(root_, request.schema_id, request.fixture_key);
  if (!std::filesystem::exists(path)) {
    path = root_ / subdir_for(request.schema_id) / "default.json";
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorKind::kNotFound, "no " + request.schema_id + " fixture for key \"" +
                                            request.fixture_key + "\"");
    }
  }
  const json doc = parse_json(read_text_file(path));
  const json& responses = require_array(doc, "responses", "fixture");
  if (responses.empty()) {
    throw Error(ErrorKind::kMalformedJson, "fixture " + path.string() + " has no responses");
  }
  const json& r = responses[std::min(request.turn, responses.size() - 1)];
  return r.is_string() ? r.get<std::string>() : canonical_json(r);
}

void write_llm_fixture(const std::filesystem::path& root, std::string_view schema_id,
                       std::string_view fixture_key, const json& responses) {
  const json doc = {{"key", fixture_key}, {"responses", responses}};
  write_text_file(FixtureLlmClient::fixture_path(root, schema_id, fixture_key),
                  canonical_json(doc) + "\n");
}

std::string ScriptedLlmClient::complete(const LlmRequest& request) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  return script_(request);
}

std::vector<LlmRequest> ScriptedLlmClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

}  // namespace rt2v
