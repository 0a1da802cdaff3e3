#include "rt2v/decomposer.hpp"

#include <cmath>

namespace rt2v {

std::string_view subquery_kind_name(SubQueryKind kind) {
  switch (kind) {
    case SubQueryKind::kAttribute: return "attribute";
    case SubQueryKind::kSpatial: return "spatial";
    case SubQueryKind::kTemporal: return "temporal";
    case SubQueryKind::kAction: return "action";
  }
  return "";
}

std::optional<SubQueryKind> parse_subquery_kind(std::string_view name) {
  for (auto k : {SubQueryKind::kAttribute, SubQueryKind::kSpatial, SubQueryKind::kTemporal,
                 SubQueryKind::kAction}) {
    if (subquery_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

json subqueries_to_json(std::span<const SubQuery> subqueries) {
  json out = json::array();
  for (const auto& s : subqueries) {
    out.push_back({{"text", s.text}, {"kind", subquery_kind_name(s.kind)}, {"weight", s.weight}});
  }
  return out;
}

std::string decomposition_prompt(std::string_view query) {
  std::string prompt =
      "[decompose.v1]\n"
      "You split an implicit video search request into atomic, verifiable conditions.\n"
      "Each condition must be checkable against a structured scene description listing\n"
      "objects (category, attributes, position, depth, size) and their relations.\n"
      "Return ONLY a JSON array of 1 to 16 objects of the form\n"
      "  {\"text\": <explicit condition>, \"kind\": \"attribute\"|\"spatial\"|\"temporal\"|\"action\"}\n"
      "in the order the conditions appear in the request.\n\n"
      "Request: ";
  prompt.append(query);
  prompt.push_back('\n');
  return prompt;
}

namespace {

[[noreturn]] void schema_error(const std::string& why) { throw Error(ErrorKind::kSchema, why); }

}  // namespace

std::vector<SubQuery> parse_decomposition(std::string_view response) {
  json doc;
  try {
    doc = parse_json(response);
  } catch (const Error& e) {
    schema_error(std::string("response is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) schema_error("response must be a JSON array");
  if (doc.empty()) schema_error("response must contain at least one sub-query");
  if (doc.size() > kMaxSubQueries) {
    schema_error("response has " + std::to_string(doc.size()) + " sub-queries; at most " +
                 std::to_string(kMaxSubQueries) + " are allowed");
  }
  std::vector<SubQuery> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& item = doc[i];
    const std::string at = "item " + std::to_string(i);
    if (!item.is_object()) schema_error(at + " must be an object");
    if (!item.contains("text") || !item["text"].is_string() ||
        item["text"].get<std::string>().empty()) {
      schema_error(at + " needs a non-empty string \"text\"");
    }
    if (!item.contains("kind") || !item["kind"].is_string()) {
      schema_error(at + " needs a string \"kind\"");
    }
    const auto kind = parse_subquery_kind(item["kind"].get<std::string>());
    if (!kind) schema_error(at + " has unknown kind \"" + item["kind"].get<std::string>() + "\"");
    SubQuery sq{item["text"].get<std::string>(), *kind, 1.0};
    if (item.contains("weight")) {
      if (!item["weight"].is_number() || !(item["weight"].get<double>() > 0.0) ||
          !std::isfinite(item["weight"].get<double>())) {
        schema_error(at + " weight must be a positive number");
      }
      sq.weight = item["weight"].get<double>();
    }
    out.push_back(std::move(sq));
  }
  return out;
}

std::vector<SubQuery> decompose(std::string_view query, LlmClient& client, int max_reasks) {
  if (query.empty()) throw Error(ErrorKind::kInvalidArgument, "query must be non-empty");
  const std::string base = decomposition_prompt(query);
  std::string prompt = base;
  std::vector<std::string> raw;
  std::string last_error;
  for (int attempt = 0; attempt <= max_reasks; ++attempt) {
    LlmRequest req{std::string(kDecomposeSchema), prompt, std::string(query),
                   static_cast<std::size_t>(attempt)};
    raw.push_back(client.complete(req));
    try {
      return parse_decomposition(raw.back());
    } catch (const Error& e) {
      last_error = e.what();
      prompt = base + "\nYour previous answer was rejected: " + last_error +
               "\nAnswer again with a valid JSON array.\n";
    }
  }
  throw DecompositionError("decomposition failed after " + std::to_string(raw.size()) +
                               " attempt(s): " + last_error,
                           std::move(raw));
}

std::vector<EmbeddingVector> embed_subqueries(std::span<const SubQuery> subqueries,
                                              EmbeddingProvider& provider,
                                              const ProjectionHead& query_head) {
  std::vector<std::string> texts;
  texts.reserve(subqueries.size());
  for (const auto& s : subqueries) texts.push_back(s.text);
  auto raw = provider.embed(texts);
  std::vector<EmbeddingVector> out;
  out.reserve(raw.size());
  for (const auto& v : raw) out.push_back(apply_projection(v, query_head));
  return out;
}

}  // namespace rt2v
