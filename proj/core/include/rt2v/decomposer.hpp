#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rt2v/embedding.hpp"
#include "rt2v/error.hpp"
#include "rt2v/llm.hpp"

namespace rt2v {

inline constexpr std::size_t kMaxSubQueries = 16;
inline constexpr int kDefaultReasks = 2;

enum class SubQueryKind { kAttribute, kSpatial, kTemporal, kAction };
std::string_view subquery_kind_name(SubQueryKind kind);
std::optional<SubQueryKind> parse_subquery_kind(std::string_view name);

/// One atomic explicit condition of an implicit query.
struct SubQuery {
  std::string text;
  SubQueryKind kind = SubQueryKind::kAttribute;
  double weight = 1.0;

  bool operator==(const SubQuery&) const = default;
};

json subqueries_to_json(std::span<const SubQuery> subqueries);

/// Raised when every attempt produced a schema-invalid answer.
class DecompositionError : public Error {
 public:
  DecompositionError(const std::string& message, std::vector<std::string> raw_responses)
      : Error(ErrorKind::kDecomposition, message), raw_responses_(std::move(raw_responses)) {}

  const std::vector<std::string>& raw_responses() const { return raw_responses_; }

 private:
  std::vector<std::string> raw_responses_;
};

/// The versioned decomposition prompt for `query`.
std::string decomposition_prompt(std::string_view query);

/// Validates a response against the schema: a JSON array of 1..16 objects
/// {text: non-empty string, kind: attribute|spatial|temporal|action,
/// weight?: positive number}. Throws kSchema with a readable reason.
std::vector<SubQuery> parse_decomposition(std::string_view response);

/// Asks the client, re-asking up to `max_reasks` times with the validation
/// error appended to the prompt.
std::vector<SubQuery> decompose(std::string_view query, LlmClient& client,
                                int max_reasks = kDefaultReasks);

/// Provider embedding followed by the query head, one vector per sub-query.
std::vector<EmbeddingVector> embed_subqueries(std::span<const SubQuery> subqueries,
                                              EmbeddingProvider& provider,
                                              const ProjectionHead& query_head);

}  // namespace rt2v
