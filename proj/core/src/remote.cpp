#include "rt2v/remote.hpp"

#include <algorithm>
#include <optional>

#include "rt2v/error.hpp"

namespace rt2v {

RemoteEmbeddingProvider::RemoteEmbeddingProvider(HttpEndpoint endpoint, std::string model,
                                                 std::size_t dim)
    : endpoint_(std::move(endpoint)), model_(std::move(model)), dim_(dim) {
  if (dim_ == 0) throw Error(ErrorKind::kInvalidArgument, "embedding dim must be positive");
}

std::vector<EmbeddingVector> RemoteEmbeddingProvider::embed_texts(
    std::span<const std::string> texts) {
  const json request = {{"model", model_},
                        {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const std::string body = post_json(endpoint_, canonical_json(request));

  json doc;
  try {
    doc = parse_json(body);
  } catch (const Error& e) {
    throw Error(ErrorKind::kProvider, std::string("embedding response: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("data") || !doc["data"].is_array()) {
    throw Error(ErrorKind::kProvider, "embedding response lacks a data array");
  }

  std::vector<std::optional<EmbeddingVector>> slots(texts.size());
  for (const json& item : doc["data"]) {
    if (!item.is_object() || !item.contains("index") || !item["index"].is_number_unsigned() ||
        !item.contains("embedding") || !item["embedding"].is_array()) {
      throw Error(ErrorKind::kProvider, "malformed embedding response item");
    }
    const auto idx = item["index"].get<std::size_t>();
    if (idx >= slots.size() || slots[idx]) {
      throw Error(ErrorKind::kProvider, "embedding response index out of range or repeated");
    }
    std::vector<double> values;
    for (const json& v : item["embedding"]) {
      if (!v.is_number()) throw Error(ErrorKind::kProvider, "non-numeric embedding entry");
      values.push_back(v.get<double>());
    }
    if (values.size() != dim_) {
      throw Error(ErrorKind::kDimensionMismatch, "remote embedding has dim " +
                                                     std::to_string(values.size()) +
                                                     ", expected " + std::to_string(dim_));
    }
    slots[idx] = EmbeddingVector::normalized(std::move(values));
  }

  std::vector<EmbeddingVector> out;
  out.reserve(slots.size());
  for (auto& s : slots) {
    if (!s) throw Error(ErrorKind::kProvider, "embedding response is missing an index");
    out.push_back(std::move(*s));
  }
  return out;
}

}  // namespace rt2v
