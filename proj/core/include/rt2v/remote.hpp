#pragma once

#include <chrono>
#include <string>

#include "rt2v/embedding.hpp"

namespace rt2v {

/// Remote call settings shared by the embedding, LLM, and tool clients.
struct HttpEndpoint {
  std::string url;      // http://host[:port]/path
  std::string api_key;  // sent as a bearer token when non-empty
  std::chrono::milliseconds timeout{30000};
  int retries = 2;
  std::chrono::milliseconds backoff{250};  // doubled after each failed attempt
};

/// POSTs a JSON body and returns the response body. Transport failures, 429
/// and 5xx responses are retried; after the last attempt a kProvider error is
/// raised carrying the final status.
std::string post_json(const HttpEndpoint& endpoint, const std::string& body);

/// Client for `POST {"model", "input": [...]}` ->
/// `{"data": [{"index": n, "embedding": [...]}, ...]}`. Returned vectors are
/// re-normalized.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(HttpEndpoint endpoint, std::string model, std::size_t dim);

  std::size_t dim() const override { return dim_; }
  std::string id() const override { return "remote:" + model_ + "/" + std::to_string(dim_); }

 protected:
  std::vector<EmbeddingVector> embed_texts(std::span<const std::string> texts) override;

 private:
  HttpEndpoint endpoint_;
  std::string model_;
  std::size_t dim_;
};

}  // namespace rt2v
