#pragma once

#include <memory>
#include <string>

#include "rt2v/engine.hpp"

namespace rt2v {

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Read-only HTTP front end over an Engine:
///   POST /v1/retrieve {query, k?, tau?}        -> RetrievalResponse
///   GET  /v1/twins/{video_id}                  -> canonical twin document
///   GET  /v1/masks/{video_id}/{instance}/{frame} -> RLE text
///   GET  /health                               -> version document
/// Answers 503 until an engine is attached.
class Service {
 public:
  Service();
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  void attach(std::shared_ptr<Engine> engine);
  /// Builds the engine on a background thread; a failure is reported by
  /// /health with status 500.
  void load_async(EngineConfig config);

  /// Transport-independent dispatch, used by the HTTP binding.
  HttpReply handle(const std::string& method, const std::string& path, const std::string& body);

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on the bound socket until stop(); blocks.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rt2v
