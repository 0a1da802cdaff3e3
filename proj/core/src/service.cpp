#include "rt2v/service.hpp"

#include <atomic>
#include <charconv>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "rt2v/error.hpp"

namespace rt2v {

struct Service::Impl {
  std::mutex mu;
  std::shared_ptr<Engine> engine;
  std::optional<std::string> load_error;
  std::thread loader;
  httplib::Server server;
};

namespace {

HttpReply json_reply(int status, const json& doc) { return {status, "application/json", canonical_json(doc)}; }

HttpReply error_reply(int status, std::string_view kind, const std::string& message) {
  return json_reply(status, {{"error", {{"kind", kind}, {"message", message}}}});
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kMalformedJson:
    case ErrorKind::kMissingField: return 422;
    case ErrorKind::kProvider:
    case ErrorKind::kDecomposition: return 502;
    default: return 500;
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 1;
  while (start <= path.size()) {
    const std::size_t end = std::min(path.find('/', start), path.size());
    parts.push_back(path.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

template <typename T>
std::optional<T> parse_uint(const std::string& s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

HttpReply retrieve(Engine& engine, const std::string& body) {
  json doc;
  try {
    doc = parse_json(body);
  } catch (const Error& e) {
    return error_reply(422, "malformed_json", e.what());
  }
  if (!doc.is_object()) return error_reply(422, "schema", "request body must be a JSON object");
  for (const auto& [key, _] : doc.items()) {
    if (key != "query" && key != "k" && key != "tau") {
      return error_reply(422, "schema", "unknown field \"" + key + "\"");
    }
  }
  if (!doc.contains("query") || !doc["query"].is_string() || doc["query"].get<std::string>().empty()) {
    return error_reply(422, "schema", "\"query\" must be a non-empty string");
  }
  std::optional<std::size_t> k;
  std::optional<double> tau;
  if (doc.contains("k")) {
    if (!doc["k"].is_number_unsigned() || doc["k"].get<std::size_t>() < 1) {
      return error_reply(422, "schema", "\"k\" must be a positive integer");
    }
    k = doc["k"].get<std::size_t>();
  }
  if (doc.contains("tau")) {
    if (!doc["tau"].is_number() || doc["tau"].get<double>() < 0.0 || doc["tau"].get<double>() > 1.0) {
      return error_reply(422, "schema", "\"tau\" must be a number in [0, 1]");
    }
    tau = doc["tau"].get<double>();
  }
  return json_reply(200, engine.query(doc["query"].get<std::string>(), k, tau).to_json());
}

}  // namespace

Service::Service() : impl_(std::make_unique<Impl>()) {
  auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
    HttpReply reply = handle(req.method, req.path, req.body);
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  impl_->server.Get(".*", bridge);
  impl_->server.Post(".*", bridge);
}

Service::~Service() {
  stop();
  if (impl_->loader.joinable()) impl_->loader.join();
}

void Service::attach(std::shared_ptr<Engine> engine) {
  std::lock_guard lock(impl_->mu);
  impl_->engine = std::move(engine);
}

void Service::load_async(EngineConfig config) {
  impl_->loader = std::thread([this, config = std::move(config)]() mutable {
    try {
      attach(std::make_shared<Engine>(std::move(config)));
    } catch (const std::exception& e) {
      std::lock_guard lock(impl_->mu);
      impl_->load_error = e.what();
    }
  });
}

HttpReply Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  std::shared_ptr<Engine> engine;
  {
    std::lock_guard lock(impl_->mu);
    engine = impl_->engine;
    if (!engine) {
      if (impl_->load_error) return error_reply(500, "load_failed", *impl_->load_error);
      return error_reply(503, "loading", "engine is loading");
    }
  }
  const auto parts = split_path(path);
  try {
    if (method == "GET" && parts == std::vector<std::string>{"health"}) {
      return json_reply(200, engine->health());
    }
    if (method == "POST" && parts == std::vector<std::string>{"v1", "retrieve"}) {
      return retrieve(*engine, body);
    }
    if (method == "GET" && parts.size() == 3 && parts[0] == "v1" && parts[1] == "twins") {
      return {200, "application/json", serialize_twin(engine->twin(parts[2]))};
    }
    if (method == "GET" && parts.size() == 5 && parts[0] == "v1" && parts[1] == "masks") {
      auto instance = parse_uint<TrackId>(parts[3]);
      auto frame = parse_uint<FrameIndex>(parts[4]);
      if (!instance || !frame) return error_reply(404, "not_found", "malformed mask address");
      return {200, "text/plain", engine->mask_rle(parts[2], *instance, *frame)};
    }
    return error_reply(404, "not_found", "no route for " + method + " " + path);
  } catch (const Error& e) {
    return error_reply(status_for(e.kind()), to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return error_reply(500, "internal", e.what());
  }
}

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorKind::kIo, "cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorKind::kIo, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Service::listen() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->server.stop(); }

}  // namespace rt2v
