#include "rt2v/json_util.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "rt2v/error.hpp"

namespace rt2v {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid_argument";
    case ErrorKind::kMalformedJson: return "malformed_json";
    case ErrorKind::kMissingField: return "missing_field";
    case ErrorKind::kInvariantViolation: return "invariant_violation";
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kProvider: return "provider_failure";
    case ErrorKind::kSchema: return "schema_violation";
    case ErrorKind::kDecomposition: return "decomposition_failure";
    case ErrorKind::kPlanRejected: return "plan_rejected";
    case ErrorKind::kToolTimeout: return "tool_timeout";
    case ErrorKind::kDivergence: return "divergence";
    case ErrorKind::kMissingTwin: return "missing_twin";
    case ErrorKind::kDanglingReference: return "dangling_reference";
    case ErrorKind::kDuplicateId: return "duplicate_id";
    case ErrorKind::kCountMismatch: return "count_mismatch";
    case ErrorKind::kGeneration: return "generation_failure";
    case ErrorKind::kIo: return "io_error";
  }
  return "unknown";
}

namespace {

void append_real(std::string& out, double value) {
  if (!std::isfinite(value)) {
    throw Error(ErrorKind::kInvalidArgument, "canonical JSON cannot encode a non-finite real");
  }
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  std::string_view text(buf, static_cast<std::size_t>(end - buf));
  out.append(text);
  if (text.find_first_of(".e") == std::string_view::npos) out.append(".0");
}

void append_string(std::string& out, const std::string& s) { out.append(json(s).dump()); }

void write(std::string& out, const json& v) {
  switch (v.type()) {
    case json::value_t::object: {
      out.push_back('{');
      bool first = true;
      for (const auto& [key, item] : v.items()) {
        if (!first) out.push_back(',');
        first = false;
        append_string(out, key);
        out.push_back(':');
        write(out, item);
      }
      out.push_back('}');
      break;
    }
    case json::value_t::array: {
      out.push_back('[');
      bool first = true;
      for (const auto& item : v) {
        if (!first) out.push_back(',');
        first = false;
        write(out, item);
      }
      out.push_back(']');
      break;
    }
    case json::value_t::number_float:
      append_real(out, v.get<double>());
      break;
    case json::value_t::discarded:
      throw Error(ErrorKind::kInvalidArgument, "cannot serialize a discarded JSON value");
    default:
      out.append(v.dump());
  }
}

std::string field_path(std::string_view where, std::string_view key) {
  std::string s(where);
  if (!s.empty()) s.push_back('.');
  s.append(key);
  return s;
}

}  // namespace

std::string canonical_json(const json& value) {
  std::string out;
  write(out, value);
  return out;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kMalformedJson, e.what());
  }
}

const json& require_field(const json& object, std::string_view key, std::string_view where) {
  if (!object.is_object()) {
    throw Error(ErrorKind::kMalformedJson, std::string(where) + " is not an object");
  }
  auto it = object.find(std::string(key));
  if (it == object.end()) {
    throw Error(ErrorKind::kMissingField, "missing field " + field_path(where, key));
  }
  return *it;
}

std::string require_string(const json& object, std::string_view key, std::string_view where) {
  const json& v = require_field(object, key, where);
  if (!v.is_string()) {
    throw Error(ErrorKind::kMalformedJson, field_path(where, key) + " must be a string");
  }
  return v.get<std::string>();
}

double require_number(const json& object, std::string_view key, std::string_view where) {
  const json& v = require_field(object, key, where);
  if (!v.is_number()) {
    throw Error(ErrorKind::kMalformedJson, field_path(where, key) + " must be a number");
  }
  return v.get<double>();
}

std::uint64_t require_unsigned(const json& object, std::string_view key, std::string_view where) {
  const json& v = require_field(object, key, where);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  }
  throw Error(ErrorKind::kMalformedJson,
              field_path(where, key) + " must be a non-negative integer");
}

const json& require_array(const json& object, std::string_view key, std::string_view where) {
  const json& v = require_field(object, key, where);
  if (!v.is_array()) {
    throw Error(ErrorKind::kMalformedJson, field_path(where, key) + " must be an array");
  }
  return v;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string fnv1a64_hex(std::string_view bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(bytes);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorKind::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace rt2v
