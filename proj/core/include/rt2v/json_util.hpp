#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace rt2v {

using json = nlohmann::json;

/// Canonical JSON text: compact, object keys in sorted order, integers
/// unquoted, reals as the shortest decimal that round-trips (always carrying a
/// '.' or exponent so they re-parse as reals). Non-finite reals are rejected.
std::string canonical_json(const json& value);

/// Parses JSON text, mapping syntax errors to ErrorKind::kMalformedJson.
json parse_json(std::string_view text);

// Field accessors used by the document parsers. Absence raises kMissingField,
// a wrong type raises kMalformedJson; `where` prefixes the message.
const json& require_field(const json& object, std::string_view key, std::string_view where);
std::string require_string(const json& object, std::string_view key, std::string_view where);
double require_number(const json& object, std::string_view key, std::string_view where);
std::uint64_t require_unsigned(const json& object, std::string_view key, std::string_view where);
const json& require_array(const json& object, std::string_view key, std::string_view where);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::string_view bytes);
/// 16 lowercase hex digits of fnv1a64(bytes).
std::string fnv1a64_hex(std::string_view bytes);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a sibling temporary file and rename.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace rt2v
