#include "rt2v/mask.hpp"

#include <algorithm>
#include <charconv>

#include "rt2v/error.hpp"
#include "rt2v/json_util.hpp"

namespace rt2v {

std::size_t MaskBitmap::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::string rle_encode(const MaskBitmap& mask) {
  if (mask.width == 0 || mask.height == 0) {
    throw Error(ErrorKind::kInvalidArgument, "mask dimensions must be positive");
  }
  if (mask.bits.size() != std::size_t{mask.width} * mask.height) {
    throw Error(ErrorKind::kDimensionMismatch, "mask bit count does not match width x height");
  }
  std::string out = "R1 " + std::to_string(mask.width) + " " + std::to_string(mask.height);
  std::uint8_t current = 0;
  std::size_t run = 0;
  for (std::uint8_t b : mask.bits) {
    const std::uint8_t v = b ? 1 : 0;
    if (v != current) {
      out += " " + std::to_string(run);
      current = v;
      run = 0;
    }
    ++run;
  }
  out += " " + std::to_string(run);
  return out;
}

namespace {

std::uint64_t parse_count(std::string_view token) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) {
    throw Error(ErrorKind::kInvalidArgument, "non-numeric RLE token \"" + std::string(token) + "\"");
  }
  return value;
}

}  // namespace

MaskBitmap rle_decode(std::string_view text) {
  if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == ' ') {
      ++pos;
      continue;
    }
    std::size_t end = text.find(' ', pos);
    if (end == std::string_view::npos) end = text.size();
    tokens.push_back(text.substr(pos, end - pos));
    pos = end;
  }
  if (tokens.size() < 4 || tokens[0] != "R1") {
    throw Error(ErrorKind::kInvalidArgument, "RLE text must match `R1 <w> <h> <run>+`");
  }
  const std::uint64_t w = parse_count(tokens[1]);
  const std::uint64_t h = parse_count(tokens[2]);
  if (w == 0 || h == 0) throw Error(ErrorKind::kInvalidArgument, "RLE dimensions must be positive");
  if (w > UINT32_MAX || h > UINT32_MAX || w * h > (std::uint64_t{1} << 32)) {
    throw Error(ErrorKind::kInvalidArgument, "RLE dimensions too large");
  }

  MaskBitmap mask(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h));
  const std::uint64_t total = w * h;
  std::uint64_t filled = 0;
  std::uint8_t value = 0;
  for (std::size_t i = 3; i < tokens.size(); ++i) {
    const std::uint64_t run = parse_count(tokens[i]);
    if (run > total - filled) {
      throw Error(ErrorKind::kInvalidArgument, "RLE runs exceed width x height");
    }
    std::fill_n(mask.bits.begin() + static_cast<std::ptrdiff_t>(filled), run, value);
    filled += run;
    value ^= 1;
  }
  if (filled != total) {
    throw Error(ErrorKind::kInvalidArgument, "RLE runs sum to " + std::to_string(filled) +
                                                 ", expected " + std::to_string(total));
  }
  return mask;
}

MaskBitmap read_mask_file(const std::filesystem::path& path) {
  return rle_decode(read_text_file(path));
}

void write_mask_file(const std::filesystem::path& path, const MaskBitmap& mask) {
  write_text_file(path, rle_encode(mask) + "\n");
}

}  // namespace rt2v
