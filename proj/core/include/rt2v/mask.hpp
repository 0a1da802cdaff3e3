#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rt2v {

/// Row-major binary foreground map; one byte (0 or 1) per pixel.
struct MaskBitmap {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> bits;

  MaskBitmap() = default;
  MaskBitmap(std::uint32_t w, std::uint32_t h) : width(w), height(h), bits(std::size_t{w} * h, 0) {}

  bool operator==(const MaskBitmap&) const = default;

  bool at(std::uint32_t x, std::uint32_t y) const { return bits[std::size_t{y} * width + x] != 0; }
  void set(std::uint32_t x, std::uint32_t y, bool on = true) {
    bits[std::size_t{y} * width + x] = on ? 1 : 0;
  }
  std::size_t count() const;
};

/// `R1 <w> <h> <run>+` where runs alternate background/foreground starting
/// with background (the first run may be 0). No trailing newline.
std::string rle_encode(const MaskBitmap& mask);
/// Accepts an optional trailing newline.
MaskBitmap rle_decode(std::string_view text);

MaskBitmap read_mask_file(const std::filesystem::path& path);
/// Writes the RLE text followed by a single '\n'.
void write_mask_file(const std::filesystem::path& path, const MaskBitmap& mask);

}  // namespace rt2v
