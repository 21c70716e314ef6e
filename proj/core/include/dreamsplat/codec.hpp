#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dreamsplat/scene.hpp"

namespace dreamsplat {

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ParseError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

/// Decoded PNG samples, row-major, interleaved; 8- or 16-bit per sample.
struct PngPixels {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 gray, 3 RGB
  int bit_depth = 0; // 8 or 16
  std::vector<std::uint16_t> samples;
};

/// Accepts 8-bit gray, gray+alpha, RGB and RGBA (alpha dropped) and 16-bit
/// gray. Anything else, or a truncated/corrupt stream, throws ParseError.
PngPixels decode_png(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_png(const PngPixels &pixels);

/// 8-bit RGB; values are rounded to the nearest of 256 levels.
std::vector<std::uint8_t> encode_png_rgb(const ImageBuffer &img);
ImageBuffer decode_png_rgb(std::span<const std::uint8_t> bytes);

/// 8-bit gray, 255 = observed.
std::vector<std::uint8_t> encode_png_mask(const MaskBuffer &mask);
/// Any nonzero gray level reads as observed.
MaskBuffer decode_png_mask(std::span<const std::uint8_t> bytes);

} // namespace dreamsplat
