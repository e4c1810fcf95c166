#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "gridrag/core.hpp"

namespace gridrag {

// 8-bit RGBA raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;
};

// Throws ImageError when the bytes are not a decodable PNG.
Image decode_png(const Bytes& png);
Bytes encode_png(const Image& image);

// Pixel-aligned crop. Fractional coordinates are widened to whole pixels and
// clamped to the image; throws ImageError if nothing remains.
Image crop(const Image& image, const BBox& box);

// Solid-colour raster, mostly for fixtures.
Image make_image(int width, int height, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b);

// Returns a copy of `png` with an uncompressed tEXt chunk inserted after IHDR.
// Decoders ignore the chunk; its text stays greppable in the raw bytes.
Bytes insert_png_text(const Bytes& png, std::string_view keyword,
                      std::string_view text);

}  // namespace gridrag
