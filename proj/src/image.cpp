#include "gridrag/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>
#include <zlib.h>

#include "gridrag/errors.hpp"

namespace gridrag {

Image decode_png(const Bytes& png) {
  png_image info{};
  info.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&info, png.data(), png.size())) {
    throw ImageError(std::string("undecodable PNG: ") + info.message);
  }
  info.format = PNG_FORMAT_RGBA;
  Image image;
  image.width = static_cast<int>(info.width);
  image.height = static_cast<int>(info.height);
  image.rgba.resize(PNG_IMAGE_SIZE(info));
  if (!png_image_finish_read(&info, nullptr, image.rgba.data(), 0, nullptr)) {
    std::string message = info.message;
    png_image_free(&info);
    throw ImageError("undecodable PNG: " + message);
  }
  return image;
}

Bytes encode_png(const Image& image) {
  png_image info{};
  info.version = PNG_IMAGE_VERSION;
  info.width = static_cast<png_uint_32>(image.width);
  info.height = static_cast<png_uint_32>(image.height);
  info.format = PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(info, size, 0, image.rgba.data(), 0,
                                       nullptr)) {
    throw ImageError(std::string("PNG encode failed: ") + info.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&info, out.data(), &size, 0,
                                 image.rgba.data(), 0, nullptr)) {
    throw ImageError(std::string("PNG encode failed: ") + info.message);
  }
  out.resize(size);
  return out;
}

Image crop(const Image& image, const BBox& box) {
  const int x0 = std::clamp(static_cast<int>(std::floor(box.x0)), 0, image.width);
  const int y0 = std::clamp(static_cast<int>(std::floor(box.y0)), 0, image.height);
  const int x1 = std::clamp(static_cast<int>(std::ceil(box.x1)), 0, image.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(box.y1)), 0, image.height);
  if (x1 <= x0 || y1 <= y0) throw ImageError("empty crop");
  Image out;
  out.width = x1 - x0;
  out.height = y1 - y0;
  out.rgba.resize(static_cast<std::size_t>(out.width) * out.height * 4);
  const std::size_t row_bytes = static_cast<std::size_t>(out.width) * 4;
  for (int y = 0; y < out.height; ++y) {
    const auto* src = image.rgba.data() +
                      (static_cast<std::size_t>(y0 + y) * image.width + x0) * 4;
    std::memcpy(out.rgba.data() + y * row_bytes, src, row_bytes);
  }
  return out;
}

Image make_image(int width, int height, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b) {
  Image image;
  image.width = width;
  image.height = height;
  image.rgba.resize(static_cast<std::size_t>(width) * height * 4);
  for (std::size_t i = 0; i < image.rgba.size(); i += 4) {
    image.rgba[i] = r;
    image.rgba[i + 1] = g;
    image.rgba[i + 2] = b;
    image.rgba[i + 3] = 255;
  }
  return image;
}

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

}  // namespace

Bytes insert_png_text(const Bytes& png, std::string_view keyword,
                      std::string_view text) {
  // 8-byte signature, then IHDR: 4 length + 4 type + 13 data + 4 crc.
  constexpr std::size_t kAfterIhdr = 8 + 4 + 4 + 13 + 4;
  if (png.size() < kAfterIhdr || std::memcmp(png.data() + 12, "IHDR", 4) != 0) {
    throw ImageError("not a PNG stream");
  }
  Bytes chunk_body;
  for (char c : std::string_view("tEXt")) chunk_body.push_back(c);
  for (char c : keyword) chunk_body.push_back(static_cast<std::uint8_t>(c));
  chunk_body.push_back(0);
  for (char c : text) chunk_body.push_back(static_cast<std::uint8_t>(c));

  Bytes out(png.begin(), png.begin() + kAfterIhdr);
  put_u32(out, static_cast<std::uint32_t>(chunk_body.size() - 4));
  out.insert(out.end(), chunk_body.begin(), chunk_body.end());
  put_u32(out, static_cast<std::uint32_t>(
                   crc32(0L, chunk_body.data(),
                         static_cast<uInt>(chunk_body.size()))));
  out.insert(out.end(), png.begin() + kAfterIhdr, png.end());
  return out;
}

}  // namespace gridrag
