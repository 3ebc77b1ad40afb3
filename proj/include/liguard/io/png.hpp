#pragma once

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "liguard/core/error.hpp"
#include "liguard/core/types.hpp"

namespace liguard::io {

namespace png_detail {

struct MemoryReader {
  std::string_view bytes;
  std::size_t pos = 0;
};

inline void read_callback(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->bytes.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, r->bytes.data() + r->pos, n);
  r->pos += n;
}

inline void error_callback(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<char*>(png_get_error_ptr(png));
  std::strncpy(buf, msg, 255);
  buf[255] = '\0';
  png_longjmp(png, 1);
}

inline void warning_callback(png_structp, png_const_charp) {}

}  // namespace png_detail

/// Decodes a non-interlaced 8-bit PNG into RGB. Alpha is dropped; gray and
/// palette images are expanded.
inline ImageRaster read_image(std::string_view bytes) {
  static constexpr unsigned char kMagic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw ParseError("unsupported image format: not a PNG stream");
  }

  // Everything with a destructor lives above setjmp so longjmp skips nothing.
  ImageRaster img;
  std::vector<png_bytep> rows;
  std::vector<std::uint8_t> rgba;
  char message[256] = {0};
  png_detail::MemoryReader reader{bytes, 0};
  enum class Reject { none, interlaced, depth } reject = Reject::none;

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, message,
                                           png_detail::error_callback,
                                           png_detail::warning_callback);
  if (!png) throw ParseError("PNG: cannot allocate decoder");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ParseError("PNG: cannot allocate decoder");
  }

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(std::string("PNG: ") + message);
  }

  png_set_read_fn(png, &reader, png_detail::read_callback);
  png_read_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
    reject = Reject::interlaced;
  } else if (depth > 8) {
    reject = Reject::depth;
  }

  if (reject == Reject::none) {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_gray_to_rgb(png);
    }
    // Normalize everything to RGBA, then drop alpha below.
    png_set_filler(png, 0xff, PNG_FILLER_AFTER);
    png_read_update_info(png, info);

    rgba.resize(static_cast<std::size_t>(width) * height * 4);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
      rows[y] = rgba.data() + static_cast<std::size_t>(y) * width * 4;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);

  if (reject == Reject::interlaced) {
    throw ParseError("unsupported image format: interlaced PNG");
  }
  if (reject == Reject::depth) {
    throw ParseError("unsupported image format: PNG bit depth " + std::to_string(depth) + " > 8");
  }

  img = ImageRaster(width, height);
  for (std::size_t i = 0, n = static_cast<std::size_t>(width) * height; i < n; ++i) {
    img.data[i * 3 + 0] = rgba[i * 4 + 0];
    img.data[i * 3 + 1] = rgba[i * 4 + 1];
    img.data[i * 3 + 2] = rgba[i * 4 + 2];
  }
  return img;
}

/// Encodes an RGB raster as an 8-bit PNG.
inline std::string write_png(const ImageRaster& img) {
  img.validate();
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = img.width;
  image.height = img.height;
  image.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.data.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data.data(), 0, nullptr)) {
    throw IoError(std::string("PNG encode failed: ") + image.message);
  }
  out.resize(size);
  return out;
}

}  // namespace liguard::io
