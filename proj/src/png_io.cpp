#include "panoscan/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "panoscan/errors.hpp"

namespace panoscan {

namespace {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

Image load_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open PNG: " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }
  std::vector<png_bytep> row_ptrs;
  std::vector<png_byte> buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("not a valid PNG: " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  // Normalize everything to 8- or 16-bit RGB.
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);  // little-endian reads below
  png_read_update_info(png, info);

  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  buffer.resize(stride * h);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = buffer.data() + y * stride;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(w, h);
  if (out_depth == 8) {
    for (std::size_t i = 0; i < img.pixels() * 3; ++i)
      img.data[i] = buffer[i] / 255.0;
  } else {
    const auto* p16 = reinterpret_cast<const std::uint16_t*>(buffer.data());
    for (std::size_t i = 0; i < img.pixels() * 3; ++i)
      img.data[i] = p16[i] / 65535.0;
  }
  return img;
}

void save_png(const std::string& path, const Image& img, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16)
    throw ArgumentError("save_png: bit depth must be 8 or 16");
  if (img.width == 0 || img.height == 0)
    throw ArgumentError("save_png: empty image");

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write PNG: " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  std::vector<png_byte> buffer;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("PNG write failed: " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), bit_depth,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const std::size_t px = img.pixels() * 3;
  if (bit_depth == 8) {
    buffer.resize(px);
    for (std::size_t i = 0; i < px; ++i) {
      const double v = std::clamp(img.data[i], 0.0, 1.0);
      buffer[i] = static_cast<png_byte>(std::lround(v * 255.0));
    }
    row_ptrs.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y)
      row_ptrs[y] = buffer.data() + y * img.width * 3;
  } else {
    buffer.resize(px * 2);
    for (std::size_t i = 0; i < px; ++i) {
      const double v = std::clamp(img.data[i], 0.0, 1.0);
      const auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
      buffer[2 * i] = static_cast<png_byte>(q >> 8);  // PNG is big-endian
      buffer[2 * i + 1] = static_cast<png_byte>(q & 0xff);
    }
    row_ptrs.resize(img.height);
    for (std::size_t y = 0; y < img.height; ++y)
      row_ptrs[y] = buffer.data() + y * img.width * 6;
  }
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw DataError("PNG flush failed: " + path);
}

}  // namespace panoscan
