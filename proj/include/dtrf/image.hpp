#pragma once

#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "dtrf/common.hpp"

namespace dtrf {

// H x W x 3 float image in [0,1], row-major, top row first.
struct Image {
  int width = 0, height = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int w, int h, float fill = 0.f) : width(w), height(h), rgb(size_t(w) * h * 3, fill) {}

  float* px(int x, int y) { return rgb.data() + (size_t(y) * width + x) * 3; }
  const float* px(int x, int y) const { return rgb.data() + (size_t(y) * width + x) * 3; }
};

inline uint8_t to_byte(float v) {
  return uint8_t(clamp(v, 0.f, 1.f) * 255.f + 0.5f);
}

inline void write_png(const std::string& path, const Image& img) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw ParseError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw ParseError("png write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<uint8_t> row(size_t(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float* p = img.px(x, y);
      row[size_t(x) * 3 + 0] = to_byte(p[0]);
      row[size_t(x) * 3 + 1] = to_byte(p[1]);
      row[size_t(x) * 3 + 2] = to_byte(p[2]);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// Reads 8-bit PNG as RGB with alpha composited over `background` (RGBA inputs),
// matching the evaluation convention for synthetic scenes.
inline Image read_png(const std::string& path, const Vec3f& background) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw ParseError("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw ParseError("png read failed: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_uint_32 w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info), depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (!(color & PNG_COLOR_MASK_ALPHA) && !png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
  png_read_update_info(png, info);

  std::vector<uint8_t> data(size_t(w) * h * 4);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = data.data() + size_t(y) * w * 4;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);

  Image img{int(w), int(h)};
  for (size_t i = 0; i < size_t(w) * h; ++i) {
    float a = data[i * 4 + 3] / 255.f;
    const float bg[3] = {background.x, background.y, background.z};
    for (int c = 0; c < 3; ++c)
      img.rgb[i * 3 + c] = (data[i * 4 + c] / 255.f) * a + bg[c] * (1.f - a);
  }
  return img;
}

inline double mean_abs_diff(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("mean_abs_diff: size mismatch");
  double acc = 0;
  for (size_t i = 0; i < a.rgb.size(); ++i) acc += std::abs(double(a.rgb[i]) - b.rgb[i]);
  return acc / double(a.rgb.size());
}

// Box-filter downsample by an integer factor (test utility for the
// resolution-consistency check).
inline Image downsample(const Image& img, int factor) {
  Image out(img.width / factor, img.height / factor);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      double acc[3] = {0, 0, 0};
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) {
          const float* p = img.px(x * factor + dx, y * factor + dy);
          for (int c = 0; c < 3; ++c) acc[c] += p[c];
        }
      float* q = out.px(x, y);
      for (int c = 0; c < 3; ++c) q[c] = float(acc[c] / (factor * factor));
    }
  return out;
}

}  // namespace dtrf
