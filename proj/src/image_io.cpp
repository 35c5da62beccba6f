/* Copyright 2026 The RoadAudit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "roadaudit/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace roadaudit {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return f;
}

void write_png(const std::filesystem::path& path, int width, int height, int color_type,
               int channels, const std::uint8_t* pixels) {
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorKind::kIo, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::kIo, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::kIo, "failed writing '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + stride * y));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// Decodes to 8-bit with exactly `want_channels` channels; rejects other
// layouts rather than silently converting them.
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, int want_color_type,
                                   int want_channels, int& width, int& height) {
  auto file = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    fail(ErrorKind::kIo, "'" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorKind::kIo, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::kIo, "png_create_info_struct failed");
  }
  std::vector<std::uint8_t> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kIo, "failed decoding '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (bit_depth != 8 || color_type != want_color_type) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::kData, "'" + path.string() + "' has unexpected PNG layout (bit depth " +
                               std::to_string(bit_depth) + ", color type " +
                               std::to_string(color_type) + ")");
  }
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t stride = static_cast<std::size_t>(width) * want_channels;
  pixels.resize(stride * height);
  for (int y = 0; y < height; ++y) png_read_row(png, pixels.data() + stride * y, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const Image& image) {
  write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 3, image.rgb.data());
}

void write_png_gray(const std::filesystem::path& path, const Mask& mask) {
  write_png(path, mask.width(), mask.height(), PNG_COLOR_TYPE_GRAY, 1, mask.data());
}

Image read_png_rgb(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto pixels = read_png(path, PNG_COLOR_TYPE_RGB, 3, w, h);
  Image img;
  img.width = w;
  img.height = h;
  img.rgb = std::move(pixels);
  return img;
}

Mask read_png_gray(const std::filesystem::path& path) {
  int w = 0, h = 0;
  auto pixels = read_png(path, PNG_COLOR_TYPE_GRAY, 1, w, h);
  Mask mask(h, w);
  std::copy(pixels.begin(), pixels.end(), mask.data());
  return mask;
}

}  // namespace roadaudit
