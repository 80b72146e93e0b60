#include "irgs/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace irgs {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decodes any libpng-readable file to tightly packed 8-bit rows with
// `channels` samples per pixel (1 = gray, 3 = RGB).
std::vector<unsigned char> read_png_8bit(const std::filesystem::path& path, int channels,
                                         int& height, int& width) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) {
    throw std::invalid_argument("cannot open PNG: " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  std::vector<unsigned char> data;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::invalid_argument("failed to decode PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_packing(png);
  png_set_strip_alpha(png);
  const png_byte color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
  }
  if (channels == 3) {
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
  } else {
    if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
        color_type == PNG_COLOR_TYPE_PALETTE) {
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
  }
  png_read_update_info(png, info);

  height = static_cast<int>(png_get_image_height(png, info));
  width = static_cast<int>(png_get_image_width(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width) * channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::invalid_argument("unexpected PNG row layout: " + path.string());
  }
  data.resize(static_cast<std::size_t>(height) * rowbytes);
  row_ptrs.resize(static_cast<std::size_t>(height));
  for (int i = 0; i < height; ++i) {
    row_ptrs[static_cast<std::size_t>(i)] = data.data() + static_cast<std::size_t>(i) * rowbytes;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return data;
}

void write_png_8bit(const std::filesystem::path& path, const unsigned char* data, int height,
                    int width, int channels) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) {
    throw std::invalid_argument("cannot open PNG for writing: " + path.string());
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to encode PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(height));
  const std::size_t rowbytes = static_cast<std::size_t>(width) * channels;
  for (int i = 0; i < height; ++i) {
    row_ptrs[static_cast<std::size_t>(i)] =
        const_cast<png_bytep>(data + static_cast<std::size_t>(i) * rowbytes);
  }
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image read_image_png(const std::filesystem::path& path) {
  int h = 0;
  int w = 0;
  const std::vector<unsigned char> bytes = read_png_8bit(path, 3, h, w);
  std::vector<double> rgb(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    rgb[i] = bytes[i] / 255.0;
  }
  return Image(h, w, std::move(rgb));
}

void write_image_png(const std::filesystem::path& path, const Image& img) {
  std::vector<unsigned char> bytes(img.values().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = to_byte(img.values()[i]);
  }
  write_png_8bit(path, bytes.data(), img.height(), img.width(), 3);
}

LabelPlane read_label_png(const std::filesystem::path& path) {
  int h = 0;
  int w = 0;
  const std::vector<unsigned char> bytes = read_png_8bit(path, 1, h, w);
  LabelPlane labels(h, w);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    labels.labels[i] = bytes[i];
  }
  return labels;
}

void write_label_png(const std::filesystem::path& path, const LabelPlane& labels) {
  std::vector<unsigned char> bytes(labels.labels.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const int v = labels.labels[i];
    if (v < 0 || v > 255) {
      throw std::invalid_argument("label value out of 8-bit range");
    }
    bytes[i] = static_cast<unsigned char>(v);
  }
  write_png_8bit(path, bytes.data(), labels.height, labels.width, 1);
}

void write_mask_png(const std::filesystem::path& path, const MaskPlane& mask) {
  std::vector<unsigned char> bytes(mask.values().size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = to_byte(mask.values()[i]);
  }
  write_png_8bit(path, bytes.data(), mask.height(), mask.width(), 1);
}

}  // namespace irgs
