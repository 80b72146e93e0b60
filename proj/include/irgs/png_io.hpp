#pragma once

#include <filesystem>

#include "irgs/image.hpp"

namespace irgs {

// 8-bit RGB PNG in normalized [0,1] reals (value / 255). Gray, palette and
// alpha inputs are converted to RGB on read.
Image read_image_png(const std::filesystem::path& path);
void write_image_png(const std::filesystem::path& path, const Image& img);

// 8-bit single-channel PNGs holding small integer indices.
LabelPlane read_label_png(const std::filesystem::path& path);
void write_label_png(const std::filesystem::path& path, const LabelPlane& labels);

// Mask plane as 8-bit gray, value = round(255 * m).
void write_mask_png(const std::filesystem::path& path, const MaskPlane& mask);

}  // namespace irgs
