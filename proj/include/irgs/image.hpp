#pragma once

#include <array>
#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

namespace irgs {

// H x W grid of reals. Used both for unit-range mask planes (s, m, Q, L, G, w)
// and for unbounded planes such as the area-quality output.
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, double fill = 0.0);

  // Validates dimensions against the payload size; does not restrict range.
  Plane(int height, int width, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }

  double at(int i, int j) const {
    assert(i >= 0 && i < height_ && j >= 0 && j < width_);
    return v_[static_cast<std::size_t>(i) * width_ + j];
  }
  double& at(int i, int j) {
    assert(i >= 0 && i < height_ && j >= 0 && j < width_);
    return v_[static_cast<std::size_t>(i) * width_ + j];
  }

  std::span<const double> values() const { return v_; }
  std::span<double> values() { return v_; }

  bool same_shape(const Plane& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> v_;
};

// Mask planes carry values in [0,1]; enforced where data enters from outside
// (require_unit_range), preserved arithmetically by the pipeline updates.
using MaskPlane = Plane;

// Throws std::invalid_argument naming `what` if any value is outside [0,1].
void require_unit_range(const Plane& p, const char* what);

// RGB image, channel values in [0,1], row-major, channel-interleaved.
class Image {
 public:
  Image() = default;
  Image(int height, int width, double fill = 0.0);

  // Validates size and the [0,1] channel range.
  Image(int height, int width, std::vector<double> rgb);

  int height() const { return height_; }
  int width() const { return width_; }

  double at(int i, int j, int c) const {
    assert(i >= 0 && i < height_ && j >= 0 && j < width_ && c >= 0 && c < 3);
    return v_[(static_cast<std::size_t>(i) * width_ + j) * 3 + c];
  }
  double& at(int i, int j, int c) {
    assert(i >= 0 && i < height_ && j >= 0 && j < width_ && c >= 0 && c < 3);
    return v_[(static_cast<std::size_t>(i) * width_ + j) * 3 + c];
  }

  std::span<const double> values() const { return v_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> v_;
};

// Integer label plane (instance ids, hard slot assignments).
struct LabelPlane {
  int height = 0;
  int width = 0;
  std::vector<int> labels;  // row-major

  LabelPlane() = default;
  LabelPlane(int h, int w, int fill = 0)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  int at(int i, int j) const { return labels[static_cast<std::size_t>(i) * width + j]; }
  int& at(int i, int j) { return labels[static_cast<std::size_t>(i) * width + j]; }
};

// GMM sample: (r, g, b, row_norm, col_norm), all in [0,1].
struct PixelFeature {
  std::array<double, 5> v{};
  double operator[](int d) const { return v[static_cast<std::size_t>(d)]; }
};

struct FeatureGrid {
  int height = 0;
  int width = 0;
  std::vector<PixelFeature> features;  // row-major, one per pixel

  const PixelFeature& at(int i, int j) const {
    return features[static_cast<std::size_t>(i) * width + j];
  }
};

// One 5-d feature per pixel; coordinates normalized by (dim-1), 0 when dim==1.
FeatureGrid build_features(const Image& img);

}  // namespace irgs
