#include "irgs/image.hpp"

#include <stdexcept>
#include <string>

namespace irgs {

namespace {

void check_dims(int height, int width) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("plane dimensions must be at least 1x1, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
}

}  // namespace

Plane::Plane(int height, int width, double fill)
    : height_(height), width_(width), v_(static_cast<std::size_t>(height) * width, fill) {
  check_dims(height, width);
}

Plane::Plane(int height, int width, std::vector<double> values)
    : height_(height), width_(width), v_(std::move(values)) {
  check_dims(height, width);
  if (v_.size() != static_cast<std::size_t>(height) * width) {
    throw std::invalid_argument("plane payload size does not match dimensions");
  }
}

void require_unit_range(const Plane& p, const char* what) {
  for (double x : p.values()) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw std::invalid_argument(std::string(what) + ": value outside [0,1]");
    }
  }
}

Image::Image(int height, int width, double fill)
    : height_(height), width_(width), v_(static_cast<std::size_t>(height) * width * 3, fill) {
  check_dims(height, width);
  if (!(fill >= 0.0 && fill <= 1.0)) {
    throw std::invalid_argument("image fill value outside [0,1]");
  }
}

Image::Image(int height, int width, std::vector<double> rgb)
    : height_(height), width_(width), v_(std::move(rgb)) {
  check_dims(height, width);
  if (v_.size() != static_cast<std::size_t>(height) * width * 3) {
    throw std::invalid_argument("image payload size does not match dimensions");
  }
  for (double x : v_) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw std::invalid_argument("image channel value outside [0,1]");
    }
  }
}

FeatureGrid build_features(const Image& img) {
  const int h = img.height();
  const int w = img.width();
  FeatureGrid grid;
  grid.height = h;
  grid.width = w;
  grid.features.resize(static_cast<std::size_t>(h) * w);
  const double inv_h = h > 1 ? 1.0 / (h - 1) : 0.0;
  const double inv_w = w > 1 ? 1.0 / (w - 1) : 0.0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      PixelFeature& f = grid.features[static_cast<std::size_t>(i) * w + j];
      f.v[0] = img.at(i, j, 0);
      f.v[1] = img.at(i, j, 1);
      f.v[2] = img.at(i, j, 2);
      f.v[3] = i * inv_h;
      f.v[4] = j * inv_w;
    }
  }
  return grid;
}

}  // namespace irgs
