#include "irgs/localization.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace irgs {

namespace {

void check_params(const ButterworthParams& p) {
  if (p.n < 1) {
    throw std::invalid_argument("butterworth order n must be >= 1");
  }
  if (!(p.f > 0.0)) {
    throw std::invalid_argument("butterworth cutoff f must be positive");
  }
}

}  // namespace

double butterworth_1d(double r, const ButterworthParams& p) {
  check_params(p);
  if (r < 0.0) {
    throw std::invalid_argument("butterworth distance must be nonnegative");
  }
  return 1.0 / std::sqrt(1.0 + std::pow(r / p.f, 2.0 * p.n));
}

MaskPlane butterworth_mask(int height, int width, std::pair<int, int> center,
                           const ButterworthParams& p) {
  check_params(p);
  const auto [ic, jc] = center;
  if (ic < 0 || ic >= height || jc < 0 || jc >= width) {
    throw std::invalid_argument("butterworth center (" + std::to_string(ic) + "," +
                                std::to_string(jc) + ") outside " + std::to_string(height) +
                                "x" + std::to_string(width) + " plane");
  }
  // Precompute the two 1-D profiles, then take the product.
  std::vector<double> row(height), col(width);
  for (int i = 0; i < height; ++i) {
    row[i] = butterworth_1d(std::abs(i - ic), p);
  }
  for (int j = 0; j < width; ++j) {
    col[j] = butterworth_1d(std::abs(j - jc), p);
  }
  MaskPlane g(height, width);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      g.at(i, j) = row[i] * col[j];
    }
  }
  return g;
}

MaskPlane hard_weights(const MaskPlane& g) {
  MaskPlane w(g.height(), g.width());
  for (int i = 0; i < g.height(); ++i) {
    for (int j = 0; j < g.width(); ++j) {
      w.at(i, j) = g.at(i, j) > 0.5 ? 1.0 : 0.0;
    }
  }
  return w;
}

}  // namespace irgs
