#include "irgs/quality.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace irgs {

namespace {

void check_quality_params(const QualityParams& p, int h, int w) {
  if (!(p.sigma1 > 0.0)) {
    throw std::invalid_argument("sigma1 must be positive");
  }
  if (p.kernel_size < 1 || p.kernel_size % 2 == 0 || p.kernel_size > std::min(h, w)) {
    throw std::invalid_argument("kernel_size must be odd, >= 1 and <= min(H,W), got " +
                                std::to_string(p.kernel_size));
  }
}

}  // namespace

MaskPlane compute_quality(const Image& x, const Image& x_re, const MaskPlane& s,
                          const QualityParams& p) {
  if (!x.same_shape(x_re) || s.height() != x.height() || s.width() != x.width()) {
    throw std::invalid_argument("compute_quality: plane dimensions do not match");
  }
  if (!(p.sigma1 > 0.0)) {
    throw std::invalid_argument("sigma1 must be positive");
  }
  const int h = x.height();
  const int w = x.width();
  MaskPlane q(h, w);
  const double inv_two_sigma = 1.0 / (2.0 * p.sigma1);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double err = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double d = x_re.at(i, j, c) - x.at(i, j, c);
        err += d * d;
      }
      q.at(i, j) = std::exp(-s.at(i, j) * err * inv_two_sigma);
    }
  }
  return q;
}

Plane area_quality(const MaskPlane& masked_q, const QualityParams& p) {
  const int h = masked_q.height();
  const int w = masked_q.width();
  check_quality_params(p, h, w);
  const int r = p.kernel_size / 2;

  // Summed-area table with a zero row/column border.
  std::vector<double> sat(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  auto sat_at = [&](int i, int j) -> double& {
    return sat[static_cast<std::size_t>(i) * (w + 1) + j];
  };
  for (int i = 1; i <= h; ++i) {
    for (int j = 1; j <= w; ++j) {
      sat_at(i, j) = masked_q.at(i - 1, j - 1) + sat_at(i - 1, j) + sat_at(i, j - 1) -
                     sat_at(i - 1, j - 1);
    }
  }

  Plane out(h, w);
  for (int i = 0; i < h; ++i) {
    const int i0 = std::max(0, i - r);
    const int i1 = std::min(h - 1, i + r);
    for (int j = 0; j < w; ++j) {
      const int j0 = std::max(0, j - r);
      const int j1 = std::min(w - 1, j + r);
      out.at(i, j) = sat_at(i1 + 1, j1 + 1) - sat_at(i0, j1 + 1) - sat_at(i1 + 1, j0) +
                     sat_at(i0, j0);
    }
  }
  return out;
}

std::pair<int, int> find_center(const Plane& q_area) {
  int best_i = 0;
  int best_j = 0;
  double best = q_area.at(0, 0);
  for (int i = 0; i < q_area.height(); ++i) {
    for (int j = 0; j < q_area.width(); ++j) {
      if (q_area.at(i, j) > best) {
        best = q_area.at(i, j);
        best_i = i;
        best_j = j;
      }
    }
  }
  return {best_i, best_j};
}

}  // namespace irgs
