#pragma once

#include <utility>

#include "irgs/image.hpp"

namespace irgs {

struct QualityParams {
  double sigma1 = 0.05;  // bandwidth (variance) of the pixel quality exponent
  int kernel_size = 5;   // side of the all-ones box kernel, odd
};

// Q(i,j) = exp(-s(i,j) * sum_c (x_re - x)^2 / (2*sigma1)). Values in (0,1].
MaskPlane compute_quality(const Image& x, const Image& x_re, const MaskPlane& s,
                          const QualityParams& p);

// Box convolution of s*Q with an all-ones kernel_size x kernel_size kernel,
// stride 1, zero ("SAME") padding. Output is an unbounded plane.
Plane area_quality(const MaskPlane& masked_q, const QualityParams& p);

// Coordinates of the maximum of the plane; ties go to the smallest row, then
// the smallest column.
std::pair<int, int> find_center(const Plane& q_area);

}  // namespace irgs
