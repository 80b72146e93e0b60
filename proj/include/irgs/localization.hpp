#pragma once

#include <utility>

#include "irgs/image.hpp"

namespace irgs {

struct ButterworthParams {
  int n = 2;      // filter order
  double f = 6.0; // cutoff radius in pixels
};

// 1/sqrt(1 + (r/f)^(2n)) for r >= 0.
double butterworth_1d(double r, const ButterworthParams& p);

// Separable 2-D attention: G(i,j) = B(|i-ic|) * B(|j-jc|). Peak 1 at center.
MaskPlane butterworth_mask(int height, int width, std::pair<int, int> center,
                           const ButterworthParams& p);

// Binary plane: 1 where g > 0.5 (strict), else 0.
MaskPlane hard_weights(const MaskPlane& g);

}  // namespace irgs
