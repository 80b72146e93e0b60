#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "irgs/image.hpp"
#include "irgs/localization.hpp"

namespace irgs {

inline constexpr int kGmmComponents = 2;
inline constexpr int kFeatureDim = 5;

// Thrown when a clustering window has no active pixels.
class degenerate_window_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GmmParams {
  int em_iters = 20;
  double variance_floor = 1e-4;
  std::uint64_t seed = 0;  // drives the second component's mean init
};

// Two diagonal-covariance components over 5-d pixel features. Component 1
// (index 0) starts at zero, component 2 (index 1) is the object by convention.
struct GmmState {
  int height = 0;
  int width = 0;
  std::array<std::array<double, kFeatureDim>, kGmmComponents> means{};
  std::array<std::array<double, kFeatureDim>, kGmmComponents> variances{};
  std::vector<std::array<double, kGmmComponents>> resp;  // row-major per pixel

  double resp_at(int i, int j, int k) const {
    return resp[static_cast<std::size_t>(i) * width + j][static_cast<std::size_t>(k)];
  }
};

// Responsibilities 0.5 everywhere, mu1 = 0, mu2 ~ Unif(0,1)^5 from the seed,
// unit variances.
GmmState init_gmm(const FeatureGrid& features, std::uint64_t seed);

// One weighted EM iteration over the weight-1 pixels: responsibilities from
// the diagonal Gaussian densities under the incoming parameters, then means
// and per-coordinate variances (floored) from those responsibilities.
// Weight-0 pixels keep z = 0.5 and contribute nothing. Throws
// degenerate_window_error when no pixel has nonzero weight.
void em_step(GmmState& state, const FeatureGrid& features, const MaskPlane& weights,
             const GmmParams& params);

// Weighted log-likelihood of the equal-prior two-component mixture over the
// weight-1 pixels under the current state.
double gmm_log_likelihood(const GmmState& state, const FeatureGrid& features,
                          const MaskPlane& weights);

struct LgmmResult {
  MaskPlane location;  // z_2 inside the hard window, 0 outside
  GmmState state;      // final parameters (coordinate means feed the reports)
};

// Algorithm "L_GMM": Butterworth window around the center, hard-threshold
// weights, em_iters weighted EM iterations, returns the object component's
// responsibilities as the location mask.
LgmmResult run_lgmm_full(const Image& x, std::pair<int, int> center,
                         const ButterworthParams& butter, const GmmParams& gmm);

MaskPlane run_lgmm(const Image& x, std::pair<int, int> center,
                   const ButterworthParams& butter, const GmmParams& gmm);

}  // namespace irgs
