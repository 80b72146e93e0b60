#include "irgs/local_gmm.hpp"

#include <algorithm>
#include <cmath>

#include "irgs/rng.hpp"

namespace irgs {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_density(const PixelFeature& y, const std::array<double, kFeatureDim>& mean,
                   const std::array<double, kFeatureDim>& var) {
  double acc = 0.0;
  for (int d = 0; d < kFeatureDim; ++d) {
    const double diff = y[d] - mean[d];
    acc += kLog2Pi + std::log(var[d]) + diff * diff / var[d];
  }
  return -0.5 * acc;
}

void check_shapes(const GmmState& state, const FeatureGrid& features, const MaskPlane& weights) {
  if (features.height != weights.height() || features.width != weights.width() ||
      state.height != features.height || state.width != features.width) {
    throw std::invalid_argument("gmm: feature/weight/state dimensions do not match");
  }
}

}  // namespace

GmmState init_gmm(const FeatureGrid& features, std::uint64_t seed) {
  GmmState state;
  state.height = features.height;
  state.width = features.width;
  state.resp.assign(features.features.size(), {0.5, 0.5});
  state.means[0].fill(0.0);
  SeededRng rng(seed);
  for (int d = 0; d < kFeatureDim; ++d) {
    state.means[1][d] = rng.uniform01();
  }
  for (int k = 0; k < kGmmComponents; ++k) {
    state.variances[k].fill(1.0);
  }
  return state;
}

void em_step(GmmState& state, const FeatureGrid& features, const MaskPlane& weights,
             const GmmParams& params) {
  check_shapes(state, features, weights);
  if (!(params.variance_floor > 0.0)) {
    throw std::invalid_argument("variance_floor must be positive");
  }

  const std::size_t n = features.features.size();
  bool any_active = false;
  for (std::size_t p = 0; p < n; ++p) {
    if (weights.values()[p] != 0.0) {
      any_active = true;
      break;
    }
  }
  if (!any_active) {
    throw degenerate_window_error("gmm window has no active pixels");
  }

  // E-step first, from the incoming parameters. Running the mean update
  // before any responsibility update would wipe out the distinct component
  // initialization (z starts at 0.5 for both), leaving EM stuck at the
  // symmetric fixed point.
  for (std::size_t p = 0; p < n; ++p) {
    if (weights.values()[p] == 0.0) continue;
    std::array<double, kGmmComponents> logd{};
    for (int k = 0; k < kGmmComponents; ++k) {
      logd[k] = log_density(features.features[p], state.means[k], state.variances[k]);
    }
    const double m = std::max(logd[0], logd[1]);
    const double e0 = std::exp(logd[0] - m);
    const double e1 = std::exp(logd[1] - m);
    state.resp[p][0] = e0 / (e0 + e1);
    state.resp[p][1] = e1 / (e0 + e1);
  }

  // M-step: means, then per-coordinate variances about the new means.
  for (int k = 0; k < kGmmComponents; ++k) {
    double denom = 0.0;
    std::array<double, kFeatureDim> mean_acc{};
    for (std::size_t p = 0; p < n; ++p) {
      const double zw = state.resp[p][static_cast<std::size_t>(k)] * weights.values()[p];
      if (zw == 0.0) continue;
      denom += zw;
      for (int d = 0; d < kFeatureDim; ++d) {
        mean_acc[d] += zw * features.features[p][d];
      }
    }
    if (denom <= 0.0) {
      // Responsibilities collapsed to zero for this component; keep its
      // previous parameters rather than dividing by zero.
      continue;
    }
    std::array<double, kFeatureDim> mean{};
    for (int d = 0; d < kFeatureDim; ++d) {
      mean[d] = mean_acc[d] / denom;
    }
    std::array<double, kFeatureDim> var_acc{};
    for (std::size_t p = 0; p < n; ++p) {
      const double zw = state.resp[p][static_cast<std::size_t>(k)] * weights.values()[p];
      if (zw == 0.0) continue;
      for (int d = 0; d < kFeatureDim; ++d) {
        const double diff = features.features[p][d] - mean[d];
        var_acc[d] += zw * diff * diff;
      }
    }
    state.means[k] = mean;
    for (int d = 0; d < kFeatureDim; ++d) {
      state.variances[k][d] = std::max(var_acc[d] / denom, params.variance_floor);
    }
  }
}

double gmm_log_likelihood(const GmmState& state, const FeatureGrid& features,
                          const MaskPlane& weights) {
  check_shapes(state, features, weights);
  constexpr double kLogHalf = -0.69314718055994530941723212145818;
  double total = 0.0;
  for (std::size_t p = 0; p < features.features.size(); ++p) {
    const double w = weights.values()[p];
    if (w == 0.0) continue;
    std::array<double, kGmmComponents> logd{};
    for (int k = 0; k < kGmmComponents; ++k) {
      logd[k] = kLogHalf + log_density(features.features[p], state.means[k], state.variances[k]);
    }
    const double m = std::max(logd[0], logd[1]);
    total += w * (m + std::log(std::exp(logd[0] - m) + std::exp(logd[1] - m)));
  }
  return total;
}

LgmmResult run_lgmm_full(const Image& x, std::pair<int, int> center,
                         const ButterworthParams& butter, const GmmParams& gmm) {
  if (gmm.em_iters < 1) {
    throw std::invalid_argument("em_iters must be >= 1");
  }
  const MaskPlane g = butterworth_mask(x.height(), x.width(), center, butter);
  const MaskPlane w = hard_weights(g);
  const FeatureGrid features = build_features(x);
  GmmState state = init_gmm(features, gmm.seed);
  for (int it = 0; it < gmm.em_iters; ++it) {
    em_step(state, features, w, gmm);
  }
  MaskPlane location(x.height(), x.width(), 0.0);
  for (int i = 0; i < x.height(); ++i) {
    for (int j = 0; j < x.width(); ++j) {
      if (w.at(i, j) != 0.0) {
        location.at(i, j) = state.resp_at(i, j, 1);
      }
    }
  }
  return {std::move(location), std::move(state)};
}

MaskPlane run_lgmm(const Image& x, std::pair<int, int> center, const ButterworthParams& butter,
                   const GmmParams& gmm) {
  return run_lgmm_full(x, center, butter, gmm).location;
}

}  // namespace irgs
