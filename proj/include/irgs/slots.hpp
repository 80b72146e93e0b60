#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "irgs/image.hpp"

namespace irgs {

// Posterior stats of one reconstruction: mean/log-variance for the VAE,
// deterministic code (log_var empty) for the autoencoder.
struct LatentStats {
  std::vector<double> mean;
  std::vector<double> log_var;

  bool is_vae() const { return !log_var.empty(); }
};

// One decomposition step. Besides the (mask, reconstruction, latent) triple
// this keeps the frozen context needed to replay the slot's forward pass:
// the remaining mask it was reconstructed against, its location mask, and
// the latent noise that was sampled.
struct Slot {
  MaskPlane mask;    // m^(k)
  Image recon;       // x^re,(k)
  LatentStats latent;
  std::optional<std::pair<int, int>> center;                       // localization center, k >= 2
  std::optional<std::array<std::array<double, 5>, 2>> gmm_means;   // final component means

  MaskPlane s_prev;           // s^(k-1), constant for gradients
  MaskPlane location;         // L^(k): ones for slot 1 / q_only, zeros if degenerate
  std::vector<double> noise;  // VAE latent noise; empty in autoencoder mode
};

struct SlotDecomposition {
  std::vector<Slot> slots;       // k = 1..K in order
  MaskPlane final_remaining;     // s^(K)
  double quality_sigma1 = 0.0;   // sigma1 the masks were computed with
  bool quality_identity = false; // true when Q was forced to 1 (l_only ablation)
  bool background_adjusted = false;
  std::vector<std::string> warnings;

  int num_slots() const { return static_cast<int>(slots.size()); }
};

}  // namespace irgs
