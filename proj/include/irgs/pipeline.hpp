#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "irgs/local_gmm.hpp"
#include "irgs/quality.hpp"
#include "irgs/recon.hpp"
#include "irgs/slots.hpp"

namespace irgs {

enum class Ablation { full, q_only, l_only };

struct PipelineConfig {
  int num_slots = 3;  // K, background plus object slots
  QualityParams quality;
  ButterworthParams butterworth;
  GmmParams gmm;
  LossWeights loss;
  Ablation ablation = Ablation::full;
  bool adjust_background = true;
  double learning_rate = 1e-2;
};

// Test seam: the decomposition loop with the per-slot quality and location
// stages replaceable. `localize` may record the center and component means on
// the slot it is given.
struct DecomposeHooks {
  std::function<MaskPlane(const Image& x, const Image& x_re, const MaskPlane& s, int k)> quality;
  std::function<MaskPlane(const Image& x, const MaskPlane& s, const MaskPlane& q, int k,
                          Slot& slot, std::vector<std::string>& warnings)>
      localize;
};

// Algorithm: K iterations of reconstruct -> quality -> localize -> mask
// update, starting from s = 1. Slot 1 and the q_only ablation use L = 1; the
// l_only ablation forces Q = 1. A degenerate clustering window yields an
// empty slot mask and a recorded warning instead of aborting.
SlotDecomposition decompose(const ReconModel& model, const Image& x, const PipelineConfig& cfg,
                            std::uint64_t seed);

SlotDecomposition decompose_with_hooks(const ReconModel& model, const Image& x,
                                       const PipelineConfig& cfg, std::uint64_t seed,
                                       const DecomposeHooks& hooks);

// Replaces m^(1) by 1 - sum of the object masks, clamped to [0,1].
void adjust_background(SlotDecomposition& d);

// Per-pixel argmax over slot masks; labels are 1-based slot indices, ties go
// to the smallest slot.
LabelPlane hard_assignment(const SlotDecomposition& d);

// One seeded-shuffle pass of decompose / adjust / loss / backward / sgd_step
// over the dataset. Returns the mean total loss. Throws numeric_error when a
// loss goes non-finite.
double train_epoch(ReconModel& model, const std::vector<Image>& dataset,
                   const PipelineConfig& cfg, std::uint64_t seed);

}  // namespace irgs
