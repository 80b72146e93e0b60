#include "irgs/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "irgs/rng.hpp"

namespace irgs {

namespace {

constexpr std::uint64_t kNoiseSalt = 0x6e6f697365ull;  // per-slot latent noise
constexpr std::uint64_t kGmmSalt = 0x676d6dull;        // per-slot GMM init

MaskPlane default_quality(const Image& x, const Image& x_re, const MaskPlane& s,
                          const QualityParams& p) {
  return compute_quality(x, x_re, s, p);
}

MaskPlane default_localize(const Image& x, const MaskPlane& s, const MaskPlane& q,
                           const PipelineConfig& cfg, std::uint64_t slot_gmm_seed, Slot& slot) {
  MaskPlane masked(x.height(), x.width());
  for (int i = 0; i < x.height(); ++i) {
    for (int j = 0; j < x.width(); ++j) {
      masked.at(i, j) = s.at(i, j) * q.at(i, j);
    }
  }
  const Plane q_area = area_quality(masked, cfg.quality);
  const auto center = find_center(q_area);
  slot.center = center;
  GmmParams gmm = cfg.gmm;
  gmm.seed = slot_gmm_seed;
  LgmmResult res = run_lgmm_full(x, center, cfg.butterworth, gmm);
  slot.gmm_means = res.state.means;
  return std::move(res.location);
}

}  // namespace

SlotDecomposition decompose_with_hooks(const ReconModel& model, const Image& x,
                                       const PipelineConfig& cfg, std::uint64_t seed,
                                       const DecomposeHooks& hooks) {
  if (cfg.num_slots < 2) {
    throw std::invalid_argument("pipeline needs at least 2 slots (background + object)");
  }
  const int h = x.height();
  const int w = x.width();

  SlotDecomposition d;
  d.quality_sigma1 = cfg.quality.sigma1;
  d.quality_identity = cfg.ablation == Ablation::l_only;
  d.slots.reserve(static_cast<std::size_t>(cfg.num_slots));

  MaskPlane s(h, w, 1.0);
  for (int k = 1; k <= cfg.num_slots; ++k) {
    Slot slot;
    slot.s_prev = s;
    slot.noise = draw_latent_noise(model.desc(), mix_seed(seed, kNoiseSalt + k));
    auto [x_re, stats] = reconstruct_with_noise(model, x, s, slot.noise);
    slot.recon = std::move(x_re);
    slot.latent = std::move(stats);

    MaskPlane q = d.quality_identity
                      ? MaskPlane(h, w, 1.0)
                      : (hooks.quality ? hooks.quality(x, slot.recon, s, k)
                                       : default_quality(x, slot.recon, s, cfg.quality));

    MaskPlane location(h, w, 1.0);
    if (k >= 2 && cfg.ablation != Ablation::q_only) {
      // GMM init depends on the configured seed and the slot only, not on the
      // per-run seed: the component-2 draw then lands the same way for the
      // same window every epoch, which keeps the object/background assignment
      // of a scene stable across training.
      // A degenerate clustering window empties the slot instead of aborting,
      // so images with fewer than K objects keep training.
      try {
        location = hooks.localize
                       ? hooks.localize(x, s, q, k, slot, d.warnings)
                       : default_localize(x, s, q, cfg, mix_seed(cfg.gmm.seed, kGmmSalt + k), slot);
      } catch (const degenerate_window_error& e) {
        d.warnings.push_back("slot " + std::to_string(k) + ": degenerate window (" + e.what() +
                             "), emitting empty mask");
        location = MaskPlane(h, w, 0.0);
        slot.gmm_means.reset();
      }
    }
    slot.location = std::move(location);

    MaskPlane m(h, w);
    MaskPlane s_next(h, w);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double ql = q.at(i, j) * slot.location.at(i, j);
        m.at(i, j) = s.at(i, j) * ql;
        s_next.at(i, j) = s.at(i, j) * (1.0 - ql);
      }
    }
    slot.mask = std::move(m);
    d.slots.push_back(std::move(slot));
    s = std::move(s_next);
  }
  d.final_remaining = std::move(s);
  return d;
}

SlotDecomposition decompose(const ReconModel& model, const Image& x, const PipelineConfig& cfg,
                            std::uint64_t seed) {
  return decompose_with_hooks(model, x, cfg, seed, DecomposeHooks{});
}

void adjust_background(SlotDecomposition& d) {
  if (d.slots.empty()) {
    throw std::invalid_argument("adjust_background: empty decomposition");
  }
  MaskPlane& bg = d.slots.front().mask;
  for (int i = 0; i < bg.height(); ++i) {
    for (int j = 0; j < bg.width(); ++j) {
      double object_sum = 0.0;
      for (std::size_t k = 1; k < d.slots.size(); ++k) {
        object_sum += d.slots[k].mask.at(i, j);
      }
      bg.at(i, j) = std::clamp(1.0 - object_sum, 0.0, 1.0);
    }
  }
  d.background_adjusted = true;
}

LabelPlane hard_assignment(const SlotDecomposition& d) {
  if (d.slots.empty()) {
    throw std::invalid_argument("hard_assignment: empty decomposition");
  }
  const MaskPlane& first = d.slots.front().mask;
  LabelPlane labels(first.height(), first.width(), 1);
  for (int i = 0; i < first.height(); ++i) {
    for (int j = 0; j < first.width(); ++j) {
      int best_k = 1;
      double best = first.at(i, j);
      for (std::size_t k = 1; k < d.slots.size(); ++k) {
        const double v = d.slots[k].mask.at(i, j);
        if (v > best) {
          best = v;
          best_k = static_cast<int>(k) + 1;
        }
      }
      labels.at(i, j) = best_k;
    }
  }
  return labels;
}

double train_epoch(ReconModel& model, const std::vector<Image>& dataset,
                   const PipelineConfig& cfg, std::uint64_t seed) {
  if (dataset.empty()) {
    throw std::invalid_argument("train_epoch: empty dataset");
  }
  SeededRng rng(seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with the pinned generator so the visit order is reproducible.
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = rng.next_u64() % (i + 1);
    std::swap(order[i], order[j]);
  }

  double loss_sum = 0.0;
  for (std::size_t idx : order) {
    const std::uint64_t image_seed = rng.next_u64();
    SlotDecomposition d = decompose(model, dataset[idx], cfg, image_seed);
    if (cfg.adjust_background) {
      adjust_background(d);
    }
    const double total = loss(d, dataset[idx], cfg.loss).total(cfg.loss);
    if (!std::isfinite(total)) {
      throw numeric_error("train_epoch: non-finite loss on image " + std::to_string(idx));
    }
    loss_sum += total;
    const ParamSet grads = backward(model, dataset[idx], d, cfg.loss);
    sgd_step(model, grads, cfg.learning_rate);
  }
  return loss_sum / static_cast<double>(dataset.size());
}

}  // namespace irgs
