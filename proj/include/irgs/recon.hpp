#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <utility>

#include "irgs/image.hpp"
#include "irgs/slots.hpp"

namespace irgs {

// Raised on non-finite losses or gradients.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ReconMode : std::uint8_t { autoencoder = 0, vae = 1 };

struct ModelDesc {
  int height = 0;
  int width = 0;
  int hidden_dim = 64;
  int latent_dim = 16;
  ReconMode mode = ReconMode::vae;

  int input_dim() const { return height * width * 4; }   // rgb + remaining mask
  int output_dim() const { return height * width * 3; }
};

// Parameter block shared by the model and its gradients. logvar_* are empty
// in autoencoder mode.
struct ParamSet {
  Eigen::MatrixXd enc_w;     // hidden x input
  Eigen::VectorXd enc_b;
  Eigen::MatrixXd mu_w;      // latent x hidden (AE: the code head)
  Eigen::VectorXd mu_b;
  Eigen::MatrixXd logvar_w;  // latent x hidden
  Eigen::VectorXd logvar_b;
  Eigen::MatrixXd dec_w;     // hidden x latent
  Eigen::VectorXd dec_b;
  Eigen::MatrixXd out_w;     // output x hidden
  Eigen::VectorXd out_b;

  static ParamSet zeros(const ModelDesc& desc);

  // Visits every coefficient in checkpoint order (matrices row-major).
  template <typename Fn>
  void visit(Fn&& fn) {
    auto mat = [&](Eigen::MatrixXd& m) {
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) fn(m(r, c));
    };
    auto vec = [&](Eigen::VectorXd& v) {
      for (Eigen::Index r = 0; r < v.size(); ++r) fn(v(r));
    };
    mat(enc_w); vec(enc_b);
    mat(mu_w); vec(mu_b);
    mat(logvar_w); vec(logvar_b);
    mat(dec_w); vec(dec_b);
    mat(out_w); vec(out_b);
  }
};

// One-hidden-layer tanh MLP encoder/decoder over (image, remaining mask).
class ReconModel {
 public:
  ReconModel(ModelDesc desc, std::uint64_t seed);
  ReconModel(ModelDesc desc, ParamSet params);

  const ModelDesc& desc() const { return desc_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  ModelDesc desc_;
  ParamSet params_;
};

// Loss configuration for the slot-wise objective: masked reconstruction term,
// beta-weighted constant prior on masked-out pixels, gamma-weighted KL.
struct LossWeights {
  double beta = 0.1;
  double gamma = 0.5;
  double zeta = 0.0;
  bool grad_through_q = true;
  bool mask_weighted_recon = true;
};

struct LossBreakdown {
  double reconstruction = 0.0;  // sum_k m (x~re - x)^2
  double prior = 0.0;           // sum_k (1-m)(x_re - zeta)^2, unweighted by beta
  double kl = 0.0;              // sum_k KL, unweighted by gamma
  double total(const LossWeights& w) const {
    return reconstruction + w.beta * prior + w.gamma * kl;
  }
};

// Full forward pass: x concatenated with s as a fourth channel, encoded,
// (optionally reparameterized with the given noise), decoded, clamped to
// [0,1]. `noise` must have latent_dim entries in VAE mode; empty otherwise.
std::pair<Image, LatentStats> reconstruct_with_noise(const ReconModel& model, const Image& x,
                                                     const MaskPlane& s,
                                                     const std::vector<double>& noise);

// Same, drawing the VAE noise from the seed.
std::pair<Image, LatentStats> reconstruct(const ReconModel& model, const Image& x,
                                          const MaskPlane& s, std::uint64_t seed);

std::vector<double> draw_latent_noise(const ModelDesc& desc, std::uint64_t seed);

// 0.5 * sum_d (mean^2 + var - log var - 1); zero for autoencoder stats.
double kl_term(const LatentStats& stats);

// Evaluates the three-term objective on a decomposition as stored.
LossBreakdown loss(const SlotDecomposition& slots, const Image& x, const LossWeights& weights);

// The differentiable objective: re-runs the reconstructor for every slot
// against its frozen remaining mask and noise. With grad_through_q the first
// term's mask is recomputed as s * Q(x_re) * L so quality carries gradient;
// everything else (s, L, the stored masks in the prior term) is constant.
double replay_loss(const ReconModel& model, const Image& x, const SlotDecomposition& slots,
                   const LossWeights& weights);

// Exact gradient of replay_loss with respect to every model parameter.
ParamSet backward(const ReconModel& model, const Image& x, const SlotDecomposition& slots,
                  const LossWeights& weights);

// theta <- theta - lr * grad. Throws numeric_error on non-finite gradients.
void sgd_step(ReconModel& model, const ParamSet& grads, double lr);

// Binary checkpoint: "IRGS" magic, u32 LE version, mode byte, u32 LE dims
// (height, width, hidden, latent), then all parameters as f32 LE.
void save_checkpoint(const ReconModel& model, const std::filesystem::path& path);
ReconModel load_checkpoint(const std::filesystem::path& path);

}  // namespace irgs
