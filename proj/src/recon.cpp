#include "irgs/recon.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "irgs/rng.hpp"

namespace irgs {

namespace {

void check_desc(const ModelDesc& desc) {
  if (desc.height < 1 || desc.width < 1 || desc.hidden_dim < 1 || desc.latent_dim < 1) {
    throw std::invalid_argument("model descriptor dimensions must be positive");
  }
}

// Packs (x, s) as interleaved 4-channel pixels, centered at zero. The
// centering folds into the encoder's affine layer; without it the constant
// component of the raw [0,1] inputs dominates every first-layer update and
// plain SGD stalls at the dataset mean.
Eigen::VectorXd pack_input(const Image& x, const MaskPlane& s) {
  const int h = x.height();
  const int w = x.width();
  Eigen::VectorXd u(static_cast<Eigen::Index>(h) * w * 4);
  Eigen::Index p = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      u[p++] = x.at(i, j, 0) - 0.5;
      u[p++] = x.at(i, j, 1) - 0.5;
      u[p++] = x.at(i, j, 2) - 0.5;
      u[p++] = s.at(i, j) - 0.5;
    }
  }
  return u;
}

struct ForwardActs {
  Eigen::VectorXd input;
  Eigen::VectorXd h1;
  Eigen::VectorXd mu;      // AE: the code
  Eigen::VectorXd logvar;  // VAE only
  Eigen::VectorXd z;
  Eigen::VectorXd h2;
  Eigen::VectorXd o;       // pre-clamp output
};

ForwardActs forward_pass(const ReconModel& model, const Image& x, const MaskPlane& s,
                         const std::vector<double>& noise) {
  const ModelDesc& desc = model.desc();
  if (x.height() != desc.height || x.width() != desc.width) {
    throw std::invalid_argument("reconstruct: image does not match model dimensions");
  }
  if (s.height() != desc.height || s.width() != desc.width) {
    throw std::invalid_argument("reconstruct: mask does not match model dimensions");
  }
  const bool vae = desc.mode == ReconMode::vae;
  if (vae && static_cast<int>(noise.size()) != desc.latent_dim) {
    throw std::invalid_argument("reconstruct: VAE noise must have latent_dim entries");
  }
  if (!vae && !noise.empty()) {
    throw std::invalid_argument("reconstruct: autoencoder takes no latent noise");
  }

  const ParamSet& p = model.params();
  ForwardActs acts;
  acts.input = pack_input(x, s);
  acts.h1 = (p.enc_w * acts.input + p.enc_b).array().tanh().matrix();
  acts.mu = p.mu_w * acts.h1 + p.mu_b;
  if (vae) {
    acts.logvar = p.logvar_w * acts.h1 + p.logvar_b;
    acts.z = acts.mu;
    for (int d = 0; d < desc.latent_dim; ++d) {
      acts.z[d] += std::exp(0.5 * acts.logvar[d]) * noise[static_cast<std::size_t>(d)];
    }
  } else {
    acts.z = acts.mu;
  }
  acts.h2 = (p.dec_w * acts.z + p.dec_b).array().tanh().matrix();
  acts.o = p.out_w * acts.h2 + p.out_b;
  return acts;
}

Image clamp_output(const ForwardActs& acts, int h, int w) {
  Image out(h, w);
  Eigen::Index p = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int c = 0; c < 3; ++c, ++p) {
        out.at(i, j, c) = std::clamp(acts.o[p], 0.0, 1.0);
      }
    }
  }
  return out;
}

LatentStats stats_from(const ForwardActs& acts, bool vae) {
  LatentStats st;
  st.mean.assign(acts.mu.data(), acts.mu.data() + acts.mu.size());
  if (vae) {
    st.log_var.assign(acts.logvar.data(), acts.logvar.data() + acts.logvar.size());
  }
  return st;
}

void check_slots(const SlotDecomposition& slots, const Image& x) {
  if (slots.slots.empty()) {
    throw std::invalid_argument("loss: decomposition has no slots");
  }
  for (const Slot& slot : slots.slots) {
    if (!slot.recon.same_shape(x) || slot.mask.height() != x.height() ||
        slot.mask.width() != x.width()) {
      throw std::invalid_argument("loss: slot dimensions do not match the image");
    }
  }
}

// Per-pixel mask used in the reconstruction term of the replayed objective.
// With grad_through_q it is the live s*Q(x_re)*L product; otherwise the
// stored mask.
struct Term1Mask {
  double value;
  bool live;  // true when the quality factor carries gradient
};

Term1Mask term1_mask(const SlotDecomposition& slots, const LossWeights& w, double sbar,
                     double lbar, double stored, double sq_err) {
  if (!w.grad_through_q) {
    return {stored, false};
  }
  if (slots.quality_identity) {
    return {sbar * lbar, false};
  }
  const double q = std::exp(-sbar * sq_err / (2.0 * slots.quality_sigma1));
  return {sbar * q * lbar, true};
}

void require_sigma_for_replay(const SlotDecomposition& slots, const LossWeights& w) {
  if (w.grad_through_q && !slots.quality_identity && !(slots.quality_sigma1 > 0.0)) {
    throw std::invalid_argument("replay: decomposition carries no quality bandwidth");
  }
}

}  // namespace

ParamSet ParamSet::zeros(const ModelDesc& desc) {
  check_desc(desc);
  ParamSet p;
  p.enc_w = Eigen::MatrixXd::Zero(desc.hidden_dim, desc.input_dim());
  p.enc_b = Eigen::VectorXd::Zero(desc.hidden_dim);
  p.mu_w = Eigen::MatrixXd::Zero(desc.latent_dim, desc.hidden_dim);
  p.mu_b = Eigen::VectorXd::Zero(desc.latent_dim);
  if (desc.mode == ReconMode::vae) {
    p.logvar_w = Eigen::MatrixXd::Zero(desc.latent_dim, desc.hidden_dim);
    p.logvar_b = Eigen::VectorXd::Zero(desc.latent_dim);
  }
  p.dec_w = Eigen::MatrixXd::Zero(desc.hidden_dim, desc.latent_dim);
  p.dec_b = Eigen::VectorXd::Zero(desc.hidden_dim);
  p.out_w = Eigen::MatrixXd::Zero(desc.output_dim(), desc.hidden_dim);
  p.out_b = Eigen::VectorXd::Zero(desc.output_dim());
  return p;
}

ReconModel::ReconModel(ModelDesc desc, std::uint64_t seed)
    : desc_(desc), params_(ParamSet::zeros(desc)) {
  SeededRng rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& m) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        m(r, c) = rng.uniform(-bound, bound);
      }
    }
  };
  fill(params_.enc_w);
  // The mask channel starts disconnected: an untrained random coupling to s
  // would scramble later-slot reconstructions before any mask has claimed
  // pixels to learn from. Columns 4k+3 are the s entries of the packed input.
  for (Eigen::Index c = 3; c < params_.enc_w.cols(); c += 4) {
    params_.enc_w.col(c).setZero();
  }
  fill(params_.mu_w);
  if (desc_.mode == ReconMode::vae) {
    fill(params_.logvar_w);
    // start with a small posterior spread so early samples stay tame
    params_.logvar_b.setConstant(-4.0);
  }
  fill(params_.dec_w);
  fill(params_.out_w);
  // Center raw outputs mid-range so the clamp does not bite at init.
  params_.out_b.setConstant(0.5);
}

ReconModel::ReconModel(ModelDesc desc, ParamSet params) : desc_(desc), params_(std::move(params)) {
  check_desc(desc_);
}

std::vector<double> draw_latent_noise(const ModelDesc& desc, std::uint64_t seed) {
  if (desc.mode != ReconMode::vae) {
    return {};
  }
  SeededRng rng(seed);
  std::vector<double> noise(static_cast<std::size_t>(desc.latent_dim));
  for (double& n : noise) {
    n = rng.normal();
  }
  return noise;
}

std::pair<Image, LatentStats> reconstruct_with_noise(const ReconModel& model, const Image& x,
                                                     const MaskPlane& s,
                                                     const std::vector<double>& noise) {
  const ForwardActs acts = forward_pass(model, x, s, noise);
  return {clamp_output(acts, x.height(), x.width()),
          stats_from(acts, model.desc().mode == ReconMode::vae)};
}

std::pair<Image, LatentStats> reconstruct(const ReconModel& model, const Image& x,
                                          const MaskPlane& s, std::uint64_t seed) {
  return reconstruct_with_noise(model, x, s, draw_latent_noise(model.desc(), seed));
}

double kl_term(const LatentStats& stats) {
  if (!stats.is_vae()) {
    return 0.0;
  }
  double acc = 0.0;
  for (std::size_t d = 0; d < stats.mean.size(); ++d) {
    const double mu = stats.mean[d];
    const double lv = stats.log_var[d];
    acc += mu * mu + std::exp(lv) - lv - 1.0;
  }
  return 0.5 * acc;
}

LossBreakdown loss(const SlotDecomposition& slots, const Image& x, const LossWeights& weights) {
  check_slots(slots, x);
  LossBreakdown out;
  for (const Slot& slot : slots.slots) {
    for (int i = 0; i < x.height(); ++i) {
      for (int j = 0; j < x.width(); ++j) {
        const double m = slot.mask.at(i, j);
        for (int c = 0; c < 3; ++c) {
          const double re = slot.recon.at(i, j, c);
          const double target = weights.mask_weighted_recon ? m * re : re;
          const double e = target - x.at(i, j, c);
          out.reconstruction += m * e * e;
          const double pe = re - weights.zeta;
          out.prior += (1.0 - m) * pe * pe;
        }
      }
    }
    out.kl += kl_term(slot.latent);
  }
  return out;
}

double replay_loss(const ReconModel& model, const Image& x, const SlotDecomposition& slots,
                   const LossWeights& weights) {
  check_slots(slots, x);
  require_sigma_for_replay(slots, weights);
  double total = 0.0;
  for (const Slot& slot : slots.slots) {
    const ForwardActs acts = forward_pass(model, x, slot.s_prev, slot.noise);
    const Image x_re = clamp_output(acts, x.height(), x.width());
    for (int i = 0; i < x.height(); ++i) {
      for (int j = 0; j < x.width(); ++j) {
        double sq_err = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double d = x_re.at(i, j, c) - x.at(i, j, c);
          sq_err += d * d;
        }
        const double stored = slot.mask.at(i, j);
        const Term1Mask m1 = term1_mask(slots, weights, slot.s_prev.at(i, j),
                                        slot.location.at(i, j), stored, sq_err);
        for (int c = 0; c < 3; ++c) {
          const double re = x_re.at(i, j, c);
          const double target = weights.mask_weighted_recon ? m1.value * re : re;
          const double e = target - x.at(i, j, c);
          total += m1.value * e * e;
          const double pe = re - weights.zeta;
          total += weights.beta * (1.0 - stored) * pe * pe;
        }
      }
    }
    if (model.desc().mode == ReconMode::vae) {
      total += weights.gamma * kl_term(stats_from(acts, true));
    }
  }
  return total;
}

ParamSet backward(const ReconModel& model, const Image& x, const SlotDecomposition& slots,
                  const LossWeights& weights) {
  check_slots(slots, x);
  require_sigma_for_replay(slots, weights);
  const ModelDesc& desc = model.desc();
  const ParamSet& p = model.params();
  const bool vae = desc.mode == ReconMode::vae;
  ParamSet g = ParamSet::zeros(desc);

  for (const Slot& slot : slots.slots) {
    const ForwardActs acts = forward_pass(model, x, slot.s_prev, slot.noise);
    const Image x_re = clamp_output(acts, x.height(), x.width());

    Eigen::VectorXd g_o = Eigen::VectorXd::Zero(desc.output_dim());
    Eigen::Index pix = 0;
    for (int i = 0; i < x.height(); ++i) {
      for (int j = 0; j < x.width(); ++j, pix += 3) {
        double d[3];
        double sq_err = 0.0;
        for (int c = 0; c < 3; ++c) {
          d[c] = x_re.at(i, j, c) - x.at(i, j, c);
          sq_err += d[c] * d[c];
        }
        const double sbar = slot.s_prev.at(i, j);
        const double stored = slot.mask.at(i, j);
        const Term1Mask m1 =
            term1_mask(slots, weights, sbar, slot.location.at(i, j), stored, sq_err);

        double e[3];        // residual of the (possibly mask-weighted) target
        double sum_e2 = 0.0;
        double sum_e_re = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double re = x_re.at(i, j, c);
          const double target = weights.mask_weighted_recon ? m1.value * re : re;
          e[c] = target - x.at(i, j, c);
          sum_e2 += e[c] * e[c];
          sum_e_re += e[c] * re;
        }

        // dT1/dm: the leading mask factor plus, under mask weighting, the
        // mask inside the target.
        double dt1_dm = 0.0;
        if (m1.live) {
          dt1_dm = sum_e2;
          if (weights.mask_weighted_recon) {
            dt1_dm += 2.0 * m1.value * sum_e_re;
          }
        }

        for (int c = 0; c < 3; ++c) {
          double grad = 2.0 * m1.value * e[c] * (weights.mask_weighted_recon ? m1.value : 1.0);
          if (m1.live) {
            // dm/dx_re = -m * s * d / sigma1 through the quality exponent
            grad += dt1_dm * (-m1.value * sbar * d[c] / slots.quality_sigma1);
          }
          grad += 2.0 * weights.beta * (1.0 - stored) * (x_re.at(i, j, c) - weights.zeta);

          const double raw = acts.o[pix + c];
          g_o[pix + c] = (raw > 0.0 && raw < 1.0) ? grad : 0.0;
        }
      }
    }

    g.out_b += g_o;
    g.out_w.noalias() += g_o * acts.h2.transpose();
    Eigen::VectorXd g_h2 = p.out_w.transpose() * g_o;
    Eigen::VectorXd g_a2 =
        (g_h2.array() * (1.0 - acts.h2.array().square())).matrix();
    g.dec_b += g_a2;
    g.dec_w.noalias() += g_a2 * acts.z.transpose();
    Eigen::VectorXd g_z = p.dec_w.transpose() * g_a2;

    Eigen::VectorXd g_h1;
    if (vae) {
      Eigen::VectorXd g_mu = g_z + weights.gamma * acts.mu;
      Eigen::VectorXd g_lv(desc.latent_dim);
      for (int dd = 0; dd < desc.latent_dim; ++dd) {
        const double lv = acts.logvar[dd];
        g_lv[dd] = g_z[dd] * slot.noise[static_cast<std::size_t>(dd)] * 0.5 * std::exp(0.5 * lv) +
                   weights.gamma * 0.5 * (std::exp(lv) - 1.0);
      }
      g.mu_b += g_mu;
      g.mu_w.noalias() += g_mu * acts.h1.transpose();
      g.logvar_b += g_lv;
      g.logvar_w.noalias() += g_lv * acts.h1.transpose();
      g_h1 = p.mu_w.transpose() * g_mu + p.logvar_w.transpose() * g_lv;
    } else {
      g.mu_b += g_z;
      g.mu_w.noalias() += g_z * acts.h1.transpose();
      g_h1 = p.mu_w.transpose() * g_z;
    }

    Eigen::VectorXd g_a1 =
        (g_h1.array() * (1.0 - acts.h1.array().square())).matrix();
    g.enc_b += g_a1;
    g.enc_w.noalias() += g_a1 * acts.input.transpose();
  }
  return g;
}

void sgd_step(ReconModel& model, const ParamSet& grads, double lr) {
  ParamSet& p = model.params();
  auto apply = [lr](Eigen::MatrixXd& dst, const Eigen::MatrixXd& g) {
    if (dst.rows() != g.rows() || dst.cols() != g.cols()) {
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    }
    if (!g.allFinite()) {
      throw numeric_error("sgd_step: non-finite gradient");
    }
    dst.noalias() -= lr * g;
  };
  auto apply_v = [lr](Eigen::VectorXd& dst, const Eigen::VectorXd& g) {
    if (dst.size() != g.size()) {
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    }
    if (!g.allFinite()) {
      throw numeric_error("sgd_step: non-finite gradient");
    }
    dst -= lr * g;
  };
  apply(p.enc_w, grads.enc_w);
  apply_v(p.enc_b, grads.enc_b);
  apply(p.mu_w, grads.mu_w);
  apply_v(p.mu_b, grads.mu_b);
  if (model.desc().mode == ReconMode::vae) {
    apply(p.logvar_w, grads.logvar_w);
    apply_v(p.logvar_b, grads.logvar_b);
  }
  apply(p.dec_w, grads.dec_w);
  apply_v(p.dec_b, grads.dec_b);
  apply(p.out_w, grads.out_w);
  apply_v(p.out_b, grads.out_b);
}

namespace {

constexpr char kMagic[4] = {'I', 'R', 'G', 'S'};
constexpr std::uint32_t kVersion = 1;

void write_u32le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32le(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32le(os, bits);
}

float read_f32le(std::istream& is) {
  const std::uint32_t bits = read_u32le(is);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void save_checkpoint(const ReconModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::invalid_argument("cannot open checkpoint for writing: " + path.string());
  }
  const ModelDesc& d = model.desc();
  os.write(kMagic, 4);
  write_u32le(os, kVersion);
  const char mode = static_cast<char>(d.mode);
  os.write(&mode, 1);
  write_u32le(os, static_cast<std::uint32_t>(d.height));
  write_u32le(os, static_cast<std::uint32_t>(d.width));
  write_u32le(os, static_cast<std::uint32_t>(d.hidden_dim));
  write_u32le(os, static_cast<std::uint32_t>(d.latent_dim));
  ParamSet params = model.params();  // visit() is non-const; copy is small
  params.visit([&os](double& v) { write_f32le(os, static_cast<float>(v)); });
  if (!os) {
    throw std::invalid_argument("failed writing checkpoint: " + path.string());
  }
}

ReconModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::invalid_argument("cannot open checkpoint: " + path.string());
  }
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::invalid_argument("not an IRGS checkpoint: " + path.string());
  }
  const std::uint32_t version = read_u32le(is);
  if (version != kVersion) {
    throw std::invalid_argument("unsupported checkpoint version " + std::to_string(version));
  }
  char mode_byte = 0;
  is.read(&mode_byte, 1);
  if (mode_byte != 0 && mode_byte != 1) {
    throw std::invalid_argument("unknown checkpoint mode byte");
  }
  ModelDesc d;
  d.mode = static_cast<ReconMode>(mode_byte);
  d.height = static_cast<int>(read_u32le(is));
  d.width = static_cast<int>(read_u32le(is));
  d.hidden_dim = static_cast<int>(read_u32le(is));
  d.latent_dim = static_cast<int>(read_u32le(is));
  if (!is) {
    throw std::invalid_argument("truncated checkpoint header: " + path.string());
  }
  ParamSet params = ParamSet::zeros(d);
  bool ok = true;
  params.visit([&](double& v) {
    v = static_cast<double>(read_f32le(is));
    ok = ok && static_cast<bool>(is);
  });
  if (!ok) {
    throw std::invalid_argument("truncated checkpoint payload: " + path.string());
  }
  return ReconModel(d, std::move(params));
}

}  // namespace irgs
