#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "irgs/pipeline.hpp"
#include "irgs/recon.hpp"
#include "irgs/rng.hpp"
#include "oracles.hpp"

using namespace irgs;

namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  SeededRng rng(seed);
  Image img(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int c = 0; c < 3; ++c) img.at(i, j, c) = rng.uniform01();
  return img;
}

MaskPlane random_mask(int h, int w, std::uint64_t seed) {
  SeededRng rng(seed);
  MaskPlane m(h, w);
  for (double& v : m.values()) v = rng.uniform01();
  return m;
}

PipelineConfig small_pipeline(int k) {
  PipelineConfig cfg;
  cfg.num_slots = k;
  cfg.quality = {0.1, 3};
  cfg.butterworth = {2, 1.5};
  cfg.gmm = {.em_iters = 5, .variance_floor = 1e-4, .seed = 0};
  return cfg;
}

// Relative mismatch with an absolute floor for near-zero gradients.
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-3, std::abs(a), std::abs(b)});
}

void check_gradients(ReconMode mode, bool grad_through_q, bool mask_weighted, std::uint64_t seed) {
  const Image x = random_image(6, 6, seed);
  ModelDesc desc{6, 6, 8, 4, mode};
  ReconModel model(desc, seed + 1);
  PipelineConfig cfg = small_pipeline(2);
  cfg.loss.grad_through_q = grad_through_q;
  cfg.loss.mask_weighted_recon = mask_weighted;
  cfg.loss.beta = 0.15;
  cfg.loss.gamma = mode == ReconMode::vae ? 0.4 : 0.0;
  cfg.loss.zeta = 0.2;

  const SlotDecomposition slots = decompose(model, x, cfg, seed + 2);
  // keep the finite-difference probe away from the output clamp
  for (const Slot& slot : slots.slots) {
    for (double v : slot.recon.values()) {
      REQUIRE(v > 1e-3);
      REQUIRE(v < 1.0 - 1e-3);
    }
  }

  ParamSet analytic = backward(model, x, slots, cfg.loss);
  const std::vector<double*> analytic_coeffs = oracle::coefficients(analytic);

  ReconModel probe = model;
  const std::vector<double> fd = oracle::finite_diff_grad(
      probe, [&]() { return replay_loss(probe, x, slots, cfg.loss); }, 1e-5);

  REQUIRE(fd.size() == analytic_coeffs.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    worst = std::max(worst, rel_err(*analytic_coeffs[i], fd[i]));
  }
  CHECK(worst <= 1e-4);
}

}  // namespace

TEST_SUITE("recon") {

TEST_CASE("untrained model maps into [0,1] and is deterministic per mode") {
  const Image x = random_image(5, 4, 10);
  const MaskPlane s = random_mask(5, 4, 11);

  ModelDesc ae{5, 4, 6, 3, ReconMode::autoencoder};
  ReconModel model(ae, 3);
  auto [re1, st1] = reconstruct(model, x, s, 0);
  auto [re2, st2] = reconstruct(model, x, s, 99);  // AE ignores the seed
  for (std::size_t p = 0; p < re1.values().size(); ++p) {
    CHECK(std::isfinite(re1.values()[p]));
    CHECK(re1.values()[p] >= 0.0);
    CHECK(re1.values()[p] <= 1.0);
    CHECK(re1.values()[p] == re2.values()[p]);
  }
  CHECK(st1.log_var.empty());

  ModelDesc vae{5, 4, 6, 3, ReconMode::vae};
  ReconModel vmodel(vae, 3);
  auto [va, sa] = reconstruct(vmodel, x, s, 7);
  auto [vb, sb] = reconstruct(vmodel, x, s, 7);
  auto [vc, sc] = reconstruct(vmodel, x, s, 8);
  bool differs = false;
  for (std::size_t p = 0; p < va.values().size(); ++p) {
    CHECK(va.values()[p] == vb.values()[p]);
    differs = differs || va.values()[p] != vc.values()[p];
  }
  CHECK(differs);  // different latent noise moves the output
  CHECK(sa.log_var.size() == 3u);
}

TEST_CASE("the remaining mask enters the encoder as a fourth channel") {
  const Image x = random_image(4, 4, 21);
  ReconModel model(ModelDesc{4, 4, 6, 3, ReconMode::autoencoder}, 5);
  auto [a, sa] = reconstruct(model, x, MaskPlane(4, 4, 1.0), 0);
  auto [b, sb] = reconstruct(model, x, MaskPlane(4, 4, 0.0), 0);
  bool differs = false;
  for (std::size_t p = 0; p < a.values().size(); ++p) {
    differs = differs || a.values()[p] != b.values()[p];
  }
  CHECK(differs);
}

TEST_CASE("shape mismatches are rejected") {
  ReconModel model(ModelDesc{4, 4, 6, 3, ReconMode::autoencoder}, 5);
  CHECK_THROWS_AS(reconstruct(model, random_image(4, 5, 1), MaskPlane(4, 5, 1.0), 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(reconstruct(model, random_image(4, 4, 1), MaskPlane(5, 4, 1.0), 0),
                  std::invalid_argument);
}

TEST_CASE("kl closed form") {
  LatentStats prior;
  prior.mean = {0.0, 0.0};
  prior.log_var = {0.0, 0.0};
  CHECK(kl_term(prior) == 0.0);

  LatentStats shifted;
  shifted.mean = {1.0};
  shifted.log_var = {0.0};
  CHECK(kl_term(shifted) == doctest::Approx(0.5).epsilon(1e-12));

  LatentStats ae;
  ae.mean = {3.0, -2.0};
  CHECK(kl_term(ae) == 0.0);
}

TEST_CASE("kl matches 1-d quadrature and is nonnegative") {
  SeededRng rng(31);
  for (int t = 0; t < 10; ++t) {
    LatentStats st;
    st.mean = {rng.uniform(-2.0, 2.0)};
    st.log_var = {rng.uniform(-2.0, 1.5)};
    const double closed = kl_term(st);
    const double quad = oracle::kl_quadrature(st.mean[0], st.log_var[0]);
    CHECK(closed == doctest::Approx(quad).epsilon(1e-6));
    CHECK(closed >= 0.0);
  }
}

TEST_CASE("loss vanishes for a perfect masked reconstruction") {
  const Image x = random_image(3, 3, 41);
  SlotDecomposition d;
  d.quality_sigma1 = 0.1;
  Slot slot;
  slot.mask = MaskPlane(3, 3, 1.0);
  slot.recon = x;
  slot.s_prev = MaskPlane(3, 3, 1.0);
  slot.location = MaskPlane(3, 3, 1.0);
  d.slots.push_back(slot);
  d.final_remaining = MaskPlane(3, 3, 0.0);
  LossWeights w;
  w.beta = 0.0;
  w.gamma = 0.0;
  CHECK(loss(d, x, w).total(w) == 0.0);
}

TEST_CASE("loss vanishes when everything is masked out onto the prior color") {
  const Image x = random_image(3, 3, 43);
  LossWeights w;
  w.gamma = 0.0;
  w.zeta = 0.35;
  SlotDecomposition d;
  d.quality_sigma1 = 0.1;
  Slot slot;
  slot.mask = MaskPlane(3, 3, 0.0);
  slot.recon = Image(3, 3, w.zeta);
  slot.s_prev = MaskPlane(3, 3, 1.0);
  slot.location = MaskPlane(3, 3, 1.0);
  d.slots.push_back(slot);
  d.final_remaining = MaskPlane(3, 3, 1.0);
  CHECK(loss(d, x, w).total(w) == 0.0);
}

TEST_CASE("loss equals the straight-line scalar oracle on random instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Image x = random_image(4, 4, 600 + seed);
    SlotDecomposition d;
    d.quality_sigma1 = 0.1;
    SeededRng rng(seed);
    for (int k = 0; k < 2; ++k) {
      Slot slot;
      slot.mask = random_mask(4, 4, 700 + seed * 3 + k);
      slot.recon = random_image(4, 4, 800 + seed * 3 + k);
      slot.s_prev = MaskPlane(4, 4, 1.0);
      slot.location = MaskPlane(4, 4, 1.0);
      slot.latent.mean = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      slot.latent.log_var = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
      d.slots.push_back(slot);
    }
    d.final_remaining = MaskPlane(4, 4, 0.0);
    LossWeights w;
    w.beta = 0.3;
    w.gamma = 0.7;
    w.zeta = 0.1;
    for (bool mask_weighted : {false, true}) {
      w.mask_weighted_recon = mask_weighted;
      const double got = loss(d, x, w).total(w);
      const double want = oracle::loss_sum(d, x, w);
      CHECK(got == doctest::Approx(want).epsilon(1e-12));
      CHECK(got >= 0.0);
    }
  }
}

TEST_CASE("replay loss agrees with the reported loss at the decomposition point") {
  const Image x = random_image(5, 5, 77);
  ReconModel model(ModelDesc{5, 5, 7, 3, ReconMode::vae}, 9);
  PipelineConfig cfg = small_pipeline(2);

  cfg.loss.grad_through_q = false;
  SlotDecomposition d = decompose(model, x, cfg, 123);
  CHECK(replay_loss(model, x, d, cfg.loss) ==
        doctest::Approx(loss(d, x, cfg.loss).total(cfg.loss)).epsilon(1e-12));

  cfg.loss.grad_through_q = true;
  d = decompose(model, x, cfg, 123);
  CHECK(replay_loss(model, x, d, cfg.loss) ==
        doctest::Approx(loss(d, x, cfg.loss).total(cfg.loss)).epsilon(1e-12));
}

TEST_CASE("an identically-zero objective has zero gradients") {
  const Image x = random_image(4, 4, 50);
  ReconModel model(ModelDesc{4, 4, 5, 2, ReconMode::autoencoder}, 51);
  SlotDecomposition d;
  d.quality_sigma1 = 0.1;
  Slot slot;
  slot.mask = MaskPlane(4, 4, 0.0);  // annihilates the first term
  slot.recon = Image(4, 4, 0.5);
  slot.s_prev = MaskPlane(4, 4, 1.0);
  slot.location = MaskPlane(4, 4, 1.0);
  d.slots.push_back(slot);
  d.final_remaining = MaskPlane(4, 4, 1.0);
  LossWeights w;
  w.beta = 0.0;
  w.gamma = 0.0;
  w.grad_through_q = false;
  ParamSet g = backward(model, x, d, w);
  g.visit([](double& v) { CHECK(v == 0.0); });
}

TEST_CASE("analytic gradients match central finite differences") {
  int combo = 0;
  for (ReconMode mode : {ReconMode::autoencoder, ReconMode::vae}) {
    for (bool gtq : {false, true}) {
      for (bool mwr : {false, true}) {
        CAPTURE(static_cast<int>(mode));
        CAPTURE(gtq);
        CAPTURE(mwr);
        check_gradients(mode, gtq, mwr, 9000 + static_cast<std::uint64_t>(combo));
        ++combo;
      }
    }
  }
}

TEST_CASE("grad_through_q changes the gradient when reconstruction is imperfect") {
  const Image x = random_image(6, 6, 61);
  ReconModel model(ModelDesc{6, 6, 8, 4, ReconMode::autoencoder}, 62);
  PipelineConfig cfg = small_pipeline(2);

  cfg.loss.grad_through_q = true;
  const SlotDecomposition d = decompose(model, x, cfg, 63);
  LossWeights on = cfg.loss;
  LossWeights off = cfg.loss;
  off.grad_through_q = false;
  ParamSet g_on = backward(model, x, d, on);
  ParamSet g_off = backward(model, x, d, off);
  const auto c_on = oracle::coefficients(g_on);
  const auto c_off = oracle::coefficients(g_off);
  bool differs = false;
  for (std::size_t i = 0; i < c_on.size(); ++i) {
    differs = differs || *c_on[i] != *c_off[i];
  }
  CHECK(differs);
}

TEST_CASE("sgd with zero learning rate leaves the model unchanged") {
  ReconModel model(ModelDesc{3, 3, 4, 2, ReconMode::vae}, 70);
  ReconModel before = model;
  ParamSet g = ParamSet::zeros(model.desc());
  g.visit([](double& v) { v = 1.0; });
  sgd_step(model, g, 0.0);
  auto a = oracle::coefficients(model.params());
  auto b = oracle::coefficients(before.params());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i] == *b[i]);
}

TEST_CASE("sgd rejects non-finite gradients") {
  ReconModel model(ModelDesc{3, 3, 4, 2, ReconMode::autoencoder}, 71);
  ParamSet g = ParamSet::zeros(model.desc());
  g.enc_w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sgd_step(model, g, 0.1), numeric_error);
}

TEST_CASE("one gradient step descends the objective") {
  const Image x = random_image(5, 5, 80);
  ReconModel model(ModelDesc{5, 5, 6, 3, ReconMode::autoencoder}, 81);
  PipelineConfig cfg = small_pipeline(2);
  const SlotDecomposition d = decompose(model, x, cfg, 82);
  const double before = replay_loss(model, x, d, cfg.loss);
  const ParamSet g = backward(model, x, d, cfg.loss);
  sgd_step(model, g, 1e-4);
  CHECK(replay_loss(model, x, d, cfg.loss) < before);
}

TEST_CASE("fifty sgd steps on a fixed tiny batch reduce the loss") {
  const Image x = random_image(8, 8, 90);
  ReconModel model(ModelDesc{8, 8, 10, 4, ReconMode::autoencoder}, 91);
  PipelineConfig cfg = small_pipeline(2);
  cfg.quality = {0.1, 3};

  double initial = -1.0;
  double current = -1.0;
  for (int step = 0; step < 50; ++step) {
    SlotDecomposition d = decompose(model, x, cfg, 92);
    current = loss(d, x, cfg.loss).total(cfg.loss);
    if (step == 0) initial = current;
    const ParamSet g = backward(model, x, d, cfg.loss);
    sgd_step(model, g, 1e-3);
  }
  CHECK(current < initial);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "irgs_recon_test";
  std::filesystem::create_directories(dir);
  for (ReconMode mode : {ReconMode::autoencoder, ReconMode::vae}) {
    ReconModel model(ModelDesc{4, 5, 6, 3, mode}, 100 + static_cast<int>(mode));
    const auto p1 = dir / "a.ckpt";
    const auto p2 = dir / "b.ckpt";
    save_checkpoint(model, p1);
    ReconModel loaded = load_checkpoint(p1);
    CHECK(loaded.desc().height == 4);
    CHECK(loaded.desc().width == 5);
    CHECK(loaded.desc().mode == mode);
    save_checkpoint(loaded, p2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(b1.substr(0, 4) == "IRGS");
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("loading rejects foreign and truncated files") {
  const auto dir = std::filesystem::temp_directory_path() / "irgs_recon_bad";
  std::filesystem::create_directories(dir);
  const auto bad = dir / "bad.ckpt";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "notachkpt";
  }
  CHECK_THROWS_AS(load_checkpoint(bad), std::invalid_argument);

  ReconModel model(ModelDesc{3, 3, 4, 2, ReconMode::vae}, 1);
  const auto good = dir / "good.ckpt";
  save_checkpoint(model, good);
  const auto trunc = dir / "trunc.ckpt";
  {
    std::ifstream in(good, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::ofstream out(trunc, std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(trunc), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
