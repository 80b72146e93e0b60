#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "irgs/pipeline.hpp"

namespace irgs {

// Flat key = value run configuration; `#` starts a comment, unknown keys are
// rejected. sigma2 is accepted as an alias for butter_f.
struct RunConfig {
  int k = 3;
  double sigma1 = 0.05;
  int kernel_size = 5;
  int butter_n = 2;
  double butter_f = 6.0;
  int em_iters = 20;
  double variance_floor = 1e-4;
  std::uint64_t gmm_seed = 0;
  ReconMode mode = ReconMode::vae;
  int hidden_dim = 64;
  int latent_dim = 16;
  double beta = 0.1;
  double gamma = 0.5;
  double zeta = 0.0;
  bool grad_through_q = true;
  bool mask_weighted_recon = true;
  Ablation ablation = Ablation::full;
  bool adjust_background = true;
  double lr = 1e-2;
  int epochs = 10;
  std::uint64_t seed = 0;
  std::string data_dir;
  std::string out_path;
};

RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

// Range checks; throws std::invalid_argument naming the offending key.
void validate(const RunConfig& cfg);

std::string serialize(const RunConfig& cfg);

PipelineConfig to_pipeline_config(const RunConfig& cfg);
ModelDesc to_model_desc(const RunConfig& cfg, int height, int width);

}  // namespace irgs
