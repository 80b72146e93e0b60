#include "irgs/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace irgs {

namespace {

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config key '" + key + "': " + why);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_key(key, "expected true/false, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    bad_key(key, "expected a number, got '" + v + "'");
  }
}

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    bad_key(key, "expected an integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    bad_key(key, "expected an unsigned integer, got '" + v + "'");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
    }
    // sigma2 and butter_f write the same field; flag both spellings at once.
    const std::string canonical = key == "sigma2" ? "butter_f" : key;
    if (!seen.insert(canonical).second) {
      bad_key(key, "duplicate assignment");
    }

    if (key == "k") cfg.k = parse_int(key, value);
    else if (key == "sigma1") cfg.sigma1 = parse_double(key, value);
    else if (key == "kernel_size") cfg.kernel_size = parse_int(key, value);
    else if (key == "butter_n") cfg.butter_n = parse_int(key, value);
    else if (key == "butter_f" || key == "sigma2") cfg.butter_f = parse_double(key, value);
    else if (key == "em_iters") cfg.em_iters = parse_int(key, value);
    else if (key == "variance_floor") cfg.variance_floor = parse_double(key, value);
    else if (key == "gmm_seed") cfg.gmm_seed = parse_u64(key, value);
    else if (key == "mode") {
      if (value == "autoencoder") cfg.mode = ReconMode::autoencoder;
      else if (value == "vae") cfg.mode = ReconMode::vae;
      else bad_key(key, "expected autoencoder|vae, got '" + value + "'");
    } else if (key == "hidden_dim") cfg.hidden_dim = parse_int(key, value);
    else if (key == "latent_dim") cfg.latent_dim = parse_int(key, value);
    else if (key == "beta") cfg.beta = parse_double(key, value);
    else if (key == "gamma") cfg.gamma = parse_double(key, value);
    else if (key == "zeta") cfg.zeta = parse_double(key, value);
    else if (key == "grad_through_q") cfg.grad_through_q = parse_bool(key, value);
    else if (key == "mask_weighted_recon") cfg.mask_weighted_recon = parse_bool(key, value);
    else if (key == "ablation") {
      if (value == "full") cfg.ablation = Ablation::full;
      else if (value == "q_only") cfg.ablation = Ablation::q_only;
      else if (value == "l_only") cfg.ablation = Ablation::l_only;
      else bad_key(key, "expected full|q_only|l_only, got '" + value + "'");
    } else if (key == "adjust_background") cfg.adjust_background = parse_bool(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "epochs") cfg.epochs = parse_int(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else if (key == "data_dir") cfg.data_dir = value;
    else if (key == "out_path") cfg.out_path = value;
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
  // The KL term only exists for the VAE.
  if (cfg.mode == ReconMode::autoencoder) {
    cfg.gamma = 0.0;
  }
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("cannot open config file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate(const RunConfig& cfg) {
  if (cfg.k < 2) bad_key("k", "needs at least 2 slots");
  if (!(cfg.sigma1 > 0.0)) bad_key("sigma1", "must be positive");
  if (cfg.kernel_size < 1 || cfg.kernel_size % 2 == 0) bad_key("kernel_size", "must be odd and >= 1");
  if (cfg.butter_n < 1) bad_key("butter_n", "must be >= 1");
  if (!(cfg.butter_f > 0.0)) bad_key("butter_f", "must be positive");
  if (cfg.em_iters < 1) bad_key("em_iters", "must be >= 1");
  if (!(cfg.variance_floor > 0.0)) bad_key("variance_floor", "must be positive");
  if (cfg.hidden_dim < 1) bad_key("hidden_dim", "must be >= 1");
  if (cfg.latent_dim < 1) bad_key("latent_dim", "must be >= 1");
  if (cfg.beta < 0.0) bad_key("beta", "must be nonnegative");
  if (cfg.gamma < 0.0) bad_key("gamma", "must be nonnegative");
  if (cfg.zeta < 0.0 || cfg.zeta > 1.0) bad_key("zeta", "must lie in [0,1]");
  if (cfg.lr < 0.0) bad_key("lr", "must be nonnegative");
  if (cfg.epochs < 0) bad_key("epochs", "must be nonnegative");
}

std::string serialize(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# pipeline\n";
  out << "k = " << cfg.k << "\n";
  out << "sigma1 = " << format_double(cfg.sigma1) << "\n";
  out << "kernel_size = " << cfg.kernel_size << "\n";
  out << "butter_n = " << cfg.butter_n << "\n";
  out << "butter_f = " << format_double(cfg.butter_f) << "  # alias key: sigma2\n";
  out << "em_iters = " << cfg.em_iters << "\n";
  out << "variance_floor = " << format_double(cfg.variance_floor) << "\n";
  out << "gmm_seed = " << cfg.gmm_seed << "\n";
  out << "ablation = "
      << (cfg.ablation == Ablation::full ? "full"
                                         : cfg.ablation == Ablation::q_only ? "q_only" : "l_only")
      << "\n";
  out << "adjust_background = " << (cfg.adjust_background ? "true" : "false") << "\n";
  out << "# model\n";
  out << "mode = " << (cfg.mode == ReconMode::vae ? "vae" : "autoencoder") << "\n";
  out << "hidden_dim = " << cfg.hidden_dim << "\n";
  out << "latent_dim = " << cfg.latent_dim << "\n";
  out << "# loss\n";
  out << "beta = " << format_double(cfg.beta) << "\n";
  out << "gamma = " << format_double(cfg.gamma) << "\n";
  out << "zeta = " << format_double(cfg.zeta) << "\n";
  out << "grad_through_q = " << (cfg.grad_through_q ? "true" : "false") << "\n";
  out << "mask_weighted_recon = " << (cfg.mask_weighted_recon ? "true" : "false") << "\n";
  out << "# training\n";
  out << "lr = " << format_double(cfg.lr) << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "seed = " << cfg.seed << "\n";
  if (!cfg.data_dir.empty()) out << "data_dir = " << cfg.data_dir << "\n";
  if (!cfg.out_path.empty()) out << "out_path = " << cfg.out_path << "\n";
  return out.str();
}

PipelineConfig to_pipeline_config(const RunConfig& cfg) {
  PipelineConfig p;
  p.num_slots = cfg.k;
  p.quality.sigma1 = cfg.sigma1;
  p.quality.kernel_size = cfg.kernel_size;
  p.butterworth.n = cfg.butter_n;
  p.butterworth.f = cfg.butter_f;
  p.gmm.em_iters = cfg.em_iters;
  p.gmm.variance_floor = cfg.variance_floor;
  p.gmm.seed = cfg.gmm_seed;
  p.loss.beta = cfg.beta;
  p.loss.gamma = cfg.mode == ReconMode::autoencoder ? 0.0 : cfg.gamma;
  p.loss.zeta = cfg.zeta;
  p.loss.grad_through_q = cfg.grad_through_q;
  p.loss.mask_weighted_recon = cfg.mask_weighted_recon;
  p.ablation = cfg.ablation;
  p.adjust_background = cfg.adjust_background;
  p.learning_rate = cfg.lr;
  return p;
}

ModelDesc to_model_desc(const RunConfig& cfg, int height, int width) {
  ModelDesc d;
  d.height = height;
  d.width = width;
  d.hidden_dim = cfg.hidden_dim;
  d.latent_dim = cfg.latent_dim;
  d.mode = cfg.mode;
  return d;
}

}  // namespace irgs
