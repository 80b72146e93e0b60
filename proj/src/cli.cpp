#include "irgs/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "irgs/config.hpp"
#include "irgs/metrics.hpp"
#include "irgs/pipeline.hpp"
#include "irgs/png_io.hpp"
#include "irgs/rng.hpp"

namespace irgs::cli {

namespace {

constexpr std::uint64_t kModelSalt = 0x6d6f64656cull;
constexpr std::uint64_t kEpochSalt = 0x65706f6368ull;
constexpr std::uint64_t kImageSalt = 0x696d616765ull;

struct CommonArgs {
  std::string config_path;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

// For train, --out names the checkpoint to write (out_path). For segment and
// eval, out_path always comes from the config (it locates the checkpoint) and
// --out is a local output directory.
RunConfig load_run_config(const CommonArgs& args, bool out_is_checkpoint) {
  RunConfig cfg = parse_config_file(args.config_path);
  if (!args.data.empty()) cfg.data_dir = args.data;
  if (out_is_checkpoint && !args.out.empty()) cfg.out_path = args.out;
  if (args.seed) cfg.seed = *args.seed;
  if (args.epochs) cfg.epochs = *args.epochs;
  validate(cfg);
  return cfg;
}

std::vector<Image> dataset_images(const Dataset& ds) {
  std::vector<Image> images;
  images.reserve(ds.scenes.size());
  for (const auto& scene : ds.scenes) {
    images.push_back(scene.image);
  }
  return images;
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_gen(const std::string& out_dir, int count, int size, std::uint64_t seed,
            const SceneSpec& base) {
  SceneSpec spec = base;
  spec.height = size;
  spec.width = size;
  spec.seed = seed;
  const auto scenes = generate(spec, count);
  write_dataset(out_dir, scenes, spec);
  for (const auto& scene : scenes) {
    for (const auto& w : scene.warnings) {
      std::cerr << "warning: " << w << "\n";
    }
  }
  std::cout << "wrote " << scenes.size() << " scenes to " << out_dir << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const RunConfig cfg = load_run_config(args, /*out_is_checkpoint=*/true);
  if (cfg.data_dir.empty()) throw std::invalid_argument("config key 'data_dir': missing");
  if (cfg.out_path.empty()) throw std::invalid_argument("config key 'out_path': missing");

  const Dataset ds = load_dataset(cfg.data_dir, /*require_labels=*/false);
  const std::vector<Image> images = dataset_images(ds);
  ReconModel model(to_model_desc(cfg, ds.height, ds.width), mix_seed(cfg.seed, kModelSalt));
  const PipelineConfig pipeline_cfg = to_pipeline_config(cfg);

  const std::filesystem::path out_path(cfg.out_path);
  if (out_path.has_parent_path()) {
    std::filesystem::create_directories(out_path.parent_path());
  }
  std::ofstream loss_log(cfg.out_path + ".loss.csv");
  if (!loss_log) {
    throw std::invalid_argument("cannot write loss log next to " + cfg.out_path);
  }
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double mean_loss =
        train_epoch(model, images, pipeline_cfg, mix_seed(cfg.seed, kEpochSalt + epoch));
    loss_log << epoch << "," << format_g(mean_loss) << "\n";
    std::cerr << "epoch " << epoch << " mean_loss " << format_g(mean_loss) << "\n";
  }
  loss_log.close();

  save_checkpoint(model, cfg.out_path);
  std::ofstream eff(cfg.out_path + ".cfg");
  eff << serialize(cfg);
  std::cout << "wrote checkpoint " << cfg.out_path << "\n";
  return 0;
}

std::vector<std::filesystem::path> image_paths(const std::string& data) {
  std::vector<std::filesystem::path> paths;
  const std::filesystem::path p(data);
  if (std::filesystem::is_regular_file(p)) {
    paths.push_back(p);
  } else if (std::filesystem::is_directory(p)) {
    for (const auto& entry : std::filesystem::directory_iterator(p)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.ends_with(".png") && !name.ends_with(".labels.png")) {
        paths.push_back(entry.path());
      }
    }
    std::sort(paths.begin(), paths.end());
  }
  if (paths.empty()) {
    throw std::invalid_argument("no input images at " + data);
  }
  return paths;
}

void write_locations_report(const std::filesystem::path& path, const SlotDecomposition& d) {
  std::ofstream out(path);
  out << "slot,y,x\n";
  for (int k = 0; k < d.num_slots(); ++k) {
    const auto& slot = d.slots[static_cast<std::size_t>(k)];
    if (slot.gmm_means) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%d,%.3f,%.3f", k + 1, (*slot.gmm_means)[1][3],
                    (*slot.gmm_means)[1][4]);
      out << buf << "\n";
    } else {
      out << k + 1 << ",---,---\n";
    }
  }
}

int cmd_segment(const CommonArgs& args) {
  const RunConfig cfg = load_run_config(args, /*out_is_checkpoint=*/false);
  if (cfg.out_path.empty()) throw std::invalid_argument("config key 'out_path': missing");
  const ReconModel model = load_checkpoint(cfg.out_path);
  const PipelineConfig pipeline_cfg = to_pipeline_config(cfg);

  if (args.data.empty()) throw std::invalid_argument("segment: --data is required");
  const std::filesystem::path out_dir(args.out.empty() ? std::string("segmented") : args.out);
  std::filesystem::create_directories(out_dir);

  const auto paths = image_paths(args.data);
  for (std::size_t idx = 0; idx < paths.size(); ++idx) {
    const Image x = read_image_png(paths[idx]);
    if (x.height() != model.desc().height || x.width() != model.desc().width) {
      throw std::invalid_argument("image " + paths[idx].string() +
                                  " does not match checkpoint dimensions");
    }
    SlotDecomposition d = decompose(model, x, pipeline_cfg, mix_seed(cfg.seed, kImageSalt + idx));
    if (pipeline_cfg.adjust_background) {
      adjust_background(d);
    }
    for (const auto& w : d.warnings) {
      std::cerr << "warning: " << paths[idx].filename().string() << ": " << w << "\n";
    }

    const std::string stem = paths[idx].stem().string();
    for (int k = 0; k < d.num_slots(); ++k) {
      const auto& slot = d.slots[static_cast<std::size_t>(k)];
      const std::string base = stem + ".slot" + std::to_string(k + 1);
      write_mask_png(out_dir / (base + ".mask.png"), slot.mask);
      write_image_png(out_dir / (base + ".recon.png"), slot.recon);
    }
    // Hard assignment as gray levels; slot 1 maps to 0 like dataset background.
    LabelPlane assign = hard_assignment(d);
    for (int& v : assign.labels) --v;
    write_label_png(out_dir / (stem + ".assign.png"), assign);
    write_locations_report(out_dir / (stem + ".locations.txt"), d);
  }
  std::cout << "segmented " << paths.size() << " image(s) into " << out_dir.string() << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  const RunConfig cfg = load_run_config(args, /*out_is_checkpoint=*/false);
  if (cfg.data_dir.empty()) throw std::invalid_argument("config key 'data_dir': missing");
  if (cfg.out_path.empty()) throw std::invalid_argument("config key 'out_path': missing");
  const ReconModel model = load_checkpoint(cfg.out_path);
  const PipelineConfig pipeline_cfg = to_pipeline_config(cfg);

  const Dataset ds = load_dataset(cfg.data_dir, /*require_labels=*/true);
  for (const auto& scene : ds.scenes) {
    if (scene.image.height() != model.desc().height ||
        scene.image.width() != model.desc().width) {
      throw std::invalid_argument("dataset does not match checkpoint dimensions");
    }
  }

  auto predict = [&](const Image& x, std::size_t idx) {
    SlotDecomposition d = decompose(model, x, pipeline_cfg, mix_seed(cfg.seed, kImageSalt + idx));
    if (pipeline_cfg.adjust_background) {
      adjust_background(d);
    }
    return hard_assignment(d);
  };
  std::vector<std::string> warnings;
  const auto rows =
      evaluate_scenes(ds.scenes, predict, effective_threads(ds.scenes.size()), &warnings);
  for (const auto& w : warnings) {
    std::cerr << "warning: " << w << "\n";
  }
  for (const auto& row : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f", row.metric.c_str(), row.mean, row.stddev);
    std::cout << buf << "\n";
  }
  return 0;
}

}  // namespace

int effective_threads(std::size_t work_items) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  int threads = static_cast<int>(std::min<std::size_t>(hw, work_items));
  if (const char* env = std::getenv("IRGS_THREADS")) {
    try {
      threads = std::min(threads, std::max(1, std::stoi(env)));
    } catch (const std::exception&) {
      throw std::invalid_argument("IRGS_THREADS must be an integer");
    }
  }
  return std::max(1, threads);
}

std::vector<EvalRow> evaluate_scenes(
    const std::vector<LabeledScene>& scenes,
    const std::function<LabelPlane(const Image&, std::size_t)>& predict, int threads,
    std::vector<std::string>* warnings) {
  struct PerImage {
    bool ok = false;
    std::string error;
    double ari_fg = 0, ari_all = 0, ami_all = 0, ami_fg = 0;
  };
  std::vector<PerImage> results(scenes.size());

  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < scenes.size(); i += stride) {
      try {
        const LabelPlane pred = predict(scenes[i].image, i);
        PerImage r;
        r.ari_fg = ari(pred, scenes[i].labels, /*foreground_only=*/true);
        r.ari_all = ari(pred, scenes[i].labels, /*foreground_only=*/false);
        r.ami_all = ami(pred, scenes[i].labels, /*foreground_only=*/false);
        r.ami_fg = ami(pred, scenes[i].labels, /*foreground_only=*/true);
        r.ok = true;
        results[i] = r;
      } catch (const std::domain_error& e) {
        results[i].error = e.what();
      }
    }
  };
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back(work, static_cast<std::size_t>(t), static_cast<std::size_t>(threads));
    }
    for (auto& th : pool) th.join();
  }

  std::vector<double> cols[4];
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok) {
      if (warnings) {
        warnings->push_back("image " + std::to_string(i) + " skipped: " + results[i].error);
      }
      continue;
    }
    cols[0].push_back(results[i].ari_fg);
    cols[1].push_back(results[i].ari_all);
    cols[2].push_back(results[i].ami_all);
    cols[3].push_back(results[i].ami_fg);
  }
  if (cols[0].empty()) {
    throw numeric_error("no image produced a defined metric");
  }
  auto summarize = [](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return std::pair<double, double>(mean, std::sqrt(var));
  };
  const char* names[4] = {"ari_fg", "ari_all", "ami_all", "ami_fg"};
  std::vector<EvalRow> rows;
  for (int c = 0; c < 4; ++c) {
    const auto [mean, sd] = summarize(cols[c]);
    rows.push_back({names[c], mean, sd});
  }
  return rows;
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"Iterative reconstruction-guided scene segmentation"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic labeled dataset");
  int gen_count = 8;
  int gen_size = 32;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "dataset";
  SceneSpec gen_spec;
  gen->add_option("--count", gen_count, "number of scenes");
  gen->add_option("--size", gen_size, "image side length");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--min-objects", gen_spec.min_objects, "minimum objects per scene");
  gen->add_option("--max-objects", gen_spec.max_objects, "maximum objects per scene");
  gen->add_option("--min-size", gen_spec.min_size, "minimum object size (px)");
  gen->add_option("--max-size", gen_spec.max_size, "maximum object size (px)");
  gen->add_option("--delta", gen_spec.min_color_dist, "min object/background color distance");
  gen->add_flag("--occlusion", gen_spec.allow_occlusion, "allow overlapping objects");

  auto add_common = [](CLI::App* cmd, CommonArgs& dst, bool need_config) {
    auto* opt = cmd->add_option("--config", dst.config_path, "run configuration file");
    if (need_config) opt->required();
    cmd->add_option("--data", dst.data, "dataset directory (or image file)");
    cmd->add_option("--out", dst.out, "output path");
    cmd->add_option("--seed", [&dst](const std::vector<std::string>& v) {
      dst.seed = std::stoull(v.front());
      return true;
    }, "seed override");
    cmd->add_option("--epochs", [&dst](const std::vector<std::string>& v) {
      dst.epochs = std::stoi(v.front());
      return true;
    }, "epoch override");
  };

  CommonArgs train_args, segment_args, eval_args;
  auto* train = app.add_subcommand("train", "Train a model on an image folder");
  add_common(train, train_args, true);
  auto* segment = app.add_subcommand("segment", "Decompose images into slot masks");
  add_common(segment, segment_args, true);
  auto* eval = app.add_subcommand("eval", "Score segmentation against ground-truth labels");
  add_common(eval, eval_args, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen(gen_out, gen_count, gen_size, gen_seed, gen_spec);
    if (train->parsed()) return cmd_train(train_args);
    if (segment->parsed()) return cmd_segment(segment_args);
    if (eval->parsed()) return cmd_eval(eval_args);
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

}  // namespace irgs::cli
