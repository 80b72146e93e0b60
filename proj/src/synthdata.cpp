#include "irgs/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "irgs/png_io.hpp"
#include "irgs/rng.hpp"

namespace irgs {

namespace {

constexpr int kPlacementRetries = 100;
constexpr int kSceneRetries = 50;
constexpr int kColorRetries = 10000;

struct Rgb {
  double r, g, b;
};

double dist(const Rgb& a, const Rgb& b) {
  const double dr = a.r - b.r;
  const double dg = a.g - b.g;
  const double db = a.b - b.b;
  return std::sqrt(dr * dr + dg * dg + db * db);
}

Rgb random_color(SeededRng& rng) { return {rng.uniform01(), rng.uniform01(), rng.uniform01()}; }

void check_spec(const SceneSpec& spec) {
  if (spec.height < 1 || spec.width < 1) {
    throw std::invalid_argument("scene dimensions must be positive");
  }
  if (spec.min_objects < 0 || spec.max_objects < spec.min_objects) {
    throw std::invalid_argument("invalid object count range");
  }
  if (spec.min_size < 1 || spec.max_size < spec.min_size ||
      spec.max_size > std::min(spec.height, spec.width)) {
    throw std::invalid_argument("object size range does not fit the scene");
  }
  if (spec.shapes.empty()) {
    throw std::invalid_argument("shape set is empty");
  }
  if (spec.min_color_dist >= std::sqrt(3.0)) {
    throw std::invalid_argument("min_color_dist is unsatisfiable in the unit cube");
  }
}

// Pixels of one shape instance, relative to the full plane.
std::vector<std::pair<int, int>> rasterize(ShapeKind kind, int i0, int j0, int size) {
  std::vector<std::pair<int, int>> px;
  if (kind == ShapeKind::square) {
    px.reserve(static_cast<std::size_t>(size) * size);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        px.emplace_back(i0 + i, j0 + j);
      }
    }
  } else {
    // Center-distance test inside a size x size bounding box.
    const double c = (size - 1) / 2.0;
    const double r2 = (size / 2.0) * (size / 2.0);
    for (int i = 0; i < size; ++i) {
      for (int j = 0; j < size; ++j) {
        const double di = i - c;
        const double dj = j - c;
        if (di * di + dj * dj <= r2) {
          px.emplace_back(i0 + i, j0 + j);
        }
      }
    }
  }
  return px;
}

LabeledScene make_scene(const SceneSpec& spec, std::uint64_t scene_seed) {
  for (int attempt = 0;; ++attempt) {
    SeededRng rng(mix_seed(scene_seed, static_cast<std::uint64_t>(attempt)));
    const Rgb bg = random_color(rng);

    LabeledScene scene;
    scene.image = Image(spec.height, spec.width);
    scene.labels = LabelPlane(spec.height, spec.width, 0);
    for (int i = 0; i < spec.height; ++i) {
      for (int j = 0; j < spec.width; ++j) {
        scene.image.at(i, j, 0) = bg.r;
        scene.image.at(i, j, 1) = bg.g;
        scene.image.at(i, j, 2) = bg.b;
      }
    }

    const int want = rng.uniform_int(spec.min_objects, spec.max_objects);
    int placed = 0;
    for (int obj = 0; obj < want; ++obj) {
      Rgb color{};
      bool found_color = false;
      for (int t = 0; t < kColorRetries; ++t) {
        color = random_color(rng);
        if (dist(color, bg) >= spec.min_color_dist) {
          found_color = true;
          break;
        }
      }
      if (!found_color) {
        throw std::invalid_argument("could not sample an object color away from the background");
      }

      const ShapeKind kind =
          spec.shapes[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(spec.shapes.size()) - 1))];
      const int size = rng.uniform_int(spec.min_size, spec.max_size);

      bool placed_this = false;
      for (int t = 0; t < kPlacementRetries && !placed_this; ++t) {
        const int i0 = rng.uniform_int(0, spec.height - size);
        const int j0 = rng.uniform_int(0, spec.width - size);
        const auto px = rasterize(kind, i0, j0, size);
        if (!spec.allow_occlusion) {
          bool clear = true;
          for (const auto& [i, j] : px) {
            if (scene.labels.at(i, j) != 0) {
              clear = false;
              break;
            }
          }
          if (!clear) continue;
        }
        ++placed;
        for (const auto& [i, j] : px) {
          scene.labels.at(i, j) = placed;
          scene.image.at(i, j, 0) = color.r;
          scene.image.at(i, j, 1) = color.g;
          scene.image.at(i, j, 2) = color.b;
        }
        placed_this = true;
      }
      if (!placed_this) {
        scene.warnings.push_back("placement budget exhausted; scene has " +
                                 std::to_string(placed) + " of " + std::to_string(want) +
                                 " objects");
        break;
      }
    }

    // With occlusion a later object can bury an earlier one completely.
    std::set<int> visible;
    for (int v : scene.labels.labels) {
      if (v > 0) visible.insert(v);
    }
    if (static_cast<int>(visible.size()) == placed) {
      return scene;
    }
    if (attempt < kSceneRetries) {
      continue;
    }
    // Give up retrying: compact the surviving labels in draw order.
    std::vector<int> remap(static_cast<std::size_t>(placed) + 1, 0);
    int next = 0;
    for (int v = 1; v <= placed; ++v) {
      if (visible.count(v)) remap[static_cast<std::size_t>(v)] = ++next;
    }
    for (int& v : scene.labels.labels) {
      if (v > 0) v = remap[static_cast<std::size_t>(v)];
    }
    scene.warnings.push_back("fully occluded object dropped; scene has " + std::to_string(next) +
                             " objects");
    return scene;
  }
}

std::string scene_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return buf;
}

std::string shapes_to_string(const std::vector<ShapeKind>& shapes) {
  std::string out;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (i) out += ",";
    out += shapes[i] == ShapeKind::square ? "square" : "circle";
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<LabeledScene> generate(const SceneSpec& spec, int count) {
  check_spec(spec);
  if (count < 0) {
    throw std::invalid_argument("scene count must be nonnegative");
  }
  std::vector<LabeledScene> scenes;
  scenes.reserve(static_cast<std::size_t>(count));
  for (int idx = 0; idx < count; ++idx) {
    scenes.push_back(make_scene(spec, mix_seed(spec.seed, static_cast<std::uint64_t>(idx))));
  }
  return scenes;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledScene>& scenes,
                   const SceneSpec& spec) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream manifest(dir / "manifest");
  if (!manifest) {
    throw std::invalid_argument("cannot write manifest in " + dir.string());
  }
  manifest << "count = " << scenes.size() << "\n";
  manifest << "height = " << spec.height << "\n";
  manifest << "width = " << spec.width << "\n";
  manifest << "min_objects = " << spec.min_objects << "\n";
  manifest << "max_objects = " << spec.max_objects << "\n";
  manifest << "shapes = " << shapes_to_string(spec.shapes) << "\n";
  manifest << "min_color_dist = " << format_double(spec.min_color_dist) << "\n";
  manifest << "min_size = " << spec.min_size << "\n";
  manifest << "max_size = " << spec.max_size << "\n";
  manifest << "allow_occlusion = " << (spec.allow_occlusion ? "true" : "false") << "\n";
  manifest << "seed = " << spec.seed << "\n";
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string name = scene_name(static_cast<int>(i));
    write_image_png(dir / (name + ".png"), scenes[i].image);
    write_label_png(dir / (name + ".labels.png"), scenes[i].labels);
  }
}

Dataset load_dataset(const std::filesystem::path& dir, bool require_labels) {
  if (!std::filesystem::is_directory(dir)) {
    throw std::invalid_argument("dataset directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> image_files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.size() > 4 && name.ends_with(".png") &&
        !name.ends_with(".labels.png")) {
      image_files.push_back(entry.path());
    }
  }
  std::sort(image_files.begin(), image_files.end());
  if (image_files.empty()) {
    throw std::invalid_argument("no images found in " + dir.string());
  }

  Dataset ds;
  for (const auto& img_path : image_files) {
    LabeledScene scene;
    scene.image = read_image_png(img_path);
    std::filesystem::path label_path = img_path;
    label_path.replace_extension();  // strip .png
    label_path += ".labels.png";
    if (std::filesystem::exists(label_path)) {
      scene.labels = read_label_png(label_path);
      if (scene.labels.height != scene.image.height() ||
          scene.labels.width != scene.image.width()) {
        throw std::invalid_argument("label plane does not match image: " + label_path.string());
      }
    } else if (require_labels) {
      throw std::invalid_argument("missing labels for " + img_path.string());
    }
    if (ds.scenes.empty()) {
      ds.height = scene.image.height();
      ds.width = scene.image.width();
    } else if (scene.image.height() != ds.height || scene.image.width() != ds.width) {
      throw std::invalid_argument("dataset images have mixed dimensions");
    }
    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

}  // namespace irgs
