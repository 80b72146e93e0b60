#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "irgs/image.hpp"

namespace irgs {

enum class ShapeKind { square, circle };

struct SceneSpec {
  int height = 32;
  int width = 32;
  int min_objects = 1;
  int max_objects = 2;
  std::vector<ShapeKind> shapes = {ShapeKind::square, ShapeKind::circle};
  double min_color_dist = 0.25;  // L2 distance between object and background colors
  int min_size = 6;              // square side / circle diameter, pixels
  int max_size = 12;
  bool allow_occlusion = false;
  std::uint64_t seed = 0;
};

struct LabeledScene {
  Image image;
  LabelPlane labels;  // 0 = background, 1..n = objects in draw order
  std::vector<std::string> warnings;
};

// Seeded, deterministic scenes. Without occlusion object placement is
// rejection-sampled until disjoint; after the retry budget the scene simply
// carries fewer objects and a warning.
std::vector<LabeledScene> generate(const SceneSpec& spec, int count);

// Directory layout: NNNNN.png + NNNNN.labels.png + a `manifest` text file
// with count, dims and the generating spec as key=value lines.
void write_dataset(const std::filesystem::path& dir, const std::vector<LabeledScene>& scenes,
                   const SceneSpec& spec);

struct Dataset {
  std::vector<LabeledScene> scenes;
  int height = 0;
  int width = 0;
};

// Loads what write_dataset produced; label files are optional unless
// require_labels is set.
Dataset load_dataset(const std::filesystem::path& dir, bool require_labels);

}  // namespace irgs
