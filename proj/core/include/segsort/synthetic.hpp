// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic scenes: rectangles and disks of foreground classes
// painted over a background class, with per-pixel raw features whose class
// means are well separated relative to the per-class noise.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "segsort/types.hpp"

namespace segsort {

/// color (3) + two pure-noise channels + one texture scalar.
inline constexpr std::size_t kSceneFeatureDim = 6;
inline constexpr double kSceneNoiseSigma = 0.05;
/// Minimum distance between any two class mean feature vectors.
inline constexpr double kSceneMinClassGap = 0.5;
inline constexpr ClassId kBackgroundClass = 0;

struct SceneShape {
  enum class Kind { kRectangle, kDisk };
  ClassId label = 0;
  Kind kind = Kind::kRectangle;
  // Rectangle: rows [top, bottom), cols [left, right).
  std::size_t top = 0, left = 0, bottom = 0, right = 0;
  // Disk: pixel centers within radius of (center_row, center_col).
  double center_row = 0, center_col = 0, radius = 0;

  bool contains(std::size_t r, std::size_t c) const;
};

struct SyntheticScene {
  FeatureGrid image;
  LabelMap gt;
  /// Painted in order; later shapes cover earlier ones.
  std::vector<SceneShape> shapes;
};

/// Mean feature vector of every class for a given seed.
std::vector<std::vector<double>> class_means(std::size_t classes, std::uint64_t seed);

/// Scenes first_index .. first_index+num_images-1 of the infinite sequence
/// defined by (classes, size, seed); scene i never depends on how many
/// scenes are requested.
std::vector<SyntheticScene> make_dataset(std::size_t num_images, std::size_t classes,
                                         std::size_t size, std::uint64_t seed,
                                         std::size_t first_index = 0);

/// Label map rasterized from shape geometry alone.
LabelMap rasterize(const std::vector<SceneShape>& shapes, std::size_t size);

/// Uniform k-tile grid split along ground-truth boundaries: an
/// oversegmentation whose segments each carry a single class.
Segmentation tile_oversegmentation(const LabelMap& gt, std::size_t k);

/// Parses "classes=4,images=20,size=64,seed=7[,holdout=10]".
struct SyntheticSpec {
  std::size_t classes = 4;
  std::size_t images = 20;
  std::size_t size = 64;
  std::uint64_t seed = 7;
  std::size_t holdout = 10;
};
SyntheticSpec parse_synthetic_spec(const std::string& text);

}  // namespace segsort
