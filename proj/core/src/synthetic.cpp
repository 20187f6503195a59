// SPDX-License-Identifier: Apache-2.0

#include "segsort/synthetic.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "segsort/pixel_sort.hpp"
#include "segsort/segment_align.hpp"

namespace segsort {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined key.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::size_t uniform_index(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

bool SceneShape::contains(std::size_t r, std::size_t c) const {
  if (kind == Kind::kRectangle) return r >= top && r < bottom && c >= left && c < right;
  const double dr = static_cast<double>(r) - center_row;
  const double dc = static_cast<double>(c) - center_col;
  return dr * dr + dc * dc <= radius * radius;
}

std::vector<std::vector<double>> class_means(std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(mix(seed, 0xC1A55));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> means;
  double gap = kSceneMinClassGap;
  int attempts = 0;
  while (means.size() < classes) {
    std::vector<double> m(kSceneFeatureDim, 0.0);
    m[0] = unit(rng);
    m[1] = unit(rng);
    m[2] = unit(rng);
    m[5] = unit(rng);  // texture level; channels 3 and 4 are zero-mean noise
    bool ok = true;
    for (const auto& other : means) {
      double d2 = 0.0;
      for (std::size_t j = 0; j < kSceneFeatureDim; ++j) d2 += (m[j] - other[j]) * (m[j] - other[j]);
      ok = ok && std::sqrt(d2) >= gap;
    }
    if (ok) {
      means.push_back(std::move(m));
    } else if (++attempts > 10000) {
      // Too many classes for the unit cube at this gap; the 4-sigma
      // separability floor is still kept.
      gap = std::max(gap * 0.9, 4.0 * kSceneNoiseSigma);
      attempts = 0;
    }
  }
  return means;
}

LabelMap rasterize(const std::vector<SceneShape>& shapes, std::size_t size) {
  LabelMap gt(size, size, kBackgroundClass);
  for (const auto& s : shapes) {
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        if (s.contains(r, c)) gt.labels[r * size + c] = s.label;
      }
    }
  }
  return gt;
}

std::vector<SyntheticScene> make_dataset(std::size_t num_images, std::size_t classes,
                                         std::size_t size, std::uint64_t seed,
                                         std::size_t first_index) {
  if (classes < 2) throw ConfigError("synthetic dataset needs at least 2 classes");
  if (size < 16) throw ConfigError("synthetic scenes must be at least 16x16");
  const auto means = class_means(classes, seed);
  std::vector<SyntheticScene> scenes;
  scenes.reserve(num_images);
  for (std::size_t n = 0; n < num_images; ++n) {
    std::mt19937_64 rng(mix(seed, first_index + n + 1));
    std::normal_distribution<double> noise(0.0, kSceneNoiseSigma);

    SyntheticScene scene;
    const std::size_t count = uniform_index(rng, 1, 4);
    for (std::size_t s = 0; s < count; ++s) {
      SceneShape shape;
      shape.label = static_cast<ClassId>(uniform_index(rng, 1, classes - 1));
      if (uniform_index(rng, 0, 1) == 0) {
        shape.kind = SceneShape::Kind::kRectangle;
        const std::size_t h = uniform_index(rng, size / 5, size / 2);
        const std::size_t w = uniform_index(rng, size / 5, size / 2);
        shape.top = uniform_index(rng, 0, size - h);
        shape.left = uniform_index(rng, 0, size - w);
        shape.bottom = shape.top + h;
        shape.right = shape.left + w;
      } else {
        shape.kind = SceneShape::Kind::kDisk;
        shape.radius = static_cast<double>(uniform_index(rng, size / 10, size / 4));
        const auto margin = static_cast<std::size_t>(shape.radius);
        shape.center_row = static_cast<double>(uniform_index(rng, margin, size - 1 - margin));
        shape.center_col = static_cast<double>(uniform_index(rng, margin, size - 1 - margin));
      }
      scene.shapes.push_back(shape);
    }
    scene.gt = rasterize(scene.shapes, size);
    scene.image = FeatureGrid(size, size, kSceneFeatureDim);
    for (std::size_t i = 0; i < size * size; ++i) {
      const auto& m = means[scene.gt[i]];
      auto px = scene.image.pixel(i);
      for (std::size_t j = 0; j < kSceneFeatureDim; ++j) px[j] = m[j] + noise(rng);
    }
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

Segmentation tile_oversegmentation(const LabelMap& gt, std::size_t k) {
  const Segmentation tiles = init_grid(gt.height, gt.width, k);
  return align(tiles, gt).segmentation;
}

SyntheticSpec parse_synthetic_spec(const std::string& text) {
  SyntheticSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--synthetic item without '=': " + item);
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    std::uint64_t parsed = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
      throw ConfigError("--synthetic value is not an integer: " + item);
    }
    if (key == "classes") {
      spec.classes = parsed;
    } else if (key == "images") {
      spec.images = parsed;
    } else if (key == "size") {
      spec.size = parsed;
    } else if (key == "seed") {
      spec.seed = parsed;
    } else if (key == "holdout") {
      spec.holdout = parsed;
    } else {
      throw ConfigError("unknown --synthetic key: " + key);
    }
  }
  if (spec.classes < 2) throw ConfigError("synthetic spec: classes must be >= 2");
  if (spec.size < 16) throw ConfigError("synthetic spec: size must be >= 16");
  return spec;
}

}  // namespace segsort
