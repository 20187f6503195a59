// SPDX-License-Identifier: Apache-2.0
//
// Random fixtures and oracles shared by the unit tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "segsort/types.hpp"

namespace segsort::testing {

using Rng = std::mt19937_64;

inline std::vector<double> random_unit(Rng& rng, std::size_t dim) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    if (norm(v) > 1e-3) return normalized(v);
  }
}

inline VectorSet random_units(Rng& rng, std::size_t count, std::size_t dim) {
  VectorSet out(dim);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_unit(rng, dim));
  return out;
}

inline EmbeddingMap random_map(Rng& rng, std::size_t h, std::size_t w, std::size_t dim) {
  std::vector<double> data;
  data.reserve(h * w * dim);
  for (std::size_t i = 0; i < h * w; ++i) {
    const auto v = random_unit(rng, dim);
    data.insert(data.end(), v.begin(), v.end());
  }
  return EmbeddingMap(h, w, dim, std::move(data));
}

/// Embedding map whose pixels scatter around a few random centers, so
/// clustering has real structure to find.
inline EmbeddingMap clustered_map(Rng& rng, std::size_t h, std::size_t w, std::size_t dim,
                                  std::size_t centers, double spread) {
  const auto c = random_units(rng, centers, dim);
  std::normal_distribution<double> noise(0.0, spread);
  std::uniform_int_distribution<std::size_t> pick(0, centers - 1);
  FeatureGrid grid(h, w, dim);
  for (std::size_t i = 0; i < h * w; ++i) {
    const auto center = c[pick(rng)];
    auto px = grid.pixel(i);
    for (std::size_t k = 0; k < dim; ++k) px[k] = center[k] + noise(rng);
  }
  return normalize_map(grid);
}

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace segsort::testing
