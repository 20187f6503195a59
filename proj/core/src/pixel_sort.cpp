// SPDX-License-Identifier: Apache-2.0

#include "segsort/pixel_sort.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace segsort {

AugmentedMap augment(const EmbeddingMap& emb, double coord_weight) {
  const std::size_t h = emb.height();
  const std::size_t w = emb.width();
  const std::size_t d = emb.dim();
  const std::size_t out_dim = d + 2;
  std::vector<double> out(emb.pixels() * out_dim);
  for (std::size_t r = 0; r < h; ++r) {
    const double y = h > 1 ? static_cast<double>(r) / static_cast<double>(h - 1) : 0.5;
    for (std::size_t c = 0; c < w; ++c) {
      const double x = w > 1 ? static_cast<double>(c) / static_cast<double>(w - 1) : 0.5;
      const std::size_t i = r * w + c;
      double* dst = out.data() + i * out_dim;
      const auto v = emb.pixel(i);
      std::copy(v.begin(), v.end(), dst);
      dst[d] = coord_weight * y;
      dst[d + 1] = coord_weight * x;
      const double n = norm({dst, out_dim});
      for (std::size_t j = 0; j < out_dim; ++j) dst[j] /= n;
    }
  }
  return AugmentedMap(EmbeddingMap(h, w, out_dim, std::move(out)), coord_weight);
}

Segmentation init_grid(std::size_t height, std::size_t width, std::size_t k) {
  if (k < 1) throw TooManyClusters("k must be >= 1");
  if (k > height * width) {
    throw TooManyClusters("k=" + std::to_string(k) + " exceeds pixel count " +
                          std::to_string(height * width));
  }
  // Band count near sqrt(k), clamped so every band fits within the width and
  // the band count fits within the height.
  std::size_t bands = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
  bands = std::max(bands, (k + width - 1) / width);
  bands = std::min({bands, height, k});

  std::vector<std::uint32_t> ids(height * width);
  std::uint32_t first_id = 0;
  for (std::size_t b = 0; b < bands; ++b) {
    const std::size_t r0 = b * height / bands;
    const std::size_t r1 = (b + 1) * height / bands;
    const std::size_t tiles = k / bands + (b < k % bands ? 1 : 0);
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        const std::size_t t = c * tiles / width;
        ids[r * width + c] = first_id + static_cast<std::uint32_t>(t);
      }
    }
    first_id += static_cast<std::uint32_t>(tiles);
  }
  return Segmentation(height, width, std::move(ids));
}

std::vector<std::uint32_t> assign(const EmbeddingMap& vectors, const VectorSet& prototypes) {
  if (prototypes.empty()) throw Error("assign: no prototypes");
  if (prototypes.dim() != vectors.dim()) throw ShapeMismatch("assign: dim mismatch");
  std::vector<std::uint32_t> ids(vectors.pixels());
  const std::size_t k = prototypes.size();
  for (std::size_t i = 0; i < vectors.pixels(); ++i) {
    const auto v = vectors.pixel(i);
    std::uint32_t best = 0;
    double best_sim = dot(prototypes[0], v);
    for (std::size_t s = 1; s < k; ++s) {
      const double sim = dot(prototypes[s], v);
      if (sim > best_sim) {
        best_sim = sim;
        best = static_cast<std::uint32_t>(s);
      }
    }
    ids[i] = best;
  }
  return ids;
}

Segmentation e_step(const EmbeddingMap& vectors, const VectorSet& prototypes) {
  const auto ids = assign(vectors, prototypes);
  return Segmentation::compact(vectors.height(), vectors.width(), ids);
}

VectorSet m_step(const EmbeddingMap& vectors, const Segmentation& seg) {
  if (seg.pixels() != vectors.pixels()) throw ShapeMismatch("m_step: size mismatch");
  const std::size_t d = vectors.dim();
  std::vector<double> sums(seg.num_segments() * d, 0.0);
  for (std::size_t i = 0; i < vectors.pixels(); ++i) {
    const auto v = vectors.pixel(i);
    double* acc = sums.data() + seg[i] * d;
    for (std::size_t j = 0; j < d; ++j) acc[j] += v[j];
  }
  for (std::size_t s = 0; s < seg.num_segments(); ++s) {
    std::span<double> acc{sums.data() + s * d, d};
    const double n = norm(acc);
    if (!(n >= kZeroNormThreshold)) {
      throw DegenerateSum("segment " + std::to_string(s) + " vectors cancel out");
    }
    for (double& x : acc) x /= n;
  }
  return VectorSet(d, std::move(sums));
}

double clustering_objective(const EmbeddingMap& vectors, const Segmentation& seg,
                            const VectorSet& prototypes) {
  std::vector<double> terms(vectors.pixels());
  for (std::size_t i = 0; i < vectors.pixels(); ++i) {
    terms[i] = dot(prototypes[seg[i]], vectors.pixel(i));
  }
  return pairwise_sum(terms);
}

KMeansResult run_kmeans(const EmbeddingMap& vectors, Segmentation init, std::size_t rounds) {
  KMeansResult result{std::move(init), VectorSet(vectors.dim()), {}, {}, 0};
  result.prototypes = m_step(vectors, result.segmentation);
  for (std::size_t round = 0; round < rounds; ++round) {
    VectorSet protos = m_step(vectors, result.segmentation);
    const auto ids = assign(vectors, protos);

    std::size_t changed = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] != result.segmentation[i]) ++changed;
    }

    // Drop prototypes that won no pixel; compaction keeps ascending order so
    // the survivors line up with the compacted ids.
    std::vector<bool> used(protos.size(), false);
    for (auto id : ids) used[id] = true;
    VectorSet survivors(vectors.dim());
    for (std::size_t s = 0; s < protos.size(); ++s) {
      if (used[s]) survivors.push_back(protos[s]);
    }

    result.segmentation = Segmentation::compact(vectors.height(), vectors.width(), ids);
    result.prototypes = std::move(survivors);
    result.objective.push_back(
        clustering_objective(vectors, result.segmentation, result.prototypes));
    result.changed.push_back(changed);
    ++result.rounds;
  }
  return result;
}

KMeansResult spherical_kmeans_detailed(const EmbeddingMap& emb, const TrainConfig& cfg) {
  const AugmentedMap aug = augment(emb, cfg.coord_weight);
  Segmentation init = init_grid(emb.height(), emb.width(), cfg.num_clusters);
  return run_kmeans(aug, std::move(init), cfg.em_iters);
}

Segmentation spherical_kmeans(const EmbeddingMap& emb, const TrainConfig& cfg) {
  return spherical_kmeans_detailed(emb, cfg).segmentation;
}

}  // namespace segsort
