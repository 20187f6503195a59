// SPDX-License-Identifier: Apache-2.0
//
// Pixel sorting: spherical K-Means over coordinate-augmented embeddings
// with hard assignments and a fixed number of EM rounds.

#pragma once

#include <cstddef>
#include <vector>

#include "segsort/types.hpp"

namespace segsort {

/// Embeddings concatenated with lambda * (row/(H-1), col/(W-1)) and
/// re-normalized. dim() is the embedding dim + 2.
class AugmentedMap : public EmbeddingMap {
 public:
  AugmentedMap(EmbeddingMap vectors, double coord_weight)
      : EmbeddingMap(std::move(vectors)), coord_weight_(coord_weight) {}
  double coord_weight() const { return coord_weight_; }

 private:
  double coord_weight_;
};

AugmentedMap augment(const EmbeddingMap& emb, double coord_weight);

/// Uniform rectangular partition into exactly k tiles, ids row-major.
/// Throws TooManyClusters when k > H*W.
Segmentation init_grid(std::size_t height, std::size_t width, std::size_t k);

/// Assigns every pixel to its max-cosine prototype (lowest index on ties).
/// The result is not compacted: ids index into `prototypes`.
std::vector<std::uint32_t> assign(const EmbeddingMap& vectors, const VectorSet& prototypes);

/// E-step. Same as assign() but returned as a Segmentation with empty
/// prototypes dropped and ids compacted in ascending prototype order.
Segmentation e_step(const EmbeddingMap& vectors, const VectorSet& prototypes);

/// M-step: per-segment mean direction. Throws DegenerateSum when a
/// segment's vector sum has norm < 1e-12.
VectorSet m_step(const EmbeddingMap& vectors, const Segmentation& seg);

/// Sum over pixels of mu_{z_i} . v_i.
double clustering_objective(const EmbeddingMap& vectors, const Segmentation& seg,
                            const VectorSet& prototypes);

struct KMeansResult {
  Segmentation segmentation;
  /// Prototypes of the surviving segments, indexed by final segment id.
  VectorSet prototypes;
  /// Objective after each M+E round.
  std::vector<double> objective;
  /// Pixels whose segment changed in each round, measured against the
  /// prototype index they were assigned before the round.
  std::vector<std::size_t> changed;
  std::size_t rounds = 0;
};

/// Runs `rounds` M/E alternations starting from `init`.
KMeansResult run_kmeans(const EmbeddingMap& vectors, Segmentation init, std::size_t rounds);

/// augment -> init_grid -> em_iters rounds.
KMeansResult spherical_kmeans_detailed(const EmbeddingMap& emb, const TrainConfig& cfg);
Segmentation spherical_kmeans(const EmbeddingMap& emb, const TrainConfig& cfg);

}  // namespace segsort
