// SPDX-License-Identifier: Apache-2.0
//
// Nonparametric inference: exact cosine kNN over a store of segment
// prototypes, majority-vote labeling, and FINCH discovery of visual groups.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "segsort/embedder.hpp"
#include "segsort/types.hpp"

namespace segsort {

/// Immutable collection of unit prototypes, unique per (image_id, segment_id).
class PrototypeStore {
 public:
  PrototypeStore() = default;
  /// Throws Error on non-unit vectors, mixed dims or duplicate ids.
  explicit PrototypeStore(std::vector<Prototype> prototypes);

  std::size_t size() const { return prototypes_.size(); }
  bool empty() const { return prototypes_.empty(); }
  std::size_t dim() const { return vectors_.dim(); }
  const Prototype& operator[](std::size_t i) const { return prototypes_[i]; }
  const std::vector<Prototype>& prototypes() const { return prototypes_; }
  const VectorSet& vectors() const { return vectors_; }
  bool all_labeled() const;

 private:
  std::vector<Prototype> prototypes_;
  VectorSet vectors_;
};

struct Neighbor {
  std::size_t index;  // position in the store
  double cosine;
};

/// Exact top-k by cosine, descending; ties keep insertion order.
std::vector<Neighbor> knn(const PrototypeStore& store, std::span<const double> query,
                          std::size_t k);

/// Majority label among `neighbors`; ties go to the larger summed cosine, then
/// to the lower class id. Throws UnlabeledStore if a neighbor has no label.
ClassId vote(const PrototypeStore& store, const std::vector<Neighbor>& neighbors);

/// knn + vote. Throws UnlabeledStore for an empty or unlabeled store.
ClassId classify_segment(const PrototypeStore& store, const Prototype& prototype,
                         std::size_t k);

struct SegmentPrediction {
  std::uint32_t segment_id;
  ClassId label;
  std::vector<Neighbor> neighbors;
};

struct InferenceResult {
  LabelMap labels;
  Segmentation segmentation;
  std::vector<SegmentPrediction> segments;
};

/// embed -> spherical K-Means -> per-segment prototype -> kNN vote -> paint.
InferenceResult infer_detailed(const ToyEmbedder& model, const FeatureGrid& image,
                               const PrototypeStore& store, const TrainConfig& cfg);
LabelMap infer(const ToyEmbedder& model, const FeatureGrid& image,
               const PrototypeStore& store, const TrainConfig& cfg);

struct FinchHierarchy {
  /// levels[l][i] = cluster of input i at level l.
  std::vector<std::vector<std::uint32_t>> levels;
  std::vector<std::size_t> counts;
};

/// Index of each point's nearest other point by cosine (lowest index on
/// ties); a single point is its own neighbor.
std::vector<std::size_t> first_neighbors(const VectorSet& points);

/// Recursive first-neighbor clustering down to a single cluster.
FinchHierarchy finch(const VectorSet& points);

}  // namespace segsort
