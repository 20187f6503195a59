// SPDX-License-Identifier: Apache-2.0
//
// Region (IoU) and boundary (precision / recall / F) scoring of label maps.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "segsort/types.hpp"

namespace segsort {

/// rows = ground truth, cols = prediction. Pixels with ignored ground truth
/// are not scored.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  /// Throws ShapeMismatch, or InvalidLabel for out-of-range ids (an ignored
  /// prediction on a labeled pixel is out of range).
  void add(const LabelMap& pred, const LabelMap& gt);

  std::size_t num_classes() const { return n_; }
  std::uint64_t count(std::size_t gt, std::size_t pred) const { return counts_[gt * n_ + pred]; }
  std::uint64_t total() const;

 private:
  std::size_t n_;
  std::vector<std::uint64_t> counts_;
};

struct IouScore {
  /// nullopt for classes absent from both maps.
  std::vector<std::optional<double>> per_class;
  /// Mean over present classes (0 if none).
  double mean = 0.0;
};

IouScore miou(const ConfusionMatrix& cm);
IouScore miou(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes);

struct ClassBoundary {
  std::size_t pred_pixels = 0;
  std::size_t gt_pixels = 0;
  std::size_t matched = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  /// Boundary pixels exist in the prediction or the ground truth.
  bool present() const { return pred_pixels > 0 || gt_pixels > 0; }
};

struct BoundaryScore {
  std::vector<ClassBoundary> per_class;
  /// Mean F over present classes.
  double mean_f = 0.0;
};

/// Boundary pixels of class `cls`: pixels of that class with a 4-neighbor of
/// another class or lying on the image border.
std::vector<std::uint8_t> class_boundary(const LabelMap& map, ClassId cls);

/// Per-class boundary matching within tol_frac * image diagonal, greedy
/// one-to-one in ascending distance.
BoundaryScore boundary_f(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes,
                         double tol_frac = 0.01);

/// Sums pixel and match counts per class over several images and recomputes
/// P/R/F from the totals.
BoundaryScore merge_boundary(const std::vector<BoundaryScore>& scores);

}  // namespace segsort
