// SPDX-License-Identifier: Apache-2.0
//
// Segment sorting losses. Prototypes are constants; gradients flow only into
// the pixel embeddings and are projected onto the sphere's tangent space.

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "segsort/types.hpp"

namespace segsort {

/// One loss evaluation. Pixel i belongs to prototype `own[i]`; its positive
/// set C_i^+ is every other prototype whose class equals the class of
/// `own[i]`. Prototypes without a class have no positives.
struct LossBatch {
  VectorSet embeddings;
  std::vector<std::size_t> own;
  VectorSet prototypes;
  std::vector<std::optional<ClassId>> prototype_labels;
  double kappa = 10.0;

  /// Checks index ranges, dims and label count; throws ShapeMismatch.
  void validate() const;
};

struct LossOutput {
  /// Mean over pixels.
  double loss = 0.0;
  /// d(mean loss)/d v_i, tangent-projected; one row per pixel.
  VectorSet grad;
  /// Pixels that used the vMF term because C_i^+ was empty.
  std::size_t fallback_pixels = 0;
};

/// Softmax over kappa * cosine similarities.
std::vector<double> posterior(std::span<const double> v, const VectorSet& prototypes,
                              double kappa);

/// Mean of -log softmax_own(kappa mu^T v).
LossOutput vmf_loss(const LossBatch& batch);

/// Mean of -log [sum_{s in C+} exp(kappa mu_s^T v) / sum_{l != own} exp(kappa mu_l^T v)],
/// falling back to the vMF term for pixels with an empty C+.
LossOutput vmfn_loss(const LossBatch& batch);

}  // namespace segsort
