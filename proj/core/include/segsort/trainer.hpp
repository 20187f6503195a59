// SPDX-License-Identifier: Apache-2.0
//
// Two-stage EM training: pixel sorting per image, then one SGD step on the
// segment sorting loss computed jointly over every segment in the batch and
// the prototype bank.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "segsort/embedder.hpp"
#include "segsort/retrieval.hpp"
#include "segsort/segment_align.hpp"
#include "segsort/synthetic.hpp"
#include "segsort/types.hpp"

namespace segsort {

enum class TrainMode {
  /// K-Means segments aligned to ground truth, vMF-N loss.
  kSupervised,
  /// Provided oversegmentations, vMF loss; ground truth never reaches the loss.
  kUnsupervised,
};

struct TrainingImage {
  std::string name;
  FeatureGrid features;
  std::optional<LabelMap> gt;
  std::optional<Segmentation> overseg;
};

/// Converts synthetic scenes; with `overseg_tiles` > 0 each image also gets
/// tile_oversegmentation(gt, overseg_tiles).
std::vector<TrainingImage> to_training_images(const std::vector<SyntheticScene>& scenes,
                                              std::size_t overseg_tiles = 0);

struct BatchItem {
  const TrainingImage* image;
  std::uint32_t image_id;
};

struct StepResult {
  double loss = 0.0;
  std::size_t pixels = 0;
  std::size_t batch_prototypes = 0;
  std::size_t bank_prototypes = 0;
  std::size_t fallback_pixels = 0;
};

/// Segments one image the way training sees it. Unsupervised prototypes use
/// ground truth only when `label_prototypes` is set (store building); the
/// loss path never sees it.
struct ImageSegments {
  EmbeddingMap embedding;
  Segmentation segmentation;
  std::vector<Prototype> prototypes;
  /// 1 for pixels excluded from the loss (ignored ground truth).
  std::vector<std::uint8_t> excluded;
};
ImageSegments segment_image(const ToyEmbedder& model, const TrainingImage& image,
                            std::uint32_t image_id, const TrainConfig& cfg, TrainMode mode,
                            bool label_prototypes = false);

/// One training iteration; updates `model` and pushes this batch's
/// prototypes into `bank`.
StepResult train_step(ToyEmbedder& model, const std::vector<BatchItem>& batch,
                      PrototypeBank& bank, const TrainConfig& cfg, TrainMode mode);

/// Labeled prototypes of every training segment under `model`.
PrototypeStore build_store(const ToyEmbedder& model, const std::vector<TrainingImage>& dataset,
                           const TrainConfig& cfg, TrainMode mode);

struct FitResult {
  ToyEmbedder model;
  PrototypeStore store;
  std::vector<StepResult> steps;
};

using StepCallback = std::function<void(std::size_t step, const StepResult&)>;

/// Runs cfg.iterations steps over cyclic batches, then builds the store.
FitResult fit(const std::vector<TrainingImage>& dataset, const TrainConfig& cfg,
              TrainMode mode, const StepCallback& on_step = {});

}  // namespace segsort
