// SPDX-License-Identifier: Apache-2.0
//
// Ground-truth alignment of segments, embedding-only segment prototypes and
// the cross-batch prototype memory bank.

#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "segsort/types.hpp"

namespace segsort {

struct AlignedSegmentation {
  Segmentation segmentation;
  /// Class of each output segment (kIgnoreLabel if it only holds ignored pixels).
  std::vector<ClassId> segment_labels;
  /// Input segment each output segment was cut from.
  std::vector<std::uint32_t> source;
  /// 1 for pixels whose ground truth is the ignore value.
  std::vector<std::uint8_t> ignored;
};

/// Splits every input segment by ground-truth class so each output segment
/// carries one label. Ignored pixels join their input segment's majority
/// class. With split_components, each piece is further split into
/// 4-connected components. Throws ShapeMismatch.
AlignedSegmentation align(const Segmentation& seg, const LabelMap& gt,
                          bool split_components = false);

/// Per-segment mean direction of the member embeddings. With `gt`, only the
/// pixels of the segment's majority class (ties to the lower id) contribute
/// and the prototype is labeled with that class.
std::vector<Prototype> prototypes(const EmbeddingMap& emb, const Segmentation& seg,
                                  const LabelMap* gt = nullptr,
                                  std::uint32_t image_id = 0);

/// FIFO cache of prototypes from the most recent `depth` batches. Entries
/// are constants for the loss.
class PrototypeBank {
 public:
  explicit PrototypeBank(std::size_t depth) : depth_(depth) {}

  void push(std::vector<Prototype> batch);

  std::size_t depth() const { return depth_; }
  std::size_t batches() const { return entries_.size(); }
  const std::deque<std::vector<Prototype>>& entries() const { return entries_; }

  /// All retained prototypes, oldest batch first.
  std::vector<Prototype> snapshot() const;

 private:
  std::size_t depth_;
  std::deque<std::vector<Prototype>> entries_;
};

/// Value-returning form of PrototypeBank::push.
PrototypeBank bank_push(PrototypeBank bank, std::vector<Prototype> batch);

}  // namespace segsort
