// SPDX-License-Identifier: Apache-2.0
//
// Shared data model: feature grids, unit embedding maps, segmentations,
// semantic label maps, prototypes and the training configuration.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace segsort {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroVector : public Error {
 public:
  using Error::Error;
};
class TooManyClusters : public Error {
 public:
  using Error::Error;
};
class DegenerateSum : public Error {
 public:
  using Error::Error;
};
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};
class UnlabeledStore : public Error {
 public:
  using Error::Error;
};
class InvalidLabel : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class FormatError : public Error {
 public:
  using Error::Error;
};
/// A mode-specific input (e.g. oversegmentations for unsupervised training)
/// is absent.
class MissingPrerequisite : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Vector arithmetic on the unit sphere
// ---------------------------------------------------------------------------

inline constexpr double kZeroNormThreshold = 1e-12;

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);

/// Returns a / |a|. Throws ZeroVector when |a| < kZeroNormThreshold.
std::vector<double> normalized(std::span<const double> a);

/// Dot product of two unit vectors, clamped to [-1, 1].
double cosine(std::span<const double> a, std::span<const double> b);

/// Sum with pairwise (cascade) reduction; the result does not depend on
/// how a caller later splits the range across workers.
double pairwise_sum(std::span<const double> values);

// ---------------------------------------------------------------------------
// Dense containers
// ---------------------------------------------------------------------------

/// Row-major set of equal-length vectors.
class VectorSet {
 public:
  VectorSet() = default;
  explicit VectorSet(std::size_t dim) : dim_(dim) {}
  VectorSet(std::size_t dim, std::vector<double> data);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return data_.empty(); }

  std::span<const double> operator[](std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<double> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  void push_back(std::span<const double> v);
  void append(const VectorSet& other);
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// H x W grid of raw (not necessarily normalized) feature vectors.
struct FeatureGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t dim = 0;
  std::vector<double> values;

  FeatureGrid() = default;
  FeatureGrid(std::size_t h, std::size_t w, std::size_t d)
      : height(h), width(w), dim(d), values(h * w * d, 0.0) {}

  std::size_t pixels() const { return height * width; }
  std::span<const double> pixel(std::size_t i) const {
    return {values.data() + i * dim, dim};
  }
  std::span<double> pixel(std::size_t i) { return {values.data() + i * dim, dim}; }
};

/// H x W grid of unit vectors on S^{dim-1}. Immutable once built.
class EmbeddingMap {
 public:
  /// Wraps vectors that are already unit length. Checks shape only; use
  /// normalize_map() for arbitrary input.
  EmbeddingMap(std::size_t height, std::size_t width, std::size_t dim,
               std::vector<double> data);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t dim() const { return dim_; }
  std::size_t pixels() const { return height_ * width_; }

  std::span<const double> pixel(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const double> at(std::size_t r, std::size_t c) const {
    return pixel(r * width_ + c);
  }
  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t height_;
  std::size_t width_;
  std::size_t dim_;
  std::vector<double> data_;
};

/// Divides every pixel vector by its norm. Throws ZeroVector if any pixel
/// norm is below 1e-12.
EmbeddingMap normalize_map(const FeatureGrid& raw);

/// Hard assignment of pixels to segments, ids contiguous in [0, num_segments).
class Segmentation {
 public:
  /// Validates that ids are contiguous and all present.
  Segmentation(std::size_t height, std::size_t width,
               std::vector<std::uint32_t> labels);

  /// Relabels arbitrary ids to 0..n-1 preserving ascending id order.
  static Segmentation compact(std::size_t height, std::size_t width,
                              std::span<const std::uint32_t> raw_ids);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t pixels() const { return labels_.size(); }
  std::size_t num_segments() const { return num_segments_; }
  std::uint32_t operator[](std::size_t i) const { return labels_[i]; }
  const std::vector<std::uint32_t>& labels() const { return labels_; }

  std::vector<std::size_t> segment_sizes() const;

  friend bool operator==(const Segmentation&, const Segmentation&) = default;

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint32_t> labels_;
  std::size_t num_segments_;
};

using ClassId = std::uint16_t;
inline constexpr ClassId kIgnoreLabel = 65535;

/// Per-pixel semantic class ids; kIgnoreLabel marks unlabeled pixels.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<ClassId> labels;
  ClassId ignore_value = kIgnoreLabel;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, ClassId fill = 0)
      : height(h), width(w), labels(h * w, fill) {}
  LabelMap(std::size_t h, std::size_t w, std::vector<ClassId> values);

  std::size_t pixels() const { return labels.size(); }
  bool ignored(std::size_t i) const { return labels[i] == ignore_value; }
  ClassId operator[](std::size_t i) const { return labels[i]; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// Mean direction of one segment with provenance.
struct Prototype {
  std::vector<double> vector;
  std::uint32_t image_id = 0;
  std::uint32_t segment_id = 0;
  std::optional<ClassId> label;
  std::uint32_t pixel_count = 1;
};

/// Hyperparameters shared by clustering, training and retrieval.
struct TrainConfig {
  std::size_t num_clusters = 25;
  std::size_t embedding_dim = 32;
  double kappa = 10.0;
  std::size_t em_iters = 10;
  double coord_weight = 1.0;
  std::size_t bank_depth = 2;
  std::size_t knn = 21;
  double learning_rate = 5.0;
  std::size_t iterations = 100;
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;
  /// 0 selects the linear embedder; > 0 adds one tanh hidden layer.
  std::size_t hidden_units = 0;
  /// Also split aligned segments into 4-connected components.
  bool split_components = false;
  /// Force single-threaded execution.
  bool serial = false;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

}  // namespace segsort
