// SPDX-License-Identifier: Apache-2.0

#include "segsort/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace segsort {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

std::vector<double> normalized(std::span<const double> a) {
  const double n = norm(a);
  if (!(n >= kZeroNormThreshold)) {
    throw ZeroVector("vector norm below 1e-12");
  }
  std::vector<double> out(a.begin(), a.end());
  for (double& x : out) x /= n;
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  return std::clamp(dot(a, b), -1.0, 1.0);
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 32;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

VectorSet::VectorSet(std::size_t dim, std::vector<double> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0 || data_.size() % dim_ != 0) {
    throw ShapeMismatch("VectorSet payload is not a multiple of dim");
  }
}

void VectorSet::push_back(std::span<const double> v) {
  if (v.size() != dim_) throw ShapeMismatch("VectorSet::push_back dim mismatch");
  data_.insert(data_.end(), v.begin(), v.end());
}

void VectorSet::append(const VectorSet& other) {
  if (other.empty()) return;
  if (other.dim_ != dim_) throw ShapeMismatch("VectorSet::append dim mismatch");
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
}

EmbeddingMap::EmbeddingMap(std::size_t height, std::size_t width, std::size_t dim,
                           std::vector<double> data)
    : height_(height), width_(width), dim_(dim), data_(std::move(data)) {
  if (height_ < 1 || width_ < 1) throw ShapeMismatch("embedding map must be non-empty");
  if (dim_ < 2) throw ShapeMismatch("embedding dimension must be >= 2");
  if (data_.size() != height_ * width_ * dim_) {
    throw ShapeMismatch("embedding payload size does not match H*W*dim");
  }
}

EmbeddingMap normalize_map(const FeatureGrid& raw) {
  if (raw.values.size() != raw.pixels() * raw.dim) {
    throw ShapeMismatch("feature grid payload size does not match H*W*dim");
  }
  std::vector<double> out(raw.values.size());
  for (std::size_t i = 0; i < raw.pixels(); ++i) {
    const auto v = raw.pixel(i);
    const double n = norm(v);
    if (!(n >= kZeroNormThreshold)) {
      throw ZeroVector("pixel " + std::to_string(i) + " has norm below 1e-12");
    }
    for (std::size_t j = 0; j < raw.dim; ++j) out[i * raw.dim + j] = v[j] / n;
  }
  return EmbeddingMap(raw.height, raw.width, raw.dim, std::move(out));
}

Segmentation::Segmentation(std::size_t height, std::size_t width,
                           std::vector<std::uint32_t> labels)
    : height_(height), width_(width), labels_(std::move(labels)), num_segments_(0) {
  if (labels_.size() != height_ * width_) {
    throw ShapeMismatch("segmentation size does not match H*W");
  }
  if (labels_.empty()) return;
  const std::uint32_t max_id = *std::max_element(labels_.begin(), labels_.end());
  std::vector<bool> seen(static_cast<std::size_t>(max_id) + 1, false);
  for (auto id : labels_) seen[id] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw Error("segment ids are not contiguous");
  }
  num_segments_ = static_cast<std::size_t>(max_id) + 1;
}

Segmentation Segmentation::compact(std::size_t height, std::size_t width,
                                   std::span<const std::uint32_t> raw_ids) {
  std::map<std::uint32_t, std::uint32_t> remap;
  for (auto id : raw_ids) remap.emplace(id, 0);
  std::uint32_t next = 0;
  for (auto& [id, dense] : remap) dense = next++;
  std::vector<std::uint32_t> out(raw_ids.size());
  for (std::size_t i = 0; i < raw_ids.size(); ++i) out[i] = remap[raw_ids[i]];
  return Segmentation(height, width, std::move(out));
}

std::vector<std::size_t> Segmentation::segment_sizes() const {
  std::vector<std::size_t> sizes(num_segments_, 0);
  for (auto id : labels_) ++sizes[id];
  return sizes;
}

LabelMap::LabelMap(std::size_t h, std::size_t w, std::vector<ClassId> values)
    : height(h), width(w), labels(std::move(values)) {
  if (labels.size() != h * w) throw ShapeMismatch("label map size does not match H*W");
}

void TrainConfig::validate() const {
  if (num_clusters < 1) throw ConfigError("num_clusters must be >= 1");
  if (embedding_dim < 2) throw ConfigError("embedding_dim must be >= 2");
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa must be >= 0");
  if (em_iters < 1) throw ConfigError("em_iters must be >= 1");
  if (!(coord_weight >= 0.0) || !std::isfinite(coord_weight)) {
    throw ConfigError("coord_weight must be >= 0");
  }
  if (knn < 1 || knn % 2 == 0) throw ConfigError("knn must be an odd positive integer");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be >= 0");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

}  // namespace segsort
