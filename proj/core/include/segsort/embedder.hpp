// SPDX-License-Identifier: Apache-2.0
//
// Small differentiable per-pixel embedder: normalize(W^T x + b), optionally
// with one tanh hidden layer in front.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "segsort/types.hpp"

namespace segsort {

class ToyEmbedder {
 public:
  /// Random init, weights ~ N(0, 1/fan_in), biases ~ N(0, 1).
  ToyEmbedder(std::size_t input_dim, std::size_t embed_dim, std::size_t hidden_units,
              std::uint64_t seed);

  /// Restores an embedder from a flat parameter vector.
  ToyEmbedder(std::size_t input_dim, std::size_t embed_dim, std::size_t hidden_units,
              std::vector<double> parameters);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t embed_dim() const { return embed_dim_; }
  std::size_t hidden_units() const { return hidden_; }

  /// Layout: [W1 (in x h), b1 (h)], W (h_or_in x d), b (d); all row-major.
  std::span<const double> parameters() const { return params_; }
  std::span<double> parameters() { return params_; }
  static std::size_t parameter_count(std::size_t input_dim, std::size_t embed_dim,
                                     std::size_t hidden_units);

  /// Pre-normalization output for a single pixel.
  std::vector<double> raw_output(std::span<const double> x) const;

  /// Embeds every pixel. Throws ZeroVector where the output vanishes.
  EmbeddingMap embed(const FeatureGrid& features) const;

  /// Accumulates dL/dtheta for the embeddings of `features` given dL/de per
  /// pixel (rows of `embedding_grad`). Pixels whose gradient row is all zero
  /// are skipped. `out` must have parameter_count() entries.
  void accumulate_gradient(const FeatureGrid& features, const VectorSet& embedding_grad,
                           std::span<double> out) const;

  /// params -= learning_rate * grad.
  void sgd_step(std::span<const double> grad, double learning_rate);

 private:
  std::size_t input_dim_;
  std::size_t embed_dim_;
  std::size_t hidden_;
  std::vector<double> params_;

  std::size_t out_in_dim() const { return hidden_ > 0 ? hidden_ : input_dim_; }
  std::size_t out_offset() const { return hidden_ > 0 ? input_dim_ * hidden_ + hidden_ : 0; }
  void hidden_forward(std::span<const double> x, std::span<double> h) const;
};

}  // namespace segsort
