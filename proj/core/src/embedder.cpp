// SPDX-License-Identifier: Apache-2.0

#include "segsort/embedder.hpp"

#include <cmath>
#include <random>

namespace segsort {

std::size_t ToyEmbedder::parameter_count(std::size_t input_dim, std::size_t embed_dim,
                                         std::size_t hidden_units) {
  const std::size_t first = hidden_units > 0 ? input_dim * hidden_units + hidden_units : 0;
  const std::size_t last_in = hidden_units > 0 ? hidden_units : input_dim;
  return first + last_in * embed_dim + embed_dim;
}

ToyEmbedder::ToyEmbedder(std::size_t input_dim, std::size_t embed_dim,
                         std::size_t hidden_units, std::uint64_t seed)
    : input_dim_(input_dim), embed_dim_(embed_dim), hidden_(hidden_units) {
  if (input_dim_ < 1 || embed_dim_ < 2) throw ConfigError("embedder dims out of range");
  params_.resize(parameter_count(input_dim_, embed_dim_, hidden_));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::size_t p = 0;
  auto fill = [&](std::size_t count, double scale) {
    for (std::size_t i = 0; i < count; ++i) params_[p++] = scale * normal(rng);
  };
  if (hidden_ > 0) {
    fill(input_dim_ * hidden_, 1.0 / std::sqrt(static_cast<double>(input_dim_)));
    fill(hidden_, 1.0);
  }
  fill(out_in_dim() * embed_dim_, 1.0 / std::sqrt(static_cast<double>(out_in_dim())));
  fill(embed_dim_, 1.0);
}

ToyEmbedder::ToyEmbedder(std::size_t input_dim, std::size_t embed_dim,
                         std::size_t hidden_units, std::vector<double> parameters)
    : input_dim_(input_dim),
      embed_dim_(embed_dim),
      hidden_(hidden_units),
      params_(std::move(parameters)) {
  if (input_dim_ < 1 || embed_dim_ < 2) throw ConfigError("embedder dims out of range");
  if (params_.size() != parameter_count(input_dim_, embed_dim_, hidden_)) {
    throw FormatError("embedder parameter count does not match its dimensions");
  }
}

void ToyEmbedder::hidden_forward(std::span<const double> x, std::span<double> h) const {
  const double* w1 = params_.data();
  const double* b1 = w1 + input_dim_ * hidden_;
  for (std::size_t j = 0; j < hidden_; ++j) h[j] = b1[j];
  for (std::size_t i = 0; i < input_dim_; ++i) {
    const double xi = x[i];
    const double* row = w1 + i * hidden_;
    for (std::size_t j = 0; j < hidden_; ++j) h[j] += xi * row[j];
  }
  for (std::size_t j = 0; j < hidden_; ++j) h[j] = std::tanh(h[j]);
}

std::vector<double> ToyEmbedder::raw_output(std::span<const double> x) const {
  if (x.size() != input_dim_) throw ShapeMismatch("embedder input dim mismatch");
  std::vector<double> hidden_buf;
  std::span<const double> in = x;
  if (hidden_ > 0) {
    hidden_buf.resize(hidden_);
    hidden_forward(x, hidden_buf);
    in = hidden_buf;
  }
  const double* w = params_.data() + out_offset();
  const double* b = w + out_in_dim() * embed_dim_;
  std::vector<double> u(b, b + embed_dim_);
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double xi = in[i];
    const double* row = w + i * embed_dim_;
    for (std::size_t j = 0; j < embed_dim_; ++j) u[j] += xi * row[j];
  }
  return u;
}

EmbeddingMap ToyEmbedder::embed(const FeatureGrid& features) const {
  if (features.dim != input_dim_) throw ShapeMismatch("embedder input dim mismatch");
  std::vector<double> out(features.pixels() * embed_dim_);
  for (std::size_t p = 0; p < features.pixels(); ++p) {
    const auto u = raw_output(features.pixel(p));
    const double n = norm(u);
    if (!(n >= kZeroNormThreshold)) throw ZeroVector("embedder output vanished");
    for (std::size_t j = 0; j < embed_dim_; ++j) out[p * embed_dim_ + j] = u[j] / n;
  }
  return EmbeddingMap(features.height, features.width, embed_dim_, std::move(out));
}

void ToyEmbedder::accumulate_gradient(const FeatureGrid& features,
                                      const VectorSet& embedding_grad,
                                      std::span<double> out) const {
  if (out.size() != params_.size()) throw ShapeMismatch("gradient buffer size mismatch");
  if (embedding_grad.size() != features.pixels() || embedding_grad.dim() != embed_dim_) {
    throw ShapeMismatch("embedding gradient shape mismatch");
  }
  const std::size_t last_in = out_in_dim();
  const std::size_t off = out_offset();
  const double* w = params_.data() + off;
  double* gw = out.data() + off;
  double* gb = gw + last_in * embed_dim_;

  std::vector<double> hidden_buf(hidden_);
  std::vector<double> du(embed_dim_);
  std::vector<double> dh(hidden_);
  for (std::size_t p = 0; p < features.pixels(); ++p) {
    const auto ge = embedding_grad[p];
    bool any = false;
    for (double g : ge) any = any || g != 0.0;
    if (!any) continue;

    const auto x = features.pixel(p);
    std::span<const double> in = x;
    if (hidden_ > 0) {
      hidden_forward(x, hidden_buf);
      in = hidden_buf;
    }
    const auto u = raw_output(x);
    const double n = norm(u);
    // e = u/|u|  =>  dL/du = (I - e e^T) dL/de / |u|.
    double ge_dot_e = 0.0;
    for (std::size_t j = 0; j < embed_dim_; ++j) ge_dot_e += ge[j] * u[j] / n;
    for (std::size_t j = 0; j < embed_dim_; ++j) du[j] = (ge[j] - ge_dot_e * u[j] / n) / n;

    for (std::size_t i = 0; i < last_in; ++i) {
      const double xi = in[i];
      double* row = gw + i * embed_dim_;
      for (std::size_t j = 0; j < embed_dim_; ++j) row[j] += xi * du[j];
    }
    for (std::size_t j = 0; j < embed_dim_; ++j) gb[j] += du[j];

    if (hidden_ > 0) {
      for (std::size_t i = 0; i < hidden_; ++i) {
        const double* row = w + i * embed_dim_;
        double s = 0.0;
        for (std::size_t j = 0; j < embed_dim_; ++j) s += row[j] * du[j];
        dh[i] = s * (1.0 - hidden_buf[i] * hidden_buf[i]);
      }
      double* gw1 = out.data();
      double* gb1 = gw1 + input_dim_ * hidden_;
      for (std::size_t i = 0; i < input_dim_; ++i) {
        double* row = gw1 + i * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) row[j] += x[i] * dh[j];
      }
      for (std::size_t j = 0; j < hidden_; ++j) gb1[j] += dh[j];
    }
  }
}

void ToyEmbedder::sgd_step(std::span<const double> grad, double learning_rate) {
  if (grad.size() != params_.size()) throw ShapeMismatch("gradient size mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i] -= learning_rate * grad[i];
}

}  // namespace segsort
