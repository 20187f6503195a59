// SPDX-License-Identifier: Apache-2.0

#include "segsort/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace segsort {

namespace {

// Accumulates the softmax-weighted mean of prototypes over the indices for
// which `include(l)` holds. Returns log-sum-exp of the included logits.
template <typename Pred>
double weighted_mean(const std::vector<double>& logits, const VectorSet& protos,
                     Pred include, std::vector<double>& mean) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < logits.size(); ++l) {
    if (include(l)) max_logit = std::max(max_logit, logits[l]);
  }
  std::fill(mean.begin(), mean.end(), 0.0);
  double z = 0.0;
  for (std::size_t l = 0; l < logits.size(); ++l) {
    if (!include(l)) continue;
    const double w = std::exp(logits[l] - max_logit);
    z += w;
    const auto mu = protos[l];
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += w * mu[j];
  }
  for (double& m : mean) m /= z;
  return max_logit + std::log(z);
}

void project_tangent(std::span<double> g, std::span<const double> v) {
  const double gv = dot(g, v);
  for (std::size_t j = 0; j < g.size(); ++j) g[j] -= gv * v[j];
}

enum class Kind { kVmf, kVmfN };

LossOutput evaluate(const LossBatch& batch, Kind kind) {
  batch.validate();
  const std::size_t n = batch.embeddings.size();
  const std::size_t d = batch.embeddings.dim();
  const std::size_t k = batch.prototypes.size();
  const double kappa = batch.kappa;

  LossOutput out;
  out.grad = VectorSet(d, std::vector<double>(n * d, 0.0));
  if (n == 0) return out;

  std::vector<double> terms(n, 0.0);
  std::vector<double> logits(k);
  std::vector<double> mean_all(d), mean_pos(d);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto v = batch.embeddings[i];
    const std::size_t c = batch.own[i];
    for (std::size_t l = 0; l < k; ++l) logits[l] = kappa * dot(batch.prototypes[l], v);

    const auto& own_label = batch.prototype_labels[c];
    auto positive = [&](std::size_t l) {
      return l != c && own_label.has_value() && batch.prototype_labels[l] == own_label;
    };
    bool has_positive = false;
    if (kind == Kind::kVmfN) {
      for (std::size_t l = 0; l < k && !has_positive; ++l) has_positive = positive(l);
    }

    auto g = out.grad.row(i);
    if (has_positive) {
      const double lse_den =
          weighted_mean(logits, batch.prototypes, [&](std::size_t l) { return l != c; }, mean_all);
      const double lse_num = weighted_mean(logits, batch.prototypes, positive, mean_pos);
      terms[i] = lse_den - lse_num;
      for (std::size_t j = 0; j < d; ++j) g[j] = kappa * (mean_all[j] - mean_pos[j]);
    } else {
      if (kind == Kind::kVmfN) ++out.fallback_pixels;
      const double lse =
          weighted_mean(logits, batch.prototypes, [](std::size_t) { return true; }, mean_all);
      terms[i] = lse - logits[c];
      const auto mu_c = batch.prototypes[c];
      for (std::size_t j = 0; j < d; ++j) g[j] = -kappa * (mu_c[j] - mean_all[j]);
    }
    // Rounding can push a vanishing term slightly negative.
    terms[i] = std::max(terms[i], 0.0);
    project_tangent(g, v);
    for (double& x : g) x *= inv_n;
  }
  out.loss = pairwise_sum(terms) * inv_n;
  return out;
}

}  // namespace

void LossBatch::validate() const {
  if (embeddings.size() != own.size()) throw ShapeMismatch("loss: own index count mismatch");
  if (prototypes.empty()) throw ShapeMismatch("loss: no prototypes");
  if (!embeddings.empty() && embeddings.dim() != prototypes.dim()) {
    throw ShapeMismatch("loss: embedding and prototype dims differ");
  }
  if (prototype_labels.size() != prototypes.size()) {
    throw ShapeMismatch("loss: prototype label count mismatch");
  }
  for (auto c : own) {
    if (c >= prototypes.size()) throw ShapeMismatch("loss: own index out of range");
  }
}

std::vector<double> posterior(std::span<const double> v, const VectorSet& prototypes,
                              double kappa) {
  const std::size_t k = prototypes.size();
  std::vector<double> p(k);
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l < k; ++l) {
    p[l] = kappa * dot(prototypes[l], v);
    max_logit = std::max(max_logit, p[l]);
  }
  double z = 0.0;
  for (double& x : p) {
    x = std::exp(x - max_logit);
    z += x;
  }
  for (double& x : p) x /= z;
  return p;
}

LossOutput vmf_loss(const LossBatch& batch) { return evaluate(batch, Kind::kVmf); }

LossOutput vmfn_loss(const LossBatch& batch) { return evaluate(batch, Kind::kVmfN); }

}  // namespace segsort
