// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "segsort/loss.hpp"
#include "support.hpp"

namespace segsort {
namespace {

using testing::Rng;
using LossFn = LossOutput (*)(const LossBatch&);

LossBatch random_batch(Rng& rng, std::size_t d, double kappa) {
  LossBatch b;
  b.kappa = kappa;
  const std::size_t protos = testing::uniform(rng, 2, 6);
  const std::size_t pixels = testing::uniform(rng, 1, 5);
  b.prototypes = testing::random_units(rng, protos, d);
  for (std::size_t s = 0; s < protos; ++s) {
    const std::size_t l = testing::uniform(rng, 0, 3);
    b.prototype_labels.push_back(l == 3 ? std::nullopt
                                        : std::optional<ClassId>(static_cast<ClassId>(l)));
  }
  b.embeddings = testing::random_units(rng, pixels, d);
  for (std::size_t i = 0; i < pixels; ++i) b.own.push_back(testing::uniform(rng, 0, protos - 1));
  return b;
}

// Central differences of the mean loss, perturbing one coordinate and
// re-normalizing the perturbed embedding.
VectorSet numeric_gradient(LossFn fn, const LossBatch& batch, double h) {
  const std::size_t d = batch.embeddings.dim();
  std::vector<double> out;
  for (std::size_t i = 0; i < batch.embeddings.size(); ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      double f[2];
      for (int side = 0; side < 2; ++side) {
        std::vector<double> data = batch.embeddings.data();
        data[i * d + k] += side == 0 ? h : -h;
        const auto v = normalized(std::span<const double>(data.data() + i * d, d));
        std::copy(v.begin(), v.end(), data.begin() + static_cast<std::ptrdiff_t>(i * d));
        LossBatch p = batch;
        p.embeddings = VectorSet(d, std::move(data));
        f[side] = fn(p).loss;
      }
      out.push_back((f[0] - f[1]) / (2.0 * h));
    }
  }
  return VectorSet(d, std::move(out));
}

double gradient_relative_error(const VectorSet& analytic, const VectorSet& numeric) {
  double diff = 0.0, a = 0.0, n = 0.0;
  for (std::size_t j = 0; j < analytic.data().size(); ++j) {
    diff += std::pow(analytic.data()[j] - numeric.data()[j], 2);
    a += std::pow(analytic.data()[j], 2);
    n += std::pow(numeric.data()[j], 2);
  }
  const double scale = std::max(std::sqrt(a), std::sqrt(n));
  return scale == 0.0 ? 0.0 : std::sqrt(diff) / scale;
}

LossBatch two_d_batch(std::vector<double> v, std::vector<double> protos,
                      std::vector<std::optional<ClassId>> labels, std::size_t own,
                      double kappa = 10.0) {
  LossBatch b;
  b.kappa = kappa;
  b.embeddings = VectorSet(2, std::move(v));
  b.prototypes = VectorSet(2, std::move(protos));
  b.prototype_labels = std::move(labels);
  b.own = {own};
  return b;
}

TEST(Posterior, EqualCosinesAreUniform) {
  const std::vector<double> v{1.0, 0.0};
  const VectorSet protos(2, {0.6, 0.8, 0.6, -0.8});
  const auto p = posterior(v, protos, 10.0);
  EXPECT_NEAR(p[0], 0.5, 1e-15);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
}

TEST(Posterior, KappaTenTwoOrthogonalPrototypes) {
  const std::vector<double> v{1.0, 0.0};
  const VectorSet protos(2, {1.0, 0.0, 0.0, 1.0});
  const auto p = posterior(v, protos, 10.0);
  const double e = std::exp(10.0);
  EXPECT_NEAR(p[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(p[1], 1.0 / (e + 1.0), 1e-15);
  EXPECT_NEAR(p[0], 0.9999546, 1e-7);
  EXPECT_NEAR(p[1], 4.54e-5, 1e-7);
}

TEST(Posterior, ZeroKappaIsUniformAndSumsToOne) {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const auto v = testing::random_unit(rng, 5);
    const auto protos = testing::random_units(rng, testing::uniform(rng, 1, 7), 5);
    const auto u = posterior(v, protos, 0.0);
    for (double x : u) EXPECT_NEAR(x, 1.0 / static_cast<double>(protos.size()), 1e-15);
    const auto p = posterior(v, protos, 10.0);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
  }
}

TEST(VmfLoss, SinglePrototypeIsZero) {
  const auto b = two_d_batch({0.6, 0.8}, {1.0, 0.0}, {std::nullopt}, 0);
  const auto out = vmf_loss(b);
  EXPECT_EQ(out.loss, 0.0);
  EXPECT_EQ(out.grad[0][0], 0.0);
  EXPECT_EQ(out.grad[0][1], 0.0);
}

TEST(VmfLoss, ClosedFormAlignedPixel) {
  const auto b = two_d_batch({1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, {0, 1}, 0);
  const auto out = vmf_loss(b);
  EXPECT_NEAR(out.loss, std::log1p(std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(out.loss, 4.5399e-5, 1e-9);
}

TEST(VmfLoss, EquidistantIsLogTwo) {
  const auto b = two_d_batch({1.0, 0.0}, {0.6, 0.8, 0.6, -0.8}, {0, 1}, 1);
  EXPECT_NEAR(vmf_loss(b).loss, std::log(2.0), 1e-15);
}

TEST(VmfnLoss, FullNeighborhoodIsZero) {
  Rng rng(32);
  const auto v = testing::random_unit(rng, 3);
  LossBatch b;
  b.kappa = 10.0;
  b.embeddings = VectorSet(3);
  b.embeddings.push_back(v);
  b.prototypes = testing::random_units(rng, 4, 3);
  b.prototype_labels = {5, 5, 5, 5};
  b.own = {2};
  EXPECT_NEAR(vmfn_loss(b).loss, 0.0, 1e-15);
  EXPECT_EQ(vmfn_loss(b).fallback_pixels, 0u);
}

TEST(VmfnLoss, SymmetricSplitIsLogTwo) {
  // Three prototypes at equal cosine 0.6 to v = (0, 0, 1).
  const double s = 0.8;
  LossBatch b;
  b.kappa = 10.0;
  b.embeddings = VectorSet(3, {0.0, 0.0, 1.0});
  b.prototypes = VectorSet(3, {s, 0.0, 0.6, -s, 0.0, 0.6, 0.0, s, 0.6});
  b.prototype_labels = {1, 1, 2};
  b.own = {0};
  EXPECT_NEAR(vmfn_loss(b).loss, std::log(2.0), 1e-14);
}

TEST(VmfnLoss, EmptyPositiveSetFallsBackToVmf) {
  const auto b = two_d_batch({1.0, 0.0}, {1.0, 0.0, 0.0, 1.0}, {0, 1}, 0);
  const auto out = vmfn_loss(b);
  EXPECT_EQ(out.fallback_pixels, 1u);
  EXPECT_NEAR(out.loss, std::log1p(std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(out.loss, vmf_loss(b).loss, 1e-15);
  EXPECT_NEAR(out.grad[0][1], vmf_loss(b).grad[0][1], 1e-15);
}

TEST(VmfnLoss, UnlabeledOwnPrototypeHasNoPositives) {
  const auto b = two_d_batch({0.6, 0.8}, {1.0, 0.0, 0.0, 1.0, 0.6, 0.8},
                             {std::nullopt, std::nullopt, std::nullopt}, 0);
  EXPECT_EQ(vmfn_loss(b).fallback_pixels, 1u);
  EXPECT_NEAR(vmfn_loss(b).loss, vmf_loss(b).loss, 1e-15);
}

TEST(LossBatch, ValidateCatchesBadIndices) {
  auto b = two_d_batch({1.0, 0.0}, {1.0, 0.0}, {0}, 3);
  EXPECT_THROW(b.validate(), ShapeMismatch);
  b.own = {0};
  b.prototype_labels.clear();
  EXPECT_THROW(b.validate(), ShapeMismatch);
}

struct GradCase {
  std::size_t dim;
  double kappa;
};

class LossGradient : public ::testing::TestWithParam<GradCase> {};

TEST_P(LossGradient, MatchesCentralDifferences) {
  const auto [d, kappa] = GetParam();
  Rng rng(100 + d * 10 + static_cast<std::uint64_t>(kappa));
  for (int t = 0; t < 30; ++t) {
    const auto batch = random_batch(rng, d, kappa);
    for (LossFn fn : {&vmf_loss, &vmfn_loss}) {
      const auto analytic = fn(batch).grad;
      const auto numeric = numeric_gradient(fn, batch, 1e-5);
      EXPECT_LT(gradient_relative_error(analytic, numeric), 1e-4);
      // The analytic gradient lives in each embedding's tangent space.
      for (std::size_t i = 0; i < batch.embeddings.size(); ++i) {
        EXPECT_NEAR(dot(analytic[i], batch.embeddings[i]), 0.0, 1e-12);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Grid, LossGradient,
                         ::testing::Values(GradCase{3, 1.0}, GradCase{3, 10.0}, GradCase{8, 1.0},
                                           GradCase{8, 10.0}));

TEST(LossProperties, NonNegativeAndFinite) {
  Rng rng(33);
  for (int t = 0; t < 200; ++t) {
    const auto b = random_batch(rng, testing::uniform(rng, 2, 8), t % 2 ? 10.0 : 1.0);
    for (LossFn fn : {&vmf_loss, &vmfn_loss}) {
      const auto out = fn(b);
      EXPECT_GE(out.loss, 0.0);
      EXPECT_TRUE(std::isfinite(out.loss));
      for (double g : out.grad.data()) EXPECT_TRUE(std::isfinite(g));
    }
  }
}

TEST(LossProperties, DuplicatingANegativePrototypeIncreasesVmfn) {
  Rng rng(34);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    auto b = random_batch(rng, 4, 10.0);
    b.embeddings = VectorSet(4, std::vector<double>(b.embeddings[0].begin(), b.embeddings[0].end()));
    b.own.resize(1);
    const auto own_label = b.prototype_labels[b.own[0]];
    for (std::size_t s = 0; s < b.prototypes.size(); ++s) {
      if (s == b.own[0]) continue;
      const bool positive = own_label && b.prototype_labels[s] == own_label;
      if (positive) continue;
      LossBatch dup = b;
      dup.prototypes.push_back(b.prototypes[s]);
      dup.prototype_labels.push_back(b.prototype_labels[s]);
      EXPECT_GT(vmfn_loss(dup).loss, vmfn_loss(b).loss);
      ++checked;
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(LossProperties, PrototypePermutationInvariance) {
  Rng rng(35);
  for (int t = 0; t < 100; ++t) {
    const auto b = random_batch(rng, 5, 10.0);
    std::vector<std::size_t> perm(b.prototypes.size());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    // Prototype s moves to position perm[s].
    LossBatch p = b;
    std::vector<double> data(b.prototypes.data().size());
    for (std::size_t s = 0; s < perm.size(); ++s) {
      std::copy(b.prototypes[s].begin(), b.prototypes[s].end(),
                data.begin() + static_cast<std::ptrdiff_t>(perm[s] * 5));
      p.prototype_labels[perm[s]] = b.prototype_labels[s];
    }
    p.prototypes = VectorSet(5, std::move(data));
    for (auto& o : p.own) o = perm[o];
    EXPECT_NEAR(vmf_loss(p).loss, vmf_loss(b).loss, 1e-12);
    EXPECT_NEAR(vmfn_loss(p).loss, vmfn_loss(b).loss, 1e-12);
  }
}

TEST(LossProperties, AppendingBankNeverDecreasesVmf) {
  Rng rng(36);
  for (int t = 0; t < 200; ++t) {
    const auto b = random_batch(rng, 4, t % 2 ? 10.0 : 1.0);
    LossBatch with_bank = b;
    const std::size_t extra = testing::uniform(rng, 1, 4);
    for (std::size_t j = 0; j < extra; ++j) {
      with_bank.prototypes.push_back(testing::random_unit(rng, 4));
      with_bank.prototype_labels.push_back(std::nullopt);
    }
    EXPECT_GE(vmf_loss(with_bank).loss, vmf_loss(b).loss);
  }
}

}  // namespace
}  // namespace segsort
