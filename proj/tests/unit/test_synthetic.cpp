// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "segsort/segment_align.hpp"
#include "segsort/synthetic.hpp"

namespace segsort {
namespace {

TEST(Synthetic, SameSeedGivesIdenticalScenes) {
  const auto a = make_dataset(4, 4, 32, 7);
  const auto b = make_dataset(4, 4, 32, 7);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image.values, b[i].image.values);
    EXPECT_EQ(a[i].gt, b[i].gt);
  }
  const auto c = make_dataset(4, 4, 32, 8);
  EXPECT_NE(a[0].image.values, c[0].image.values);
}

TEST(Synthetic, SceneDoesNotDependOnRequestedCount) {
  const auto all = make_dataset(6, 3, 24, 5);
  const auto tail = make_dataset(2, 3, 24, 5, 4);
  EXPECT_EQ(all[4].image.values, tail[0].image.values);
  EXPECT_EQ(all[5].gt, tail[1].gt);
}

TEST(Synthetic, ZeroImagesIsEmpty) { EXPECT_TRUE(make_dataset(0, 4, 32, 1).empty()); }

TEST(Synthetic, TwoClassesUseBackgroundAndOneForeground) {
  std::set<ClassId> seen;
  for (const auto& s : make_dataset(10, 2, 32, 3)) seen.insert(s.gt.labels.begin(), s.gt.labels.end());
  EXPECT_EQ(seen, (std::set<ClassId>{0, 1}));
}

TEST(Synthetic, GroundTruthMatchesShapeGeometry) {
  for (const auto& s : make_dataset(20, 4, 64, 7)) {
    EXPECT_GE(s.shapes.size(), 1u);
    EXPECT_LE(s.shapes.size(), 4u);
    EXPECT_EQ(s.gt, rasterize(s.shapes, 64));
    EXPECT_EQ(s.image.dim, kSceneFeatureDim);
    for (const auto& shape : s.shapes) {
      EXPECT_GE(shape.label, 1);
      EXPECT_LE(shape.label, 3);
    }
  }
}

TEST(Synthetic, ClassMeansAreWellSeparated) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (std::size_t classes : {2u, 4u, 8u, 16u}) {
      const auto means = class_means(classes, seed);
      ASSERT_EQ(means.size(), classes);
      for (std::size_t a = 0; a < classes; ++a) {
        for (std::size_t b = a + 1; b < classes; ++b) {
          double d2 = 0.0;
          for (std::size_t j = 0; j < kSceneFeatureDim; ++j) {
            d2 += std::pow(means[a][j] - means[b][j], 2);
          }
          EXPECT_GE(std::sqrt(d2), 4.0 * kSceneNoiseSigma);
          if (classes <= 4) {
            EXPECT_GE(std::sqrt(d2), kSceneMinClassGap);
          }
        }
      }
    }
  }
}

TEST(Synthetic, PixelsSitNearTheirClassMean) {
  const auto means = class_means(4, 7);
  const auto scenes = make_dataset(3, 4, 32, 7);
  for (const auto& s : scenes) {
    for (std::size_t i = 0; i < s.gt.pixels(); ++i) {
      const auto px = s.image.pixel(i);
      // Nearest mean is the true class.
      std::size_t best = 0;
      double best_d = 1e9;
      for (std::size_t c = 0; c < means.size(); ++c) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < kSceneFeatureDim; ++j) d2 += std::pow(px[j] - means[c][j], 2);
        if (d2 < best_d) {
          best_d = d2;
          best = c;
        }
      }
      EXPECT_EQ(best, s.gt[i]);
    }
  }
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW(make_dataset(1, 1, 32, 0), ConfigError);
  EXPECT_THROW(make_dataset(1, 3, 8, 0), ConfigError);
}

TEST(Synthetic, TileOversegmentationIsSingleClassPerSegment) {
  for (const auto& s : make_dataset(5, 4, 64, 11)) {
    const auto seg = tile_oversegmentation(s.gt, 25);
    EXPECT_GE(seg.num_segments(), 25u);
    std::vector<int> label(seg.num_segments(), -1);
    for (std::size_t i = 0; i < seg.pixels(); ++i) {
      if (label[seg[i]] < 0) label[seg[i]] = s.gt[i];
      EXPECT_EQ(label[seg[i]], s.gt[i]);
    }
  }
}

TEST(SyntheticSpec, Parses) {
  const auto spec = parse_synthetic_spec("classes=4,images=20,size=64,seed=7");
  EXPECT_EQ(spec.classes, 4u);
  EXPECT_EQ(spec.images, 20u);
  EXPECT_EQ(spec.size, 64u);
  EXPECT_EQ(spec.seed, 7u);
  EXPECT_EQ(spec.holdout, 10u);
  EXPECT_EQ(parse_synthetic_spec("holdout=3").holdout, 3u);
}

TEST(SyntheticSpec, RejectsMalformed) {
  EXPECT_THROW(parse_synthetic_spec("classes"), ConfigError);
  EXPECT_THROW(parse_synthetic_spec("classes=x"), ConfigError);
  EXPECT_THROW(parse_synthetic_spec("colors=3"), ConfigError);
  EXPECT_THROW(parse_synthetic_spec("classes=1"), ConfigError);
  EXPECT_THROW(parse_synthetic_spec("size=4"), ConfigError);
}

}  // namespace
}  // namespace segsort
