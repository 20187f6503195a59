// SPDX-License-Identifier: Apache-2.0

#include "segsort/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace segsort {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : n_(num_classes), counts_(num_classes * num_classes, 0) {
  if (n_ == 0) throw ConfigError("num_classes must be >= 1");
}

void ConfusionMatrix::add(const LabelMap& pred, const LabelMap& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeMismatch("prediction and ground truth shapes differ");
  }
  for (std::size_t i = 0; i < gt.pixels(); ++i) {
    if (gt.ignored(i)) continue;
    const std::size_t g = gt[i];
    const std::size_t p = pred[i];
    if (g >= n_) throw InvalidLabel("ground truth class " + std::to_string(g) + " out of range");
    if (p >= n_) throw InvalidLabel("predicted class " + std::to_string(p) + " out of range");
    ++counts_[g * n_ + p];
  }
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

IouScore miou(const ConfusionMatrix& cm) {
  const std::size_t n = cm.num_classes();
  IouScore out;
  out.per_class.assign(n, std::nullopt);
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < n; ++c) {
    const std::uint64_t tp = cm.count(c, c);
    std::uint64_t fp = 0, fn = 0;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == c) continue;
      fp += cm.count(o, c);
      fn += cm.count(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(denom);
    out.per_class[c] = iou;
    sum += iou;
    ++present;
  }
  out.mean = present > 0 ? sum / static_cast<double>(present) : 0.0;
  return out;
}

IouScore miou(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes) {
  ConfusionMatrix cm(num_classes);
  cm.add(pred, gt);
  return miou(cm);
}

std::vector<std::uint8_t> class_boundary(const LabelMap& map, ClassId cls) {
  const std::size_t h = map.height;
  const std::size_t w = map.width;
  std::vector<std::uint8_t> out(map.pixels(), 0);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t i = r * w + c;
      if (map[i] != cls) continue;
      const bool edge = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
      out[i] = edge || map[i - w] != cls || map[i + w] != cls || map[i - 1] != cls ||
               map[i + 1] != cls;
    }
  }
  return out;
}

namespace {

void finalize(ClassBoundary& b) {
  b.precision = b.pred_pixels > 0 ? static_cast<double>(b.matched) / static_cast<double>(b.pred_pixels) : 0.0;
  b.recall = b.gt_pixels > 0 ? static_cast<double>(b.matched) / static_cast<double>(b.gt_pixels) : 0.0;
  const double pr = b.precision + b.recall;
  b.f = pr > 0.0 ? 2.0 * b.precision * b.recall / pr : 0.0;
}

double mean_f(const std::vector<ClassBoundary>& classes) {
  double sum = 0.0;
  std::size_t present = 0;
  for (const auto& b : classes) {
    if (!b.present()) continue;
    sum += b.f;
    ++present;
  }
  return present > 0 ? sum / static_cast<double>(present) : 0.0;
}

// Greedy one-to-one matching of two boundary masks.
std::size_t match_boundaries(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                             std::size_t h, std::size_t w, double tol) {
  const auto reach = static_cast<std::ptrdiff_t>(std::floor(tol));
  const double tol2 = tol * tol;
  // (squared distance, min linear index, max linear index, a index, b index);
  // keyed on the unordered pair first so swapping roles keeps the order.
  using Candidate = std::tuple<std::int64_t, std::size_t, std::size_t, std::size_t, std::size_t>;
  std::vector<Candidate> pairs;
  const auto hh = static_cast<std::ptrdiff_t>(h);
  const auto ww = static_cast<std::ptrdiff_t>(w);
  for (std::ptrdiff_t r = 0; r < hh; ++r) {
    for (std::ptrdiff_t c = 0; c < ww; ++c) {
      const auto i = static_cast<std::size_t>(r * ww + c);
      if (!a[i]) continue;
      for (std::ptrdiff_t dr = -reach; dr <= reach; ++dr) {
        const std::ptrdiff_t rr = r + dr;
        if (rr < 0 || rr >= hh) continue;
        for (std::ptrdiff_t dc = -reach; dc <= reach; ++dc) {
          const std::ptrdiff_t cc = c + dc;
          if (cc < 0 || cc >= ww) continue;
          const auto j = static_cast<std::size_t>(rr * ww + cc);
          if (!b[j]) continue;
          const std::int64_t d2 = dr * dr + dc * dc;
          if (static_cast<double>(d2) > tol2) continue;
          pairs.emplace_back(d2, std::min(i, j), std::max(i, j), i, j);
        }
      }
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::uint8_t> used_a(a.size(), 0), used_b(b.size(), 0);
  std::size_t matched = 0;
  for (const auto& [d2, lo, hi, i, j] : pairs) {
    if (used_a[i] || used_b[j]) continue;
    used_a[i] = used_b[j] = 1;
    ++matched;
  }
  return matched;
}

}  // namespace

BoundaryScore boundary_f(const LabelMap& pred, const LabelMap& gt, std::size_t num_classes,
                         double tol_frac) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw ShapeMismatch("prediction and ground truth shapes differ");
  }
  if (!(tol_frac > 0.0)) throw ConfigError("boundary tolerance must be > 0");
  const double diag = std::hypot(static_cast<double>(gt.height), static_cast<double>(gt.width));
  const double tol = tol_frac * diag;

  BoundaryScore out;
  out.per_class.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto cls = static_cast<ClassId>(c);
    const auto bp = class_boundary(pred, cls);
    const auto bg = class_boundary(gt, cls);
    auto& score = out.per_class[c];
    score.pred_pixels = static_cast<std::size_t>(std::count(bp.begin(), bp.end(), 1));
    score.gt_pixels = static_cast<std::size_t>(std::count(bg.begin(), bg.end(), 1));
    if (score.pred_pixels > 0 && score.gt_pixels > 0) {
      score.matched = match_boundaries(bp, bg, gt.height, gt.width, tol);
    }
    finalize(score);
  }
  out.mean_f = mean_f(out.per_class);
  return out;
}

BoundaryScore merge_boundary(const std::vector<BoundaryScore>& scores) {
  BoundaryScore out;
  for (const auto& s : scores) {
    if (out.per_class.size() < s.per_class.size()) out.per_class.resize(s.per_class.size());
    for (std::size_t c = 0; c < s.per_class.size(); ++c) {
      out.per_class[c].pred_pixels += s.per_class[c].pred_pixels;
      out.per_class[c].gt_pixels += s.per_class[c].gt_pixels;
      out.per_class[c].matched += s.per_class[c].matched;
    }
  }
  for (auto& b : out.per_class) finalize(b);
  out.mean_f = mean_f(out.per_class);
  return out;
}

}  // namespace segsort
