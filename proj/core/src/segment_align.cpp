// SPDX-License-Identifier: Apache-2.0

#include "segsort/segment_align.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace segsort {

namespace {

// Majority class of the non-ignored pixels per segment; ties go to the lower
// class id. kIgnoreLabel when a segment has no labeled pixel.
std::vector<ClassId> majority_classes(const Segmentation& seg, const LabelMap& gt) {
  std::vector<std::map<ClassId, std::size_t>> hist(seg.num_segments());
  for (std::size_t i = 0; i < seg.pixels(); ++i) {
    if (!gt.ignored(i)) ++hist[seg[i]][gt[i]];
  }
  std::vector<ClassId> out(seg.num_segments(), kIgnoreLabel);
  for (std::size_t s = 0; s < hist.size(); ++s) {
    std::size_t best = 0;
    for (const auto& [cls, count] : hist[s]) {
      if (count > best) {
        best = count;
        out[s] = cls;
      }
    }
  }
  return out;
}

// Labels 4-connected components of equal ids; component ids follow raster
// order of each component's first pixel.
std::vector<std::uint32_t> connected_components(std::size_t h, std::size_t w,
                                                const std::vector<std::uint64_t>& ids) {
  constexpr std::uint32_t kUnset = ~std::uint32_t{0};
  std::vector<std::uint32_t> comp(ids.size(), kUnset);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t start = 0; start < ids.size(); ++start) {
    if (comp[start] != kUnset) continue;
    comp[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const std::size_t r = p / w;
      const std::size_t c = p % w;
      auto visit = [&](std::size_t q) {
        if (comp[q] == kUnset && ids[q] == ids[p]) {
          comp[q] = next;
          stack.push_back(q);
        }
      };
      if (r > 0) visit(p - w);
      if (r + 1 < h) visit(p + w);
      if (c > 0) visit(p - 1);
      if (c + 1 < w) visit(p + 1);
    }
    ++next;
  }
  return comp;
}

}  // namespace

AlignedSegmentation align(const Segmentation& seg, const LabelMap& gt, bool split_components) {
  if (seg.height() != gt.height || seg.width() != gt.width) {
    throw ShapeMismatch("align: segmentation and label map shapes differ");
  }
  const auto majority = majority_classes(seg, gt);
  const std::size_t n = seg.pixels();

  // Effective class per pixel: ignored pixels take their segment's majority.
  std::vector<ClassId> cls(n);
  std::vector<std::uint8_t> ignored(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (gt.ignored(i)) {
      ignored[i] = 1;
      cls[i] = majority[seg[i]];
    } else {
      cls[i] = gt[i];
    }
  }

  // Key (source segment, class[, component]) -> output id, ordered by key.
  std::vector<std::uint32_t> comp;
  if (split_components) {
    std::vector<std::uint64_t> piece(n);
    for (std::size_t i = 0; i < n; ++i) {
      piece[i] = (std::uint64_t{seg[i]} << 16) | cls[i];
    }
    comp = connected_components(seg.height(), seg.width(), piece);
  }
  using Key = std::tuple<std::uint32_t, ClassId, std::uint32_t>;
  std::map<Key, std::uint32_t> ids;
  std::vector<Key> keys(n);
  for (std::size_t i = 0; i < n; ++i) {
    keys[i] = Key{seg[i], cls[i], split_components ? comp[i] : 0u};
    ids.emplace(keys[i], 0);
  }
  std::vector<ClassId> labels;
  std::vector<std::uint32_t> source;
  std::uint32_t next = 0;
  for (auto& [key, id] : ids) {
    id = next++;
    source.push_back(std::get<0>(key));
    labels.push_back(std::get<1>(key));
  }
  std::vector<std::uint32_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = ids[keys[i]];

  return AlignedSegmentation{Segmentation(seg.height(), seg.width(), std::move(out)),
                             std::move(labels), std::move(source), std::move(ignored)};
}

std::vector<Prototype> prototypes(const EmbeddingMap& emb, const Segmentation& seg,
                                  const LabelMap* gt, std::uint32_t image_id) {
  if (seg.pixels() != emb.pixels()) throw ShapeMismatch("prototypes: size mismatch");
  if (gt != nullptr && gt->pixels() != emb.pixels()) {
    throw ShapeMismatch("prototypes: label map size mismatch");
  }
  const std::size_t d = emb.dim();
  const std::size_t k = seg.num_segments();
  std::vector<ClassId> majority;
  if (gt != nullptr) majority = majority_classes(seg, *gt);

  std::vector<double> sums(k * d, 0.0);
  std::vector<std::uint32_t> counts(k, 0);
  for (std::size_t i = 0; i < emb.pixels(); ++i) {
    const std::uint32_t s = seg[i];
    // A segment with no labeled pixel falls back to all of its pixels.
    if (gt != nullptr && majority[s] != kIgnoreLabel && (*gt)[i] != majority[s]) continue;
    const auto v = emb.pixel(i);
    double* acc = sums.data() + s * d;
    for (std::size_t j = 0; j < d; ++j) acc[j] += v[j];
    ++counts[s];
  }

  std::vector<Prototype> out;
  out.reserve(k);
  for (std::size_t s = 0; s < k; ++s) {
    const std::span<const double> acc{sums.data() + s * d, d};
    if (!(norm(acc) >= kZeroNormThreshold)) {
      throw DegenerateSum("segment " + std::to_string(s) + " vectors cancel out");
    }
    Prototype p;
    p.vector = normalized(acc);
    p.image_id = image_id;
    p.segment_id = static_cast<std::uint32_t>(s);
    if (gt != nullptr && majority[s] != kIgnoreLabel) p.label = majority[s];
    p.pixel_count = counts[s];
    out.push_back(std::move(p));
  }
  return out;
}

void PrototypeBank::push(std::vector<Prototype> batch) {
  if (depth_ == 0) return;
  entries_.push_back(std::move(batch));
  while (entries_.size() > depth_) entries_.pop_front();
}

std::vector<Prototype> PrototypeBank::snapshot() const {
  std::vector<Prototype> out;
  for (const auto& batch : entries_) out.insert(out.end(), batch.begin(), batch.end());
  return out;
}

PrototypeBank bank_push(PrototypeBank bank, std::vector<Prototype> batch) {
  bank.push(std::move(batch));
  return bank;
}

}  // namespace segsort
