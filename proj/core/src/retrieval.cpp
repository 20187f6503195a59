// SPDX-License-Identifier: Apache-2.0

#include "segsort/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "segsort/pixel_sort.hpp"
#include "segsort/segment_align.hpp"

namespace segsort {

PrototypeStore::PrototypeStore(std::vector<Prototype> prototypes)
    : prototypes_(std::move(prototypes)) {
  if (prototypes_.empty()) return;
  vectors_ = VectorSet(prototypes_.front().vector.size());
  std::set<std::pair<std::uint32_t, std::uint32_t>> ids;
  for (const auto& p : prototypes_) {
    if (p.vector.size() != vectors_.dim()) throw ShapeMismatch("store: mixed prototype dims");
    if (!(std::abs(norm(p.vector) - 1.0) <= 1e-6)) throw Error("store: prototype is not unit length");
    if (!ids.emplace(p.image_id, p.segment_id).second) {
      throw Error("store: duplicate (image_id, segment_id)");
    }
    vectors_.push_back(p.vector);
  }
}

bool PrototypeStore::all_labeled() const {
  return std::all_of(prototypes_.begin(), prototypes_.end(),
                     [](const Prototype& p) { return p.label.has_value(); });
}

std::vector<Neighbor> knn(const PrototypeStore& store, std::span<const double> query,
                          std::size_t k) {
  if (store.empty() || k == 0) return {};
  if (query.size() != store.dim()) throw ShapeMismatch("knn: query dim mismatch");
  std::vector<Neighbor> all(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    all[i] = {i, cosine(store.vectors()[i], query)};
  }
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      if (a.cosine != b.cosine) return a.cosine > b.cosine;
                      return a.index < b.index;
                    });
  all.resize(take);
  return all;
}

ClassId vote(const PrototypeStore& store, const std::vector<Neighbor>& neighbors) {
  if (neighbors.empty()) throw UnlabeledStore("vote: no neighbors");
  std::map<ClassId, std::pair<std::size_t, double>> tally;
  for (const auto& n : neighbors) {
    const auto& label = store[n.index].label;
    if (!label) throw UnlabeledStore("vote: retrieved prototype has no label");
    auto& [count, sum] = tally[*label];
    ++count;
    sum += n.cosine;
  }
  // std::map iterates ascending class id, so strict comparisons keep the
  // lower id on a full tie.
  ClassId best = tally.begin()->first;
  auto best_score = tally.begin()->second;
  for (const auto& [cls, score] : tally) {
    if (score.first > best_score.first ||
        (score.first == best_score.first && score.second > best_score.second)) {
      best = cls;
      best_score = score;
    }
  }
  return best;
}

ClassId classify_segment(const PrototypeStore& store, const Prototype& prototype,
                         std::size_t k) {
  if (store.empty()) throw UnlabeledStore("classify_segment: empty store");
  return vote(store, knn(store, prototype.vector, k));
}

InferenceResult infer_detailed(const ToyEmbedder& model, const FeatureGrid& image,
                               const PrototypeStore& store, const TrainConfig& cfg) {
  if (store.empty()) throw UnlabeledStore("infer: empty store");
  if (!store.all_labeled()) throw UnlabeledStore("infer: store has unlabeled prototypes");
  const EmbeddingMap emb = model.embed(image);
  Segmentation seg = spherical_kmeans(emb, cfg);
  const auto protos = prototypes(emb, seg);

  std::vector<SegmentPrediction> segments;
  segments.reserve(protos.size());
  for (const auto& p : protos) {
    auto neighbors = knn(store, p.vector, cfg.knn);
    const ClassId label = vote(store, neighbors);
    segments.push_back({p.segment_id, label, std::move(neighbors)});
  }
  LabelMap labels(image.height, image.width);
  for (std::size_t i = 0; i < seg.pixels(); ++i) labels.labels[i] = segments[seg[i]].label;
  return {std::move(labels), std::move(seg), std::move(segments)};
}

LabelMap infer(const ToyEmbedder& model, const FeatureGrid& image,
               const PrototypeStore& store, const TrainConfig& cfg) {
  return infer_detailed(model, image, store, cfg).labels;
}

}  // namespace segsort
