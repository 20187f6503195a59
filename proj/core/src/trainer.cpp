// SPDX-License-Identifier: Apache-2.0

#include "segsort/trainer.hpp"

#include <array>
#include <exception>
#include <thread>

#include "segsort/loss.hpp"
#include "segsort/pixel_sort.hpp"

namespace segsort {

namespace {

// Runs fn(i) for i in [0, n); in parallel unless `serial`. Results must be
// written to per-index slots so the outcome is order independent.
template <typename Fn>
void for_each_index(std::size_t n, bool serial, Fn fn) {
  const std::size_t workers = serial ? 1 : std::min<std::size_t>(n, std::thread::hardware_concurrency());
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<TrainingImage> to_training_images(const std::vector<SyntheticScene>& scenes,
                                              std::size_t overseg_tiles) {
  std::vector<TrainingImage> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    TrainingImage img;
    img.name = "scene_" + std::to_string(i);
    img.features = scenes[i].image;
    img.gt = scenes[i].gt;
    if (overseg_tiles > 0) img.overseg = tile_oversegmentation(scenes[i].gt, overseg_tiles);
    out.push_back(std::move(img));
  }
  return out;
}

ImageSegments segment_image(const ToyEmbedder& model, const TrainingImage& image,
                            std::uint32_t image_id, const TrainConfig& cfg, TrainMode mode,
                            bool label_prototypes) {
  EmbeddingMap emb = model.embed(image.features);
  const LabelMap* gt = image.gt ? &*image.gt : nullptr;
  if (gt != nullptr && (gt->height != emb.height() || gt->width != emb.width())) {
    throw ShapeMismatch("ground truth shape differs from image " + image.name);
  }

  if (mode == TrainMode::kUnsupervised) {
    if (!image.overseg) {
      throw MissingPrerequisite("unsupervised training needs an oversegmentation for " +
                                image.name);
    }
    const Segmentation& seg = *image.overseg;
    if (seg.height() != emb.height() || seg.width() != emb.width()) {
      throw ShapeMismatch("oversegmentation shape differs from image " + image.name);
    }
    auto protos = prototypes(emb, seg, label_prototypes ? gt : nullptr, image_id);
    return {std::move(emb), seg, std::move(protos), std::vector<std::uint8_t>(seg.pixels(), 0)};
  }

  if (gt == nullptr) {
    throw MissingPrerequisite("supervised training needs ground truth for " + image.name);
  }
  const Segmentation kmeans = spherical_kmeans(emb, cfg);
  AlignedSegmentation aligned = align(kmeans, *gt, cfg.split_components);
  auto protos = prototypes(emb, aligned.segmentation, gt, image_id);
  return {std::move(emb), std::move(aligned.segmentation), std::move(protos),
          std::move(aligned.ignored)};
}

StepResult train_step(ToyEmbedder& model, const std::vector<BatchItem>& batch,
                      PrototypeBank& bank, const TrainConfig& cfg, TrainMode mode) {
  if (batch.empty()) throw Error("train_step: empty batch");

  std::vector<std::optional<ImageSegments>> segmented(batch.size());
  for_each_index(batch.size(), cfg.serial, [&](std::size_t b) {
    segmented[b] = segment_image(model, *batch[b].image, batch[b].image_id, cfg, mode);
  });

  // Prototype order: every image of this batch, then the bank (oldest first).
  LossBatch loss_batch;
  loss_batch.kappa = cfg.kappa;
  loss_batch.prototypes = VectorSet(model.embed_dim());
  loss_batch.embeddings = VectorSet(model.embed_dim());
  std::vector<Prototype> batch_protos;
  std::vector<std::size_t> offsets;
  for (const auto& s : segmented) {
    offsets.push_back(batch_protos.size());
    batch_protos.insert(batch_protos.end(), s->prototypes.begin(), s->prototypes.end());
  }
  const auto banked = bank.snapshot();
  for (const std::vector<Prototype>* list : std::array<const std::vector<Prototype>*, 2>{&batch_protos, &banked}) {
    for (const auto& p : *list) {
      loss_batch.prototypes.push_back(p.vector);
      loss_batch.prototype_labels.push_back(mode == TrainMode::kSupervised ? p.label
                                                                           : std::nullopt);
    }
  }

  std::vector<std::size_t> first_row;
  for (std::size_t b = 0; b < segmented.size(); ++b) {
    const auto& s = *segmented[b];
    first_row.push_back(loss_batch.own.size());
    for (std::size_t i = 0; i < s.segmentation.pixels(); ++i) {
      if (s.excluded[i]) continue;
      loss_batch.embeddings.push_back(s.embedding.pixel(i));
      loss_batch.own.push_back(offsets[b] + s.segmentation[i]);
    }
  }

  const LossOutput loss =
      mode == TrainMode::kSupervised ? vmfn_loss(loss_batch) : vmf_loss(loss_batch);

  std::vector<double> grad(model.parameters().size(), 0.0);
  for (std::size_t b = 0; b < segmented.size(); ++b) {
    const auto& s = *segmented[b];
    VectorSet pixel_grad(model.embed_dim(),
                         std::vector<double>(s.segmentation.pixels() * model.embed_dim(), 0.0));
    std::size_t row = first_row[b];
    for (std::size_t i = 0; i < s.segmentation.pixels(); ++i) {
      if (s.excluded[i]) continue;
      const auto g = loss.grad[row++];
      std::copy(g.begin(), g.end(), pixel_grad.row(i).begin());
    }
    model.accumulate_gradient(batch[b].image->features, pixel_grad, grad);
  }
  model.sgd_step(grad, cfg.learning_rate);

  StepResult result;
  result.loss = loss.loss;
  result.pixels = loss_batch.own.size();
  result.batch_prototypes = batch_protos.size();
  result.bank_prototypes = banked.size();
  result.fallback_pixels = loss.fallback_pixels;
  bank.push(std::move(batch_protos));
  return result;
}

PrototypeStore build_store(const ToyEmbedder& model, const std::vector<TrainingImage>& dataset,
                           const TrainConfig& cfg, TrainMode mode) {
  std::vector<std::vector<Prototype>> per_image(dataset.size());
  for_each_index(dataset.size(), cfg.serial, [&](std::size_t i) {
    per_image[i] =
        segment_image(model, dataset[i], static_cast<std::uint32_t>(i), cfg, mode, true)
            .prototypes;
  });
  std::vector<Prototype> all;
  for (auto& list : per_image) {
    for (auto& p : list) all.push_back(std::move(p));
  }
  return PrototypeStore(std::move(all));
}

FitResult fit(const std::vector<TrainingImage>& dataset, const TrainConfig& cfg,
              TrainMode mode, const StepCallback& on_step) {
  cfg.validate();
  if (dataset.empty()) throw Error("fit: empty dataset");
  ToyEmbedder model(dataset.front().features.dim, cfg.embedding_dim, cfg.hidden_units, cfg.seed);
  PrototypeBank bank(cfg.bank_depth);
  std::vector<StepResult> steps;
  const std::size_t per_batch = std::min(cfg.batch_size, dataset.size());
  for (std::size_t step = 0; step < cfg.iterations; ++step) {
    std::vector<BatchItem> batch;
    for (std::size_t j = 0; j < per_batch; ++j) {
      const std::size_t idx = (step * per_batch + j) % dataset.size();
      batch.push_back({&dataset[idx], static_cast<std::uint32_t>(idx)});
    }
    steps.push_back(train_step(model, batch, bank, cfg, mode));
    if (on_step) on_step(step, steps.back());
  }
  PrototypeStore store = build_store(model, dataset, cfg, mode);
  return {std::move(model), std::move(store), std::move(steps)};
}

}  // namespace segsort
