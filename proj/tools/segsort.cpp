// SPDX-License-Identifier: Apache-2.0
//
// segsort command-line tool.
//
// Exit codes: 0 success, 2 malformed input, 3 invalid configuration,
// 4 missing mode prerequisite (e.g. oversegmentations for --unsupervised).
// Every record printed to stdout is one line of space-separated key=value
// pairs.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "segsort/config.hpp"
#include "segsort/eval.hpp"
#include "segsort/io.hpp"
#include "segsort/pixel_sort.hpp"
#include "segsort/retrieval.hpp"
#include "segsort/synthetic.hpp"
#include "segsort/trainer.hpp"

namespace fs = std::filesystem;
using namespace segsort;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMalformed = 2;
constexpr int kExitConfig = 3;
constexpr int kExitPrerequisite = 4;

// Config keys exposed as --dashed-name flags; `serial` is a plain flag.
const std::vector<std::string> kConfigKeys = {
    "num_clusters", "embedding_dim", "kappa", "em_iters", "coord_weight",
    "bank_depth",   "knn",           "learning_rate", "iterations", "batch_size",
    "seed",         "hidden_units",  "split_components"};

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  bool serial = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key=value config file; flags override it");
    for (const auto& key : kConfigKeys) {
      std::string flag = key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      options[key] = cmd->add_option("--" + flag, values[key]);
    }
    cmd->add_flag("--serial", serial, "single-threaded, reproducible execution");
  }

  TrainConfig resolve() const {
    TrainConfig cfg;
    if (!file.empty()) load_config(cfg, file);
    for (const auto& key : kConfigKeys) {
      if (options.at(key)->count() > 0) apply_config_entry(cfg, key, values.at(key));
    }
    if (serial) cfg.serial = true;
    cfg.validate();
    return cfg;
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Files with `ext` directly under `dir`, sorted by name.
std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw FormatError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void check_shape(const std::string& what, std::size_t h, std::size_t w, std::size_t eh,
                 std::size_t ew) {
  if (h != eh || w != ew) {
    throw ShapeMismatch(what + " is " + std::to_string(h) + "x" + std::to_string(w) +
                        ", expected " + std::to_string(eh) + "x" + std::to_string(ew));
  }
}

// ---------------------------------------------------------------------------
// pixelsort

struct PixelsortArgs {
  std::string input;
  std::string output;
};

void run_pixelsort(const PixelsortArgs& args, const TrainConfig& cfg) {
  const auto file = io::load_emb(args.input);
  const auto emb = normalize_map(file.grid);
  const auto result = spherical_kmeans_detailed(emb, cfg);
  io::save_map(args.output, io::to_map_file(result.segmentation));
  std::cout << "segments=" << result.segmentation.num_segments()
            << " objective=" << fmt(result.objective.empty() ? 0.0 : result.objective.back())
            << " rounds=" << result.rounds << " renormalized=" << file.renormalized << '\n';
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string dataset;
  std::string synthetic;
  bool supervised = false;
  bool unsupervised = false;
  std::string overseg_dir;
  std::string out;
};

std::vector<TrainingImage> load_dataset(const fs::path& root, TrainMode mode,
                                        const std::string& overseg_dir) {
  if (mode == TrainMode::kUnsupervised && overseg_dir.empty()) {
    throw MissingPrerequisite("--unsupervised needs --overseg-dir");
  }
  std::vector<TrainingImage> out;
  for (const auto& path : list_files(root / "images", ".emb")) {
    TrainingImage img;
    img.name = path.stem().string();
    img.features = io::load_emb(path).grid;
    const fs::path gt_path = root / "gt" / (img.name + ".map");
    if (!fs::exists(gt_path)) throw FormatError("missing ground truth " + gt_path.string());
    img.gt = io::to_label_map(io::load_map(gt_path));
    check_shape(gt_path.string(), img.gt->height, img.gt->width, img.features.height,
                img.features.width);
    if (mode == TrainMode::kUnsupervised) {
      const fs::path seg_path = fs::path(overseg_dir) / (img.name + ".map");
      if (!fs::exists(seg_path)) {
        throw MissingPrerequisite("missing oversegmentation " + seg_path.string());
      }
      img.overseg = io::to_segmentation(io::load_map(seg_path));
      check_shape(seg_path.string(), img.overseg->height(), img.overseg->width(),
                  img.features.height, img.features.width);
    }
    out.push_back(std::move(img));
  }
  if (out.empty()) throw FormatError("no .emb files under " + (root / "images").string());
  return out;
}

void run_train(const TrainArgs& args, const TrainConfig& cfg) {
  if (args.supervised == args.unsupervised) {
    throw ConfigError("choose exactly one of --supervised / --unsupervised");
  }
  if (args.dataset.empty() == args.synthetic.empty()) {
    throw ConfigError("give either a dataset directory or --synthetic");
  }
  const TrainMode mode = args.supervised ? TrainMode::kSupervised : TrainMode::kUnsupervised;

  std::vector<TrainingImage> dataset;
  if (!args.synthetic.empty()) {
    const auto spec = parse_synthetic_spec(args.synthetic);
    const auto scenes = make_dataset(spec.images, spec.classes, spec.size, spec.seed);
    // Synthetic scenes come with their tile oversegmentation.
    dataset = to_training_images(
        scenes, mode == TrainMode::kUnsupervised ? cfg.num_clusters : std::size_t{0});
  } else {
    dataset = load_dataset(args.dataset, mode, args.overseg_dir);
  }

  const auto result = fit(dataset, cfg, mode, [](std::size_t step, const StepResult& s) {
    std::cout << "step=" << step << " loss=" << fmt(s.loss, 9) << " pixels=" << s.pixels
              << " batch_prototypes=" << s.batch_prototypes
              << " bank_prototypes=" << s.bank_prototypes
              << " fallback_pixels=" << s.fallback_pixels << '\n';
  });

  const fs::path out(args.out);
  ensure_dir(out);
  io::save_checkpoint(out / "model.ckpt", result.model);
  io::save_store(out / "store.sgps", result.store);
  std::ofstream(out / "config.txt") << format_config(cfg);
  std::cout << "images=" << dataset.size() << " store_prototypes=" << result.store.size()
            << " checkpoint=" << (out / "model.ckpt").string()
            << " store=" << (out / "store.sgps").string() << '\n';
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  std::string checkpoint;
  std::string store;
  std::vector<std::string> inputs;
  std::string out;
};

void run_infer(const InferArgs& args, const TrainConfig& cfg) {
  const auto model = io::load_checkpoint(args.checkpoint);
  const auto store = io::load_store(args.store);
  if (store.empty() || !store.all_labeled()) {
    throw UnlabeledStore("inference needs a non-empty, fully labeled store");
  }
  if (store.dim() != model.embed_dim()) {
    throw ShapeMismatch("store dim " + std::to_string(store.dim()) + " != embedder dim " +
                        std::to_string(model.embed_dim()));
  }
  std::vector<fs::path> images;
  for (const auto& in : args.inputs) {
    if (fs::is_directory(in)) {
      for (auto& p : list_files(in, ".emb")) images.push_back(std::move(p));
    } else {
      images.emplace_back(in);
    }
  }
  if (images.empty()) throw FormatError("no input images");

  const fs::path out(args.out);
  ensure_dir(out);
  for (const auto& path : images) {
    const auto grid = io::load_emb(path).grid;
    if (grid.dim != model.input_dim()) {
      throw ShapeMismatch(path.string() + " has feature dim " + std::to_string(grid.dim) +
                          ", checkpoint expects " + std::to_string(model.input_dim()));
    }
    const auto result = infer_detailed(model, grid, store, cfg);
    const std::string stem = path.stem().string();
    io::save_map(out / (stem + ".map"), io::to_map_file(result.labels));

    std::ofstream report(out / (stem + ".neighbors.txt"));
    for (const auto& seg : result.segments) {
      for (std::size_t r = 0; r < seg.neighbors.size(); ++r) {
        const auto& n = seg.neighbors[r];
        const auto& p = store[n.index];
        report << "segment=" << seg.segment_id << " predicted=" << seg.label << " rank=" << r
               << " image_id=" << p.image_id << " segment_id=" << p.segment_id
               << " label=" << *p.label << " cosine=" << fmt(n.cosine, 9) << '\n';
      }
    }
    if (!report) throw FormatError("cannot write neighbor report for " + stem);
    std::cout << "image=" << stem << " segments=" << result.segmentation.num_segments() << '\n';
  }
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string pred_dir;
  std::string gt_dir;
  std::size_t num_classes = 0;
  double boundary = 0.01;
};

void run_eval(const EvalArgs& args) {
  const auto preds = list_files(args.pred_dir, ".map");
  const auto gts = list_files(args.gt_dir, ".map");
  auto stems = [](const std::vector<fs::path>& paths) {
    std::vector<std::string> out;
    for (const auto& p : paths) out.push_back(p.stem().string());
    return out;
  };
  const auto pred_names = stems(preds);
  const auto gt_names = stems(gts);
  for (const auto& name : pred_names) {
    if (!std::binary_search(gt_names.begin(), gt_names.end(), name)) {
      throw FormatError("no ground truth for prediction " + name);
    }
  }
  for (const auto& name : gt_names) {
    if (!std::binary_search(pred_names.begin(), pred_names.end(), name)) {
      throw FormatError("no prediction for ground truth " + name);
    }
  }
  if (gts.empty()) throw FormatError("no .map files under " + args.gt_dir);

  ConfusionMatrix cm(args.num_classes);
  std::vector<BoundaryScore> boundaries;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const auto pred = io::to_label_map(io::load_map(preds[i]));
    const auto gt = io::to_label_map(io::load_map(gts[i]));
    cm.add(pred, gt);
    boundaries.push_back(boundary_f(pred, gt, args.num_classes, args.boundary));
  }
  const auto iou = miou(cm);
  const auto bf = merge_boundary(boundaries);
  for (std::size_t c = 0; c < args.num_classes; ++c) {
    const auto& b = bf.per_class[c];
    std::cout << "class=" << c << " iou=" << (iou.per_class[c] ? fmt(*iou.per_class[c]) : "absent")
              << " boundary_precision=" << fmt(b.precision) << " boundary_recall=" << fmt(b.recall)
              << " boundary_f=" << fmt(b.f) << '\n';
  }
  std::cout << "summary images=" << gts.size() << " pixels=" << cm.total()
            << " miou=" << fmt(iou.mean) << " mean_f=" << fmt(bf.mean_f)
            << " tolerance=" << fmt(args.boundary) << '\n';
}

// ---------------------------------------------------------------------------
// discover

struct DiscoverArgs {
  std::string store;
  std::size_t levels = 0;
  unsigned background = kBackgroundClass;
};

void run_discover(const DiscoverArgs& args) {
  const auto store = io::load_store(args.store);
  // Background-labeled prototypes are left out when labels are present.
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& label = store[i].label;
    if (label && *label == args.background) continue;
    kept.push_back(i);
  }
  std::cout << "prototypes=" << store.size() << " clustered=" << kept.size() << '\n';
  if (kept.empty()) {
    std::cout << "counts=\n";
    return;
  }
  VectorSet points(store.dim());
  for (auto i : kept) points.push_back(store.vectors()[i]);
  const auto hierarchy = finch(points);

  const std::size_t shown =
      args.levels == 0 ? hierarchy.levels.size() : std::min(args.levels, hierarchy.levels.size());
  for (std::size_t l = 0; l < shown; ++l) {
    std::cout << "level=" << l << " clusters=" << hierarchy.counts[l] << '\n';
    for (std::size_t j = 0; j < kept.size(); ++j) {
      const auto& p = store[kept[j]];
      std::cout << "level=" << l << " image_id=" << p.image_id << " segment_id=" << p.segment_id
                << " label=" << (p.label ? std::to_string(*p.label) : "none")
                << " cluster=" << hierarchy.levels[l][j] << '\n';
    }
  }
  std::cout << "counts=";
  for (std::size_t l = 0; l < hierarchy.counts.size(); ++l) {
    std::cout << (l ? "," : "") << hierarchy.counts[l];
  }
  std::cout << '\n';
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string synthetic;
  std::string out;
};

void write_split(const fs::path& dir, const std::vector<SyntheticScene>& scenes,
                 std::size_t first_index, std::size_t tiles) {
  ensure_dir(dir / "images");
  ensure_dir(dir / "gt");
  ensure_dir(dir / "overseg");
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string name = "scene_" + std::to_string(first_index + i);
    io::save_emb(dir / "images" / (name + ".emb"), scenes[i].image, true);
    io::save_map(dir / "gt" / (name + ".map"), io::to_map_file(scenes[i].gt));
    io::save_map(dir / "overseg" / (name + ".map"),
                 io::to_map_file(tile_oversegmentation(scenes[i].gt, tiles)));
  }
}

void run_synth(const SynthArgs& args, const TrainConfig& cfg) {
  const auto spec = parse_synthetic_spec(args.synthetic);
  const fs::path out(args.out);
  const auto train = make_dataset(spec.images, spec.classes, spec.size, spec.seed);
  const auto test = make_dataset(spec.holdout, spec.classes, spec.size, spec.seed, spec.images);
  write_split(out / "train", train, 0, cfg.num_clusters);
  write_split(out / "test", test, spec.images, cfg.num_clusters);
  std::cout << "train=" << train.size() << " test=" << test.size() << " classes=" << spec.classes
            << " size=" << spec.size << " seed=" << spec.seed << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segment sorting: metric-learning segmentation with prototype retrieval"};
  app.require_subcommand(1);

  ConfigOptions pixelsort_cfg, train_cfg, infer_cfg, synth_cfg;
  PixelsortArgs pixelsort_args;
  TrainArgs train_args;
  InferArgs infer_args;
  EvalArgs eval_args;
  DiscoverArgs discover_args;
  SynthArgs synth_args;
  std::uint64_t unused_seed = 0;
  bool unused_serial = false;

  auto* pixelsort = app.add_subcommand("pixelsort", "spherical K-Means over one embedding file");
  pixelsort->add_option("embedding", pixelsort_args.input, "input .emb file")->required();
  pixelsort->add_option("-o,--output", pixelsort_args.output, "output segment map")->required();
  pixelsort_cfg.attach(pixelsort);

  auto* train = app.add_subcommand("train", "train the embedder and build a prototype store");
  train->add_option("dataset", train_args.dataset, "directory with images/ and gt/");
  train->add_option("--synthetic", train_args.synthetic,
                    "classes=4,images=20,size=64,seed=7 style scene generator settings");
  train->add_flag("--supervised", train_args.supervised);
  train->add_flag("--unsupervised", train_args.unsupervised);
  train->add_option("--overseg-dir", train_args.overseg_dir,
                    "per-image oversegmentation maps for --unsupervised");
  train->add_option("-o,--out", train_args.out, "output directory")->required();
  train_cfg.attach(train);

  auto* infer = app.add_subcommand("infer", "label images by prototype retrieval");
  infer->add_option("--checkpoint", infer_args.checkpoint)->required();
  infer->add_option("--store", infer_args.store)->required();
  infer->add_option("images", infer_args.inputs, ".emb files or directories")->required();
  infer->add_option("-o,--out", infer_args.out, "output directory")->required();
  infer_cfg.attach(infer);

  auto* eval = app.add_subcommand("eval", "score predicted label maps");
  eval->add_option("predictions", eval_args.pred_dir)->required();
  eval->add_option("ground_truth", eval_args.gt_dir)->required();
  eval->add_option("--num-classes", eval_args.num_classes)->required();
  eval->add_option("--boundary", eval_args.boundary, "tolerance as a fraction of the diagonal")
      ->capture_default_str();
  eval->add_option("--seed", unused_seed, "accepted for uniformity; eval is deterministic");
  eval->add_flag("--serial", unused_serial);

  auto* discover = app.add_subcommand("discover", "FINCH hierarchy over a prototype store");
  discover->add_option("store", discover_args.store)->required();
  discover->add_option("--levels", discover_args.levels, "print at most this many levels (0 = all)");
  discover->add_option("--background", discover_args.background, "class left out when labeled")
      ->capture_default_str();
  discover->add_option("--seed", unused_seed, "accepted for uniformity; discover is deterministic");
  discover->add_flag("--serial", unused_serial);

  auto* synth = app.add_subcommand("synth", "write synthetic train/test scenes to disk");
  synth->add_option("--synthetic", synth_args.synthetic)->required();
  synth->add_option("-o,--out", synth_args.out)->required();
  synth_cfg.attach(synth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*pixelsort) run_pixelsort(pixelsort_args, pixelsort_cfg.resolve());
    else if (*train) run_train(train_args, train_cfg.resolve());
    else if (*infer) run_infer(infer_args, infer_cfg.resolve());
    else if (*eval) run_eval(eval_args);
    else if (*discover) run_discover(discover_args);
    else if (*synth) run_synth(synth_args, synth_cfg.resolve());
  } catch (const MissingPrerequisite& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitPrerequisite;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const TooManyClusters& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMalformed;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMalformed;
  }
  return kExitOk;
}
