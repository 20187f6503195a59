// SPDX-License-Identifier: Apache-2.0
//
// Drives the segsort binary end to end through std::system.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "segsort/io.hpp"
#include "segsort/synthetic.hpp"
#include "support.hpp"

#ifndef SEGSORT_CLI
#error "SEGSORT_CLI must point at the segsort executable"
#endif

namespace segsort {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("segsort_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args) const {
    const auto log = dir_ / "stdout.txt";
    const std::string cmd = std::string(SEGSORT_CLI) + " " + args + " > " + log.string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write_unit_emb(const std::string& name, std::size_t h, std::size_t w, std::uint64_t seed) {
    testing::Rng rng(seed);
    const auto map = testing::random_map(rng, h, w, 4);
    FeatureGrid g(h, w, 4);
    g.values = map.data();
    io::save_emb(path(name), g, false);
  }

  fs::path dir_;
};

TEST_F(Cli, PixelsortWritesAtMostKSegments) {
  write_unit_emb("a.emb", 12, 10, 1);
  const auto r = run("pixelsort " + path("a.emb") + " -o " + path("a.map"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("segments="), std::string::npos);
  EXPECT_NE(r.out.find("objective="), std::string::npos);
  const auto m = io::load_map(path("a.map"));
  EXPECT_LE(std::set<std::uint16_t>(m.values.begin(), m.values.end()).size(), 25u);
}

TEST_F(Cli, PixelsortTooManyClustersIsConfigError) {
  write_unit_emb("a.emb", 3, 3, 2);
  EXPECT_EQ(run("pixelsort " + path("a.emb") + " -o " + path("a.map") + " --num-clusters 10").code,
            3);
}

TEST_F(Cli, TruncatedEmbeddingIsMalformed) {
  write_unit_emb("a.emb", 4, 4, 3);
  fs::resize_file(path("a.emb"), fs::file_size(path("a.emb")) - 3);
  EXPECT_EQ(run("pixelsort " + path("a.emb") + " -o " + path("a.map")).code, 2);
}

TEST_F(Cli, InvalidConfigValuesExitThree) {
  write_unit_emb("a.emb", 4, 4, 3);
  EXPECT_EQ(run("pixelsort " + path("a.emb") + " -o " + path("a.map") + " --knn 4").code, 3);
  std::ofstream(path("bad.cfg")) << "kappa=-1\n";
  EXPECT_EQ(run("pixelsort " + path("a.emb") + " -o " + path("a.map") + " --config " + path("bad.cfg"))
                .code,
            3);
  EXPECT_EQ(run("pixelsort --no-such-flag").code, 3);
}

TEST_F(Cli, UnsupervisedWithoutOversegmentationExitsFour) {
  ASSERT_EQ(run("synth --synthetic classes=3,images=2,size=24,seed=1,holdout=1 -o " + path("data"))
                .code,
            0);
  const std::string train = path("data") + "/train";
  EXPECT_EQ(run("train " + train + " --unsupervised --iterations 1 -o " + path("out")).code, 4);
  fs::remove(train + "/overseg/scene_1.map");
  EXPECT_EQ(run("train " + train + " --unsupervised --overseg-dir " + train +
                "/overseg --iterations 1 -o " + path("out"))
                .code,
            4);
}

TEST_F(Cli, SerialTrainingIsByteIdentical) {
  const std::string args =
      "train --synthetic classes=3,images=4,size=24,seed=5 --supervised --iterations 4 "
      "--num-clusters 9 --embedding-dim 8 --serial -o ";
  ASSERT_EQ(run(args + path("a")).code, 0);
  ASSERT_EQ(run(args + path("b")).code, 0);
  for (const char* f : {"model.ckpt", "store.sgps", "config.txt"}) {
    std::ifstream a(path("a") + "/" + f, std::ios::binary), b(path("b") + "/" + f, std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    EXPECT_FALSE(sa.str().empty()) << f;
    EXPECT_EQ(sa.str(), sb.str()) << f;
  }
}

TEST_F(Cli, SinglePrototypeStorePaintsWholeImage) {
  io::save_checkpoint(path("m.ckpt"), ToyEmbedder(4, 3, 0, 1));
  Prototype p;
  p.vector = {0.0, 1.0, 0.0};
  p.label = ClassId{2};
  p.pixel_count = 1;
  io::save_store(path("s.sgps"), PrototypeStore({p}));
  write_unit_emb("img.emb", 6, 6, 4);
  const auto r = run("infer --checkpoint " + path("m.ckpt") + " --store " + path("s.sgps") + " " +
                     path("img.emb") + " -o " + path("pred") + " --num-clusters 4");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto m = io::load_map(path("pred") + "/img.map");
  EXPECT_EQ(m.values, std::vector<std::uint16_t>(36, 2));
  std::ifstream report(path("pred") + "/img.neighbors.txt");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(report, line)) {
    EXPECT_NE(line.find("predicted=2"), std::string::npos);
    ++rows;
  }
  EXPECT_GE(rows, 1u);
}

TEST_F(Cli, NeighborReportIsSortedByCosine) {
  ASSERT_EQ(run("train --synthetic classes=3,images=3,size=24,seed=2 --supervised --iterations 2 "
                "--num-clusters 9 --embedding-dim 8 --serial -o " + path("model"))
                .code,
            0);
  ASSERT_EQ(run("synth --synthetic classes=3,images=3,size=24,seed=2,holdout=1 --num-clusters 9 -o " +
                path("data"))
                .code,
            0);
  const auto r = run("infer --checkpoint " + path("model") + "/model.ckpt --store " + path("model") +
                     "/store.sgps " + path("data") + "/test/images -o " + path("pred") +
                     " --num-clusters 9 --knn 5");
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream report(path("pred") + "/scene_3.neighbors.txt");
  std::string line;
  long last_segment = -1;
  double last_cos = 2.0;
  std::size_t rows = 0;
  while (std::getline(report, line)) {
    long segment = 0;
    double cosine = 0.0;
    ASSERT_EQ(std::sscanf(line.c_str(), "segment=%ld", &segment), 1);
    cosine = std::stod(line.substr(line.find("cosine=") + 7));
    if (segment != last_segment) last_cos = 2.0;
    EXPECT_LE(cosine, last_cos) << line;
    last_cos = cosine;
    last_segment = segment;
    ++rows;
  }
  EXPECT_GT(rows, 0u);
}

TEST_F(Cli, EvalOfIdenticalDirectoriesIsPerfect) {
  ASSERT_EQ(run("synth --synthetic classes=4,images=3,size=32,seed=3,holdout=1 -o " + path("d")).code,
            0);
  const std::string gt = path("d") + "/train/gt";
  const auto r = run("eval " + gt + " " + gt + " --num-classes 4");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("miou=1.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("mean_f=1.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("tolerance=0.01"), std::string::npos) << r.out;
}

TEST_F(Cli, EvalWithMissingGroundTruthIsMalformed) {
  ASSERT_EQ(run("synth --synthetic classes=3,images=2,size=24,seed=3,holdout=1 -o " + path("d")).code,
            0);
  fs::copy(path("d") + "/train/gt", path("gt"));
  fs::remove(path("gt") + "/scene_1.map");
  EXPECT_EQ(run("eval " + path("d") + "/train/gt " + path("gt") + " --num-classes 3").code, 2);
}

Prototype labeled(std::vector<double> v, std::uint32_t segment, ClassId label) {
  Prototype p;
  p.vector = std::move(v);
  p.segment_id = segment;
  p.label = label;
  p.pixel_count = 1;
  return p;
}

TEST_F(Cli, DiscoverTwoPrototypesGivesOneLevel) {
  io::save_store(path("s.sgps"), PrototypeStore({labeled({1, 0}, 0, 1), labeled({0, 1}, 1, 2)}));
  const auto r = run("discover " + path("s.sgps"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("counts=1\n"), std::string::npos) << r.out;
}

TEST_F(Cli, DiscoverLeavesOutBackground) {
  io::save_store(path("s.sgps"),
                 PrototypeStore({labeled({1, 0}, 0, 0), labeled({0, 1}, 1, 1), labeled({0.6, 0.8}, 2, 1),
                                 labeled({-1, 0}, 3, 0)}));
  const auto r = run("discover " + path("s.sgps") + " --background 0");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("prototypes=4 clustered=2"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("label=0"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("counts=1\n"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace segsort
