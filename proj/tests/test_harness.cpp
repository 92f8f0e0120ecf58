#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mogb;
using mogb::testing::vec;

namespace {

Dataset classes_dataset(int n_classes, std::size_t per_class) {
  Dataset ds;
  ds.dim = 2;
  ds.num_known = n_classes;
  for (int c = 1; c <= n_classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) ds.samples.push_back({vec({double(c), double(i)}), c});
  return ds;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  SyntheticSpec spec;
  spec.per_class = 60;
  spec.spacing = 4.5;
  spec.intra_open = 30;
  spec.inter_open = 30;
  cfg.synthetic = spec;
  cfg.known_class_ratio = 1.0;
  cfg.hp.metric = Metric::euclidean;
  cfg.hp.D = 8;
  cfg.hp.epochs = 2;
  cfg.hp.learning_rate = 0.05;
  cfg.seeds = {1, 2};
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(SplitOpen, TwentyClassesAtQuarterGiveFiveKnown) {
  const auto ds = classes_dataset(20, 30);
  const auto r = split_open(ds, 0.25, 7);
  EXPECT_EQ(r.known_original.size(), 5u);
  EXPECT_EQ(r.train.num_known, 5);
  for (const auto* d : {&r.train, &r.valid})
    for (const auto& s : d->samples) EXPECT_LE(s.label, 5);
  std::set<int> test_labels;
  for (const auto& s : r.test.samples) test_labels.insert(s.label);
  EXPECT_EQ(test_labels, (std::set<int>{1, 2, 3, 4, 5, 6}));
  for (const auto& [orig, dense] : r.remap) {
    const bool known = std::count(r.known_original.begin(), r.known_original.end(), orig) > 0;
    EXPECT_EQ(dense <= 5, known);
  }
  // Valid is 10% of each known class's non-test remainder.
  EXPECT_EQ(r.valid.size(), 5u * 2u);
  EXPECT_EQ(r.train.size() + r.valid.size() + 5u * 9u, 5u * 30u);
}

TEST(SplitOpen, RatioOneWithoutOpenSamplesIsAnError) {
  EXPECT_THROW(split_open(classes_dataset(4, 10), 1.0, 1), std::invalid_argument);
  EXPECT_THROW(split_open(classes_dataset(4, 10), 0.0, 1), std::invalid_argument);
  EXPECT_THROW(split_open(classes_dataset(1, 10), 0.5, 1), std::invalid_argument);
}

TEST(SplitOpen, PrelabelledOpenSamplesGoToTest) {
  SyntheticSpec spec;
  spec.per_class = 50;
  spec.intra_open = 20;
  spec.inter_open = 10;
  const auto ds = gen_synthetic(spec, 1);
  const auto r = split_open(ds, 1.0, 1);
  EXPECT_EQ(r.train.num_known, 3);
  EXPECT_TRUE(r.train.known_only());
  EXPECT_TRUE(r.valid.known_only());
  const auto unknown = std::count_if(r.test.samples.begin(), r.test.samples.end(),
                                     [](const LabeledVector& s) { return s.label == 4; });
  EXPECT_EQ(unknown, 30);
}

TEST(SplitOpen, SameSeedSameSplit) {
  const auto ds = classes_dataset(8, 20);
  const auto a = split_open(ds, 0.5, 3);
  const auto b = split_open(ds, 0.5, 3);
  EXPECT_EQ(encode_gbem(a.train), encode_gbem(b.train));
  EXPECT_EQ(encode_gbem(a.test), encode_gbem(b.test));
  EXPECT_EQ(a.remap, b.remap);
  const auto c = split_open(ds, 0.5, 4);
  EXPECT_NE(a.known_original, c.known_original);
}

TEST(Synthetic, RingHoleIsClearOfTheRing) {
  SyntheticSpec spec;
  spec.num_classes = 1;
  spec.per_class = 500;
  spec.intra_open = 100;
  spec.inter_open = 0;
  const auto ds = gen_synthetic(spec, 5);
  std::vector<Vector> ring, hole;
  for (const auto& s : ds.samples) (s.label == 1 ? ring : hole).push_back(s.features);
  ASSERT_EQ(ring.size(), 500u);
  ASSERT_EQ(hole.size(), 100u);
  double closest = 1e300;
  for (const auto& r : ring) {
    EXPECT_GE(r.norm(), 2.0);
    EXPECT_LE(r.norm(), 3.0);
    for (const auto& h : hole) closest = std::min(closest, (r - h).norm());
  }
  for (const auto& h : hole) EXPECT_LE(h.norm(), 0.8);
  EXPECT_GE(closest, 2.0 - 0.8);
}

TEST(Synthetic, MixtureHasSixModesAndBalancedLabels) {
  SyntheticSpec spec;
  spec.family = "gaussian_mixture";
  spec.per_class = 101;
  spec.blob_std = 0.1;
  spec.intra_open = 0;
  spec.inter_open = 0;
  const auto ds = gen_synthetic(spec, 2);
  std::map<int, std::size_t> counts;
  for (const auto& s : ds.samples) ++counts[s.label];
  ASSERT_EQ(counts.size(), 3u);
  for (const auto& [c, n] : counts) EXPECT_EQ(n, 101u);
  // Points alternate between a class's two blobs; their means sit 0.6 apart.
  std::vector<Vector> modes;
  for (int c = 1; c <= 3; ++c) {
    Vector sum[2] = {Vector::Zero(2), Vector::Zero(2)};
    std::size_t n[2] = {0, 0}, i = 0;
    for (const auto& s : ds.samples)
      if (s.label == c) sum[i % 2] += s.features, ++n[i++ % 2];
    for (int b = 0; b < 2; ++b) modes.push_back(sum[b] / static_cast<double>(n[b]));
    EXPECT_NEAR((modes[modes.size() - 1] - modes[modes.size() - 2]).norm(), 0.6, 0.05);
  }
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t j = i + 1; j < modes.size(); ++j) EXPECT_GT((modes[i] - modes[j]).norm(), 0.3);
}

TEST(Synthetic, DeterministicAndFamiliesValidated) {
  SyntheticSpec spec;
  spec.family = "crescent";
  spec.lift = "rff";
  spec.per_class = 50;
  mogb::testing::TempDir dir("synth");
  save_embeddings(gen_synthetic(spec, 11), (dir / "a.gbem").string());
  save_embeddings(gen_synthetic(spec, 11), (dir / "b.gbem").string());
  EXPECT_EQ(slurp(dir / "a.gbem"), slurp(dir / "b.gbem"));
  EXPECT_NE(encode_gbem(gen_synthetic(spec, 11)), encode_gbem(gen_synthetic(spec, 12)));
  EXPECT_EQ(gen_synthetic(spec, 11).dim, 64u);
  spec.family = "spiral";
  EXPECT_THROW(gen_synthetic(spec, 1), std::invalid_argument);
}

TEST(Synthetic, SpecJsonRoundTrip) {
  SyntheticSpec spec;
  spec.family = "crescent";
  spec.spacing = 4.25;
  spec.lift = "rff";
  const auto back = synthetic_spec_from_json(to_json(spec));
  EXPECT_EQ(to_json(back), to_json(spec));
}

TEST(Ablation, NamesAndComponents) {
  for (auto a : {Ablation::full, Ablation::no_hrl, Ablation::no_mb, Ablation::no_hrl_no_mb})
    EXPECT_EQ(parse_ablation(to_string(a)), a);
  EXPECT_TRUE(uses_hrl(Ablation::full) && uses_mb(Ablation::full));
  EXPECT_TRUE(!uses_hrl(Ablation::no_hrl) && uses_mb(Ablation::no_hrl));
  EXPECT_TRUE(uses_hrl(Ablation::no_mb) && !uses_mb(Ablation::no_mb));
  EXPECT_TRUE(!uses_hrl(Ablation::no_hrl_no_mb) && !uses_mb(Ablation::no_hrl_no_mb));
  EXPECT_THROW(parse_ablation("none"), std::invalid_argument);
}

TEST(Config, JsonOverlayKeepsUnmentionedDefaults) {
  ExperimentConfig cfg;
  apply_json(cfg, nlohmann::json::parse(R"({"hyper": {"p_t": 0.9}, "seeds": [4, 5], "ablations": ["no_mb"]})"));
  EXPECT_DOUBLE_EQ(cfg.hp.p_t, 0.9);
  EXPECT_EQ(cfg.hp.n_t, 3u);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 5}));
  EXPECT_EQ(cfg.ablations, std::vector<Ablation>{Ablation::no_mb});
  ExperimentConfig again;
  apply_json(again, to_json(cfg));
  EXPECT_EQ(to_json(again), to_json(cfg));
}

TEST(RunExperiment, AblationGridEmitsFourRowsPerSeed) {
  auto cfg = small_config();
  cfg.ablations = {Ablation::full, Ablation::no_hrl, Ablation::no_mb, Ablation::no_hrl_no_mb};
  mogb::testing::TempDir dir("grid");
  cfg.output_dir = dir.path().string();
  mogb::testing::WarningCounter quiet;
  const auto r = run_experiment(cfg);
  ASSERT_EQ(r.cells.size(), 8u);
  EXPECT_TRUE(r.all_ok());
  for (const auto& c : r.cells) {
    EXPECT_EQ(c.report.total(), c.test_size);
    if (!uses_mb(c.ablation)) {
      EXPECT_EQ(c.report.n_boundaries, 3u);
    }
  }
  std::ifstream csv(dir / "results.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, kResultsCsvHeader);
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 8u);
  EXPECT_EQ(std::distance(std::filesystem::directory_iterator(dir / "cells"), {}), 8);
}

TEST(RunExperiment, NtSweepBoundaryCountsDoNotIncrease) {
  auto cfg = small_config();
  cfg.sweep = Sweep{"n_t", {1, 3, 5, 9, 19}};
  mogb::testing::WarningCounter quiet;
  const auto r = run_experiment(cfg);
  ASSERT_EQ(r.cells.size(), 10u);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t i = 1; i < 5; ++i)
      EXPECT_LE(r.cells[s * 5 + i].report.n_boundaries, r.cells[s * 5 + i - 1].report.n_boundaries);
}

TEST(RunExperiment, PtSweepRowsCarryTheSweptValue) {
  auto cfg = small_config();
  cfg.seeds = {3};
  cfg.sweep = Sweep{"p_t", {0.8, 0.85, 0.9, 0.95, 0.97}};
  mogb::testing::WarningCounter quiet;
  const auto r = run_experiment(cfg);
  ASSERT_EQ(r.cells.size(), 5u);
  EXPECT_EQ(csv_row(cfg, r.cells[1]).rfind("synthetic,1.00,3,full,0.85,3,", 0), 0u) << csv_row(cfg, r.cells[1]);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_LE(r.cells[i].report.n_boundaries, r.cells[i - 1].report.n_boundaries);
}

TEST(RunExperiment, FailedCellIsIsolated) {
  auto cfg = small_config();
  cfg.sweep = Sweep{"n_t", {3, 0}};  // n_t = 0 is invalid
  mogb::testing::WarningCounter quiet;
  const auto r = run_experiment(cfg);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_FALSE(r.all_ok());
  EXPECT_TRUE(r.cells[0].ok);
  EXPECT_FALSE(r.cells[1].ok);
  EXPECT_TRUE(r.cells[2].ok);
  EXPECT_NE(csv_row(cfg, r.cells[1]).find("NA"), std::string::npos);
}

TEST(RunExperiment, RepeatedRunsWriteIdenticalCsv) {
  auto cfg = small_config();
  cfg.ablations = {Ablation::full, Ablation::no_hrl};
  mogb::testing::TempDir a("det_a"), b("det_b");
  mogb::testing::WarningCounter quiet;
  cfg.output_dir = a.path().string();
  run_experiment(cfg);
  cfg.output_dir = b.path().string();
  run_experiment(cfg);
  EXPECT_EQ(slurp(a / "results.csv"), slurp(b / "results.csv"));
}
