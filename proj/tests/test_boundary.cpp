#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mogb;
using mogb::testing::vec;

namespace {

/// Exhaustive reference for the closed and open rules, written independently of boundary.hpp.
struct BruteForce {
  int closed = 0;
  int open = 0;
};

BruteForce brute_force(const Vector& z, const BoundaryModel& m) {
  BruteForce out;
  double best_all = 1e300, best_in = 1e300;
  for (std::size_t c = 0; c < m.classes.size(); ++c)
    for (const auto& b : m.classes[c]) {
      const double d = m.metric == Metric::euclidean
                           ? std::sqrt((z - b.centroid).squaredNorm())
                           : 1.0 - z.dot(b.centroid) / (z.norm() * b.centroid.norm());
      if (d < best_all) best_all = d, out.closed = static_cast<int>(c + 1);
      if (d <= b.radius && d < best_in) best_in = d, out.open = static_cast<int>(c + 1);
    }
  if (out.open == 0) out.open = static_cast<int>(m.classes.size()) + 1;
  return out;
}

BoundaryModel random_model(std::mt19937_64& rng, Metric metric, std::size_t d) {
  std::uniform_int_distribution<int> k(1, 6), subs(0, 4);
  std::uniform_real_distribution<double> radius(0.0, metric == Metric::euclidean ? 2.0 : 0.4);
  BoundaryModel m;
  m.metric = metric;
  m.classes.resize(static_cast<std::size_t>(k(rng)));
  for (auto& cls : m.classes) {
    const int s = subs(rng);
    for (int j = 0; j < s; ++j) cls.push_back({mogb::testing::random_vector(rng, d, 1.5), radius(rng), 5, 1.0});
  }
  if (m.total() == 0) m.classes[0].push_back({mogb::testing::random_vector(rng, d), 1.0, 5, 1.0});
  return m;
}

BoundaryModel one_each(std::vector<std::pair<Vector, double>> balls_per_class) {
  BoundaryModel m;
  m.metric = Metric::euclidean;
  for (auto& [c, r] : balls_per_class) m.classes.push_back({{c, r, 5, 1.0}});
  return m;
}

}  // namespace

TEST(BuildBoundaries, GroupsFilteredBallsByLabel) {
  Dataset enc;
  enc.dim = 1;
  enc.num_known = 2;
  enc.samples = {{vec({0}), 1}, {vec({2}), 1}, {vec({10}), 1}, {vec({11}), 2}};
  ClusterResult cr;
  cr.filtered = {make_ball(enc, {0, 1}, Metric::euclidean), make_ball(enc, {2}, Metric::euclidean),
                 make_ball(enc, {3}, Metric::euclidean)};
  const auto m = build_boundaries(cr, enc, Metric::euclidean);
  EXPECT_EQ(m.classes[0].size(), 2u);
  EXPECT_EQ(m.classes[1].size(), 1u);
  EXPECT_EQ(m.total(), 3u);
  EXPECT_DOUBLE_EQ(m.classes[0][0].radius, 1.0);
}

TEST(BuildBoundaries, EmptyFilteredSetThrowsAndMissingClassWarns) {
  Dataset enc;
  enc.dim = 1;
  enc.num_known = 2;
  enc.samples = {{vec({0}), 1}, {vec({1}), 1}};
  ClusterResult cr;
  EXPECT_THROW(build_boundaries(cr, enc, Metric::euclidean), std::invalid_argument);
  cr.filtered = {make_ball(enc, {0, 1}, Metric::euclidean)};
  mogb::testing::WarningCounter w;
  const auto m = build_boundaries(cr, enc, Metric::euclidean);
  EXPECT_TRUE(m.classes[1].empty());
  EXPECT_EQ(w.count, 1u);
}

TEST(BuildBoundaries, DefaultFilterNeverYieldsRadiusZero) {
  std::mt19937_64 rng(1);
  const auto ds = mogb::testing::random_dataset(rng, 400, 4, 2, 2.0);
  HyperParams hp;
  hp.metric = Metric::euclidean;
  mogb::testing::WarningCounter quiet;
  const auto cr = cluster_adaptive(ds, hp);
  for (const auto& b : cr.filtered) EXPECT_GT(b.count(), 1u);
  ASSERT_FALSE(cr.filtered.empty());
  for (const auto& cls : build_boundaries(cr, ds, hp.metric).classes)
    for (const auto& b : cls) EXPECT_GT(b.radius, 0.0);
}

TEST(SingleBoundary, OnePerClassAndRadiusZeroForIdenticalPoints) {
  Dataset enc;
  enc.dim = 2;
  enc.num_known = 2;
  enc.samples = {{vec({1, 1}), 1}, {vec({1, 1}), 1}, {vec({3, 0}), 2}, {vec({5, 0}), 2}};
  const auto m = build_single_boundary_baseline(enc, Metric::euclidean);
  ASSERT_EQ(m.total(), 2u);
  EXPECT_EQ(m.classes[0][0].radius, 0.0);
  EXPECT_EQ(m.classes[1][0].centroid, vec({4, 0}));
  EXPECT_DOUBLE_EQ(m.classes[1][0].radius, 1.0);
  enc.num_known = 3;
  EXPECT_THROW(build_single_boundary_baseline(enc, Metric::euclidean), std::invalid_argument);
}

TEST(ClassifyClosed, ExactCentroidHitAndTieRule) {
  const auto m = one_each({{vec({-1, 0}), 0.1}, {vec({1, 0}), 0.1}});
  EXPECT_EQ(classify_closed(vec({1, 0}), m).label, 2);
  EXPECT_EQ(classify_closed(vec({0, 3}), m).label, 1);  // equidistant
  BoundaryModel empty;
  empty.classes.resize(2);
  EXPECT_THROW(classify_closed(vec({0, 0}), empty), std::invalid_argument);
  EXPECT_THROW(classify_open(vec({0, 0}), empty), std::invalid_argument);
}

TEST(ClassifyOpen, InsideOneOutsideAllAndOverlap) {
  const auto m = one_each({{vec({0, 0}), 1.0}, {vec({1.5, 0}), 1.0}});
  EXPECT_EQ(classify_open(vec({-0.5, 0}), m).label, 1);
  EXPECT_EQ(classify_open(vec({10, 10}), m).label, 3);
  EXPECT_EQ(classify_open(vec({0.9, 0}), m).label, 2);  // in both, nearer to class 2
  EXPECT_EQ(classify_open(vec({-1, 0}), m).label, 1);   // on the sphere counts as inside
}

TEST(ClassifyOpen, RawDistanceVersusNormalizedRanking) {
  // z is 0.9 from a radius-3 ball and 0.5 from a radius-0.6 ball.
  const auto m = one_each({{vec({0.9, 0}), 3.0}, {vec({-0.5, 0}), 0.6}});
  EXPECT_EQ(classify_open(vec({0, 0}), m).label, 2);
  EXPECT_EQ(classify_open(vec({0, 0}), m, {.normalized = true}).label, 1);
}

TEST(ClassifyOpen, CentroidWithPositiveRadiusIsNeverUnknown) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto m = random_model(rng, Metric::euclidean, 3);
    for (const auto& cls : m.classes)
      for (const auto& b : cls)
        if (b.radius > 0) {
          EXPECT_NE(classify_open(b.centroid, m).label, m.unknown_label());
        }
  }
}

TEST(Classify, AgreesWithBruteForceOnRandomModels) {
  std::mt19937_64 rng(99);
  for (auto metric : {Metric::euclidean, Metric::cosine_distance}) {
    for (int t = 0; t < 20; ++t) {
      const auto m = random_model(rng, metric, 3);
      for (int q = 0; q < 200; ++q) {
        const auto z = mogb::testing::random_vector(rng, 3, 1.5);
        const auto ref = brute_force(z, m);
        EXPECT_EQ(classify_closed(z, m).label, ref.closed);
        EXPECT_EQ(classify_open(z, m).label, ref.open);
      }
    }
  }
}

TEST(ClassifyOpen, ShrinkingRadiiOnlyAddsUnknowns) {
  std::mt19937_64 rng(17);
  const auto base = random_model(rng, Metric::euclidean, 2);
  std::vector<Vector> queries;
  for (int q = 0; q < 500; ++q) queries.push_back(mogb::testing::random_vector(rng, 2, 1.5));
  std::vector<int> prev;
  for (double f : {1.0, 0.8, 0.6, 0.4, 0.2, 0.0}) {
    BoundaryModel m = base;
    for (auto& cls : m.classes)
      for (auto& b : cls) b.radius *= f;
    std::vector<int> cur;
    for (const auto& z : queries) cur.push_back(classify_open(z, m).label);
    if (!prev.empty())
      for (std::size_t i = 0; i < cur.size(); ++i)
        if (prev[i] == m.unknown_label()) {
          EXPECT_EQ(cur[i], m.unknown_label());
        }
    prev = cur;
  }
}

TEST(ClassifyClosed, CosineScaleInvariance) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 10; ++t) {
    const auto m = random_model(rng, Metric::cosine_distance, 4);
    for (int q = 0; q < 100; ++q) {
      const auto z = mogb::testing::random_vector(rng, 4);
      EXPECT_EQ(classify_closed(z, m).label, classify_closed(Vector(7.5 * z), m).label);
    }
  }
}

TEST(RingHole, HoleCentreInsideSingleBoundaryButOutsideMultiGranularity) {
  SyntheticSpec spec;
  spec.num_classes = 1;
  spec.per_class = 500;
  spec.intra_open = 0;
  spec.inter_open = 0;
  auto ring = gen_synthetic(spec, 3);
  // A second class far away gives the clustering something to split against.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.2);
  for (int i = 0; i < 100; ++i) ring.samples.push_back({vec({20 + g(rng), g(rng)}), 2});
  ring.num_known = 2;
  // Sprinkle class-2 points along the ring so the ring cannot stay one ball.
  for (int i = 0; i < 60; ++i) {
    const double a = 2 * std::numbers::pi * i / 60.0;
    ring.samples.push_back({vec({2.5 * std::cos(a), 2.5 * std::sin(a)}), 2});
  }
  const Vector hole = vec({0, 0});
  const auto single = build_single_boundary_baseline(ring, Metric::euclidean);
  EXPECT_EQ(classify_open(hole, single).label, 1);

  HyperParams hp;
  hp.metric = Metric::euclidean;
  mogb::testing::WarningCounter quiet;
  const auto cr = cluster_adaptive(ring, hp);
  const auto multi = build_boundaries(cr, ring, hp.metric);
  EXPECT_GT(multi.classes[0].size(), 1u);
  EXPECT_EQ(classify_open(hole, multi).label, multi.unknown_label());
}

TEST(BoundaryModel, JsonRoundTrip) {
  std::mt19937_64 rng(6);
  const auto m = random_model(rng, Metric::cosine_distance, 3);
  const auto back = boundary_model_from_json(nlohmann::json::parse(to_json(m).dump()));
  EXPECT_EQ(back.metric, m.metric);
  ASSERT_EQ(back.classes.size(), m.classes.size());
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    ASSERT_EQ(back.classes[c].size(), m.classes[c].size());
    for (std::size_t s = 0; s < m.classes[c].size(); ++s) {
      EXPECT_EQ(back.classes[c][s].centroid, m.classes[c][s].centroid);
      EXPECT_EQ(back.classes[c][s].radius, m.classes[c][s].radius);
    }
  }
}
