#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mogb/distance.hpp"
#include "mogb/io.hpp"
#include "mogb/log.hpp"
#include "mogb/types.hpp"

namespace mogb {

struct ClusterResult {
  std::vector<GranularBall> balls;     // terminal balls G
  std::vector<GranularBall> filtered;  // purity >= p_t and count > n_t
  std::map<int, std::size_t> per_class_counts;
  std::vector<int> empty_classes;      // known classes left without a filtered ball
  std::size_t splits = 0;
};

struct FilterResult {
  std::vector<GranularBall> filtered;
  std::map<int, std::size_t> per_class_counts;
  std::vector<int> empty_classes;
};

/// Builds a ball from dataset rows. Radius is the mean member-to-centroid distance
/// under `metric`; the majority label breaks ties toward the smaller id.
inline GranularBall make_ball(const Dataset& ds, std::vector<std::size_t> members, Metric metric) {
  if (members.empty()) throw std::invalid_argument("make_ball: empty member set");
  GranularBall ball;
  ball.members = std::move(members);

  ball.centroid = Vector::Zero(static_cast<Eigen::Index>(ds.dim));
  std::map<int, std::size_t> counts;
  for (auto i : ball.members) {
    if (i >= ds.size()) throw std::out_of_range("make_ball: member index out of range");
    ball.centroid += ds.samples[i].features;
    ++counts[ds.samples[i].label];
  }
  const auto n = static_cast<double>(ball.count());
  ball.centroid /= n;

  double total = 0.0;
  for (auto i : ball.members) total += distance(ds.samples[i].features, ball.centroid, metric);
  ball.radius = total / n;

  std::size_t best = 0;
  for (const auto& [label, c] : counts) {
    if (c > best) {  // std::map iterates labels ascending, so ties keep the smaller id
      best = c;
      ball.label = label;
    }
  }
  ball.purity = static_cast<double>(best) / n;
  return ball;
}

inline bool should_split(const GranularBall& ball, double p_l, std::size_t n_l) {
  return ball.purity < p_l && ball.count() > n_l;
}

/// One pass of pseudo-centroid assignment: a random member of each distinct label seeds a
/// new ball, and every other member joins the euclidean-nearest seed (ties to the lower label).
template <class Rng>
std::vector<GranularBall> split_ball(const Dataset& ds, const GranularBall& ball, Rng& rng,
                                     Metric metric) {
  std::map<int, std::vector<std::size_t>> by_label;
  for (auto i : ball.members) by_label[ds.samples[i].label].push_back(i);
  if (by_label.size() < 2) throw std::invalid_argument("split_ball: ball holds a single label");

  std::vector<std::size_t> seeds;
  seeds.reserve(by_label.size());
  for (const auto& [label, idx] : by_label) {
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    seeds.push_back(idx[pick(rng)]);
  }

  std::vector<std::vector<std::size_t>> parts(seeds.size());
  for (auto i : ball.members) {
    std::size_t owner = seeds.size();
    for (std::size_t s = 0; s < seeds.size() && owner == seeds.size(); ++s)
      if (seeds[s] == i) owner = s;
    if (owner == seeds.size()) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const double d = (ds.samples[i].features - ds.samples[seeds[s]].features).squaredNorm();
        if (d < best) {
          best = d;
          owner = s;
        }
      }
    }
    parts[owner].push_back(i);
  }

  std::vector<GranularBall> out;
  out.reserve(parts.size());
  for (auto& p : parts) out.push_back(make_ball(ds, std::move(p), metric));
  return out;
}

inline FilterResult filter_quality(std::span<const GranularBall> balls, double p_t, std::size_t n_t,
                                   int num_classes) {
  FilterResult r;
  for (int c = 1; c <= num_classes; ++c) r.per_class_counts[c] = 0;
  for (const auto& b : balls) {
    if (b.purity >= p_t && b.count() > n_t) {
      r.filtered.push_back(b);
      ++r.per_class_counts[b.label];
    }
  }
  for (const auto& [c, n] : r.per_class_counts)
    if (n == 0) r.empty_classes.push_back(c);
  if (r.filtered.empty())
    warn("quality filter (p_t=" + std::to_string(p_t) + ", n_t=" + std::to_string(n_t) +
         ") kept no granular-balls");
  else if (!r.empty_classes.empty())
    warn(std::to_string(r.empty_classes.size()) +
         " known class(es) have no granular-ball after the quality filter");
  return r;
}

/// Splits a single all-data ball until no ball has purity < p_l with more than n_l members,
/// then applies the quality filter. Deterministic in hp.seed.
inline ClusterResult cluster_adaptive(const Dataset& ds, const HyperParams& hp) {
  if (ds.empty()) throw std::invalid_argument("cluster_adaptive: empty dataset");
  if (!ds.known_only())
    throw std::invalid_argument("cluster_adaptive: training data must carry known labels only");
  hp.validate();
  const std::size_t n_l = hp.resolved_n_l(ds.size(), ds.num_known);

  std::mt19937_64 rng(hp.seed);
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  ClusterResult result;
  std::deque<GranularBall> work;
  work.push_back(make_ball(ds, std::move(all), hp.metric));
  const std::size_t max_splits = ds.size();
  while (!work.empty()) {
    GranularBall ball = std::move(work.front());
    work.pop_front();
    if (!should_split(ball, hp.p_l, n_l)) {
      result.balls.push_back(std::move(ball));
      continue;
    }
    if (result.splits >= max_splits)
      throw std::logic_error("cluster_adaptive: split cap reached; termination invariant broken");
    auto parts = split_ball(ds, ball, rng, hp.metric);
    ++result.splits;
    if (parts.size() == 1) {  // unreachable with >= 2 labels; kept as a hard stop
      result.balls.push_back(std::move(ball));
      continue;
    }
    for (auto& p : parts) work.push_back(std::move(p));
  }

  auto f = filter_quality(result.balls, hp.p_t, hp.n_t, ds.num_known);
  result.filtered = std::move(f.filtered);
  result.per_class_counts = std::move(f.per_class_counts);
  result.empty_classes = std::move(f.empty_classes);
  return result;
}

/// Re-applies the quality filter with different thresholds, keeping the terminal balls.
inline ClusterResult refilter(const ClusterResult& base, double p_t, std::size_t n_t,
                              int num_classes) {
  ClusterResult r;
  r.balls = base.balls;
  r.splits = base.splits;
  auto f = filter_quality(r.balls, p_t, n_t, num_classes);
  r.filtered = std::move(f.filtered);
  r.per_class_counts = std::move(f.per_class_counts);
  r.empty_classes = std::move(f.empty_classes);
  return r;
}

inline nlohmann::json ball_to_json(const GranularBall& b) {
  return {{"n", b.count()},
          {"centroid", to_json(b.centroid)},
          {"radius", b.radius},
          {"label", b.label},
          {"purity", b.purity}};
}

inline nlohmann::json to_json(const ClusterResult& r) {
  nlohmann::json balls = nlohmann::json::array();
  for (const auto& b : r.balls) balls.push_back(ball_to_json(b));
  nlohmann::json filtered = nlohmann::json::array();
  for (const auto& b : r.filtered) filtered.push_back(ball_to_json(b));
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [c, n] : r.per_class_counts) counts[std::to_string(c)] = n;
  return {{"balls", balls},
          {"filtered", filtered},
          {"summary",
           {{"m", r.balls.size()},
            {"m_filtered", r.filtered.size()},
            {"splits", r.splits},
            {"per_class_counts", counts},
            {"empty_classes", r.empty_classes}}}};
}

}  // namespace mogb
