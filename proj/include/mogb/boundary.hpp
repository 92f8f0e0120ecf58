#pragma once

#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mogb/cluster.hpp"
#include "mogb/distance.hpp"
#include "mogb/io.hpp"
#include "mogb/log.hpp"
#include "mogb/types.hpp"

namespace mogb {

/// Groups the quality-filtered balls by label into per-class (sub-centroid, radius) pairs,
/// recomputing each radius under `metric` from the ball's members in `encoded`.
inline BoundaryModel build_boundaries(const ClusterResult& cr, const Dataset& encoded, Metric metric) {
  if (cr.filtered.empty()) throw std::invalid_argument("build_boundaries: no quality-filtered balls");
  BoundaryModel model;
  model.metric = metric;
  model.classes.resize(static_cast<std::size_t>(encoded.num_known));
  for (const auto& b : cr.filtered) {
    if (b.label < 1 || b.label > encoded.num_known)
      throw std::invalid_argument("build_boundaries: ball label outside known classes");
    double r = 0.0;
    for (auto i : b.members) r += distance(encoded.samples.at(i).features, b.centroid, metric);
    r /= static_cast<double>(b.count());
    model.classes[static_cast<std::size_t>(b.label - 1)].push_back({b.centroid, r, b.count(), b.purity});
  }
  std::size_t unreachable = 0;
  for (const auto& c : model.classes) unreachable += c.empty();
  if (unreachable > 0)
    warn(std::to_string(unreachable) + " known class(es) have no decision boundary and cannot be predicted");
  return model;
}

/// Whole-class boundaries: each class is treated as one ball (mean centroid, mean distance).
inline BoundaryModel build_single_boundary_baseline(const Dataset& encoded, Metric metric) {
  if (encoded.num_known < 1) throw std::invalid_argument("single boundary: no known classes");
  const auto k = static_cast<std::size_t>(encoded.num_known);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const int y = encoded.samples[i].label;
    if (y < 1 || y > encoded.num_known)
      throw std::invalid_argument("single boundary: training data must carry known labels only");
    members[static_cast<std::size_t>(y - 1)].push_back(i);
  }
  BoundaryModel model;
  model.metric = metric;
  model.classes.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (members[c].empty())
      throw std::invalid_argument("single boundary: class " + std::to_string(c + 1) + " has no samples");
    const auto ball = make_ball(encoded, members[c], metric);
    model.classes[c].push_back({ball.centroid, ball.radius, ball.count(), ball.purity});
  }
  return model;
}

struct Prediction {
  int label = 0;  // 1..K, or K+1 for unknown
  double distance = std::numeric_limits<double>::infinity();
  std::size_t sub_index = 0;  // winning sub-centroid within its class
};

/// Nearest sub-centroid over all (class, sub) pairs; ties go to the lower class, then lower index.
inline Prediction classify_closed(const Vector& z, const BoundaryModel& model) {
  Prediction best;
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const auto& subs = model.classes[c];
    for (std::size_t s = 0; s < subs.size(); ++s) {
      const double d = distance(z, subs[s].centroid, model.metric);
      if (d < best.distance) best = {static_cast<int>(c + 1), d, s};
    }
  }
  if (best.label == 0) throw std::invalid_argument("classify_closed: model has no sub-centroids");
  return best;
}

struct OpenOptions {
  /// Rank satisfied pairs by distance / radius instead of raw distance.
  bool normalized = false;
};

/// Unknown when z lies strictly outside every sphere; otherwise the class of the nearest
/// sub-centroid among the spheres that contain z (boundary counts as inside).
inline Prediction classify_open(const Vector& z, const BoundaryModel& model, OpenOptions opt = {}) {
  if (model.total() == 0) throw std::invalid_argument("classify_open: model has no sub-centroids");
  Prediction best;
  double best_key = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const auto& subs = model.classes[c];
    for (std::size_t s = 0; s < subs.size(); ++s) {
      const double d = distance(z, subs[s].centroid, model.metric);
      if (d > subs[s].radius) continue;
      double key = d;
      if (opt.normalized) key = subs[s].radius > 0.0 ? d / subs[s].radius : 0.0;
      if (key < best_key) {
        best_key = key;
        best = {static_cast<int>(c + 1), d, s};
      }
    }
  }
  if (best.label == 0) best.label = model.unknown_label();
  return best;
}

inline std::vector<Prediction> classify_open_batch(const Dataset& encoded, const BoundaryModel& model,
                                                   OpenOptions opt = {}) {
  std::vector<Prediction> out;
  out.reserve(encoded.size());
  for (const auto& s : encoded.samples) out.push_back(classify_open(s.features, model, opt));
  return out;
}

inline nlohmann::json to_json(const BoundaryModel& m) {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& b : m.classes[c])
      list.push_back({{"centroid", to_json(b.centroid)},
                      {"radius", b.radius},
                      {"source_ball_stats", {{"n", b.source_count}, {"purity", b.source_purity}}}});
    classes.push_back({{"label", c + 1}, {"boundaries", list}});
  }
  return {{"metric", std::string(to_string(m.metric))},
          {"K", m.num_classes()},
          {"n_boundaries", m.total()},
          {"classes", classes}};
}

inline BoundaryModel boundary_model_from_json(const nlohmann::json& j) {
  BoundaryModel m;
  m.metric = parse_metric(j.at("metric").get<std::string>());
  const int k = j.at("K").get<int>();
  m.classes.resize(static_cast<std::size_t>(k));
  for (const auto& cls : j.at("classes")) {
    const int label = cls.at("label").get<int>();
    if (label < 1 || label > k) throw std::invalid_argument("boundary model: class label out of range");
    for (const auto& b : cls.at("boundaries")) {
      Boundary bd;
      bd.centroid = vector_from_json(b.at("centroid"));
      bd.radius = b.at("radius").get<double>();
      if (bd.radius < 0.0) throw std::invalid_argument("boundary model: negative radius");
      if (b.contains("source_ball_stats")) {
        bd.source_count = b["source_ball_stats"].value("n", std::size_t{0});
        bd.source_purity = b["source_ball_stats"].value("purity", 1.0);
      }
      m.classes[static_cast<std::size_t>(label - 1)].push_back(std::move(bd));
    }
  }
  return m;
}

}  // namespace mogb
