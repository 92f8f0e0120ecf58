#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mogb/types.hpp"

namespace mogb {

/// Geometry of a synthetic open-set dataset. Known classes get labels 1..K; open samples K+1.
///
/// Families:
///   gaussian_mixture  each class is `blobs_per_class` isotropic blobs
///   ring              each class is an annulus [inner_radius, outer_radius] with a hollow centre
///   crescent          each class is a half annulus (moon)
///
/// Open placement: `intra_open` points sit inside a class's hole (ring centre, crescent bowl, or the
/// middle of a class's blobs); `inter_open` points are rejection-sampled away from every class.
struct SyntheticSpec {
  std::string family = "ring";
  int num_classes = 3;
  std::size_t per_class = 400;
  std::size_t blobs_per_class = 2;
  double blob_std = 0.5;
  double inner_radius = 2.0;
  double outer_radius = 3.0;
  /// Distance between neighbouring class centres; 0 picks a layout where classes do not touch.
  double spacing = 0.0;
  std::size_t intra_open = 200;
  std::size_t inter_open = 200;
  /// Radius of the disc intra-open points are drawn from.
  double intra_radius = 0.8;
  /// Minimum gap between inter-open points and any class support.
  double inter_margin = 0.5;
  std::size_t dim = 2;
  /// Std of the noise filling coordinates beyond the first two.
  double extra_noise = 0.05;
  /// "none" keeps the geometric coordinates; "rff" maps them through fixed random Fourier
  /// features, x_j = sqrt(2/m) cos(w_j . p + b_j), w_j ~ N(0, I / bandwidth^2), standing in
  /// for a frozen nonlinear feature extractor.
  std::string lift = "none";
  std::size_t lift_dim = 64;
  double lift_bandwidth = 1.0;
};

inline nlohmann::json to_json(const SyntheticSpec& s) {
  return {{"family", s.family},         {"num_classes", s.num_classes}, {"per_class", s.per_class},
          {"blobs_per_class", s.blobs_per_class}, {"blob_std", s.blob_std},
          {"inner_radius", s.inner_radius}, {"outer_radius", s.outer_radius}, {"spacing", s.spacing},
          {"intra_open", s.intra_open}, {"inter_open", s.inter_open},   {"intra_radius", s.intra_radius},
          {"inter_margin", s.inter_margin}, {"dim", s.dim},              {"extra_noise", s.extra_noise},
          {"lift", s.lift},                 {"lift_dim", s.lift_dim},     {"lift_bandwidth", s.lift_bandwidth}};
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.family = j.value("family", s.family);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.per_class = j.value("per_class", s.per_class);
  s.blobs_per_class = j.value("blobs_per_class", s.blobs_per_class);
  s.blob_std = j.value("blob_std", s.blob_std);
  s.inner_radius = j.value("inner_radius", s.inner_radius);
  s.outer_radius = j.value("outer_radius", s.outer_radius);
  s.spacing = j.value("spacing", s.spacing);
  s.intra_open = j.value("intra_open", s.intra_open);
  s.inter_open = j.value("inter_open", s.inter_open);
  s.intra_radius = j.value("intra_radius", s.intra_radius);
  s.inter_margin = j.value("inter_margin", s.inter_margin);
  s.dim = j.value("dim", s.dim);
  s.extra_noise = j.value("extra_noise", s.extra_noise);
  s.lift = j.value("lift", s.lift);
  s.lift_dim = j.value("lift_dim", s.lift_dim);
  s.lift_bandwidth = j.value("lift_bandwidth", s.lift_bandwidth);
  return s;
}

namespace detail {

struct Point2 {
  double x = 0.0, y = 0.0;
};

inline double dist2(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Class centres on a circle around the origin, neighbours `spacing` apart.
inline std::vector<Point2> layout_centres(int k, double spacing) {
  std::vector<Point2> c(static_cast<std::size_t>(k));
  if (k == 1) return c;
  const double step = 2.0 * std::numbers::pi / k;
  const double r = spacing / (2.0 * std::sin(step / 2.0));
  for (int i = 0; i < k; ++i) c[static_cast<std::size_t>(i)] = {r * std::cos(i * step), r * std::sin(i * step)};
  return c;
}

/// Uniform point in an annulus (area-uniform radius).
template <class Rng>
Point2 annulus_point(Point2 centre, double r_in, double r_out, double theta_lo, double theta_hi, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = std::sqrt(r_in * r_in + u(rng) * (r_out * r_out - r_in * r_in));
  const double t = theta_lo + u(rng) * (theta_hi - theta_lo);
  return {centre.x + r * std::cos(t), centre.y + r * std::sin(t)};
}

}  // namespace detail

/// Generates the dataset described by `spec`. Same spec and seed give identical samples.
inline Dataset gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  using detail::Point2;
  if (spec.num_classes < 1) throw std::invalid_argument("synthetic: need at least one class");
  if (spec.dim < 2) throw std::invalid_argument("synthetic: dimension must be at least 2");
  const bool ring = spec.family == "ring";
  const bool crescent = spec.family == "crescent";
  const bool gauss = spec.family == "gaussian_mixture";
  if (!ring && !crescent && !gauss) throw std::invalid_argument("unknown synthetic family: " + spec.family);
  if ((ring || crescent) && !(spec.inner_radius >= 0.0 && spec.outer_radius > spec.inner_radius))
    throw std::invalid_argument("synthetic: need 0 <= inner_radius < outer_radius");
  if (spec.intra_radius >= spec.inner_radius && (ring || crescent) && spec.intra_open > 0)
    throw std::invalid_argument("synthetic: intra_radius must be smaller than inner_radius");
  if (gauss && spec.blobs_per_class == 0) throw std::invalid_argument("synthetic: blobs_per_class must be positive");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int k = spec.num_classes;

  const double extent = gauss ? 3.0 * spec.blob_std * std::sqrt(static_cast<double>(spec.blobs_per_class)) +
                                    2.0 * spec.blob_std * static_cast<double>(spec.blobs_per_class)
                              : spec.outer_radius;
  const double spacing = spec.spacing > 0.0 ? spec.spacing : 2.0 * extent + 2.0 * spec.inter_margin + 1.0;
  const auto centres = detail::layout_centres(k, spacing);

  // Blob means per class for the mixture family: spread on a small circle around the class centre.
  std::vector<std::vector<Point2>> blob_means(static_cast<std::size_t>(k));
  if (gauss) {
    const double r = spec.blobs_per_class > 1 ? 3.0 * spec.blob_std : 0.0;
    for (int c = 0; c < k; ++c) {
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      for (std::size_t b = 0; b < spec.blobs_per_class; ++b) {
        const double t = phase + 2.0 * std::numbers::pi * static_cast<double>(b) /
                                     static_cast<double>(spec.blobs_per_class);
        const auto& cc = centres[static_cast<std::size_t>(c)];
        blob_means[static_cast<std::size_t>(c)].push_back({cc.x + r * std::cos(t), cc.y + r * std::sin(t)});
      }
    }
  }

  Dataset ds;
  ds.dim = spec.dim;
  ds.num_known = k;
  ds.stage = Stage::raw;
  auto emit = [&](Point2 p, int label) {
    LabeledVector s;
    s.features.resize(static_cast<Eigen::Index>(spec.dim));
    s.features[0] = p.x;
    s.features[1] = p.y;
    for (std::size_t j = 2; j < spec.dim; ++j) s.features[static_cast<Eigen::Index>(j)] = spec.extra_noise * normal(rng);
    s.label = label;
    ds.samples.push_back(std::move(s));
  };

  // Crescent c opens away from the layout centre; its bowl faces outward.
  auto crescent_range = [&](int c) {
    const auto& cc = centres[static_cast<std::size_t>(c)];
    const double facing = (k == 1) ? 0.0 : std::atan2(cc.y, cc.x);
    return std::pair{facing + std::numbers::pi / 2.0, facing + 3.0 * std::numbers::pi / 2.0};
  };

  for (int c = 0; c < k; ++c) {
    const auto& cc = centres[static_cast<std::size_t>(c)];
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      if (ring) {
        emit(detail::annulus_point(cc, spec.inner_radius, spec.outer_radius, 0.0, 2.0 * std::numbers::pi, rng), c + 1);
      } else if (crescent) {
        const auto [lo, hi] = crescent_range(c);
        emit(detail::annulus_point(cc, spec.inner_radius, spec.outer_radius, lo, hi, rng), c + 1);
      } else {
        const auto& m = blob_means[static_cast<std::size_t>(c)][i % spec.blobs_per_class];
        emit({m.x + spec.blob_std * normal(rng), m.y + spec.blob_std * normal(rng)}, c + 1);
      }
    }
  }

  const int open = k + 1;
  for (std::size_t i = 0; i < spec.intra_open; ++i) {
    const int c = static_cast<int>(i % static_cast<std::size_t>(k));
    Point2 hole = centres[static_cast<std::size_t>(c)];
    if (crescent) {
      // Bowl of the moon: inside the inner circle, on the open side.
      const auto [lo, hi] = crescent_range(c);
      const double mid = 0.5 * (lo + hi);
      const double off = 0.5 * spec.inner_radius;
      hole = {hole.x + off * std::cos(mid), hole.y + off * std::sin(mid)};
    }
    const double rmax = crescent ? std::min(spec.intra_radius, 0.45 * spec.inner_radius) : spec.intra_radius;
    emit(detail::annulus_point(hole, 0.0, rmax, 0.0, 2.0 * std::numbers::pi, rng), open);
  }

  // Inter-open: uniform over the layout's bounding disc, rejected near any class support.
  double layout_r = 0.0;
  for (const auto& cc : centres) layout_r = std::max(layout_r, std::hypot(cc.x, cc.y));
  const double box = layout_r + extent + 2.0 * spec.inter_margin;
  auto near_class = [&](Point2 p) {
    for (int c = 0; c < k; ++c) {
      const auto& cc = centres[static_cast<std::size_t>(c)];
      if (gauss) {
        for (const auto& m : blob_means[static_cast<std::size_t>(c)])
          if (detail::dist2(p, m) < 3.0 * spec.blob_std + spec.inter_margin) return true;
        if (spec.blobs_per_class > 1 && detail::dist2(p, cc) < 3.0 * spec.blob_std) return true;
      } else if (detail::dist2(p, cc) < spec.outer_radius + spec.inter_margin) {
        return true;  // also excludes holes: those are intra-open territory
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < spec.inter_open; ++i) {
    Point2 p;
    std::size_t tries = 0;
    do {
      p = {box * (2.0 * unit(rng) - 1.0), box * (2.0 * unit(rng) - 1.0)};
      if (++tries > 100000) throw std::runtime_error("synthetic: cannot place inter-open samples");
    } while (near_class(p) || std::hypot(p.x, p.y) > box);
    emit(p, open);
  }

  if (spec.lift == "rff") {
    if (spec.lift_dim == 0 || !(spec.lift_bandwidth > 0.0))
      throw std::invalid_argument("synthetic: rff lift needs lift_dim > 0 and lift_bandwidth > 0");
    std::mt19937_64 lift_rng(seed ^ 0x5DEECE66DULL);
    const auto m = static_cast<Eigen::Index>(spec.lift_dim);
    Matrix w(m, static_cast<Eigen::Index>(spec.dim));
    Vector phase(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = normal(lift_rng) / spec.lift_bandwidth;
      phase[r] = 2.0 * std::numbers::pi * unit(lift_rng);
    }
    const double scale = std::sqrt(2.0 / static_cast<double>(spec.lift_dim));
    for (auto& s : ds.samples)
      s.features = ((w * s.features + phase).array().cos() * scale).matrix();
    ds.dim = spec.lift_dim;
  } else if (spec.lift != "none") {
    throw std::invalid_argument("unknown synthetic lift: " + spec.lift);
  }
  return ds;
}

}  // namespace mogb
