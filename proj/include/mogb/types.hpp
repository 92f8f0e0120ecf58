#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mogb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Metric { cosine_distance, euclidean };

inline std::string_view to_string(Metric m) {
  return m == Metric::cosine_distance ? "cosine_distance" : "euclidean";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "cosine_distance" || s == "cosine") return Metric::cosine_distance;
  if (s == "euclidean") return Metric::euclidean;
  throw std::invalid_argument("unknown metric: " + std::string(s));
}

/// Whether a dataset holds raw input features or encoder outputs.
enum class Stage : std::uint8_t { raw = 0, encoded = 1 };

struct LabeledVector {
  Vector features;
  int label = 1;
};

/// Labeled feature vectors with dense known labels 1..K; K+1 marks unknown.
struct Dataset {
  std::vector<LabeledVector> samples;
  std::size_t dim = 0;
  int num_known = 0;
  Stage stage = Stage::raw;

  int unknown_label() const { return num_known + 1; }
  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  void validate() const {
    if (dim == 0) throw std::invalid_argument("dataset dimension must be positive");
    if (num_known < 0) throw std::invalid_argument("negative class count");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const auto& s = samples[i];
      if (static_cast<std::size_t>(s.features.size()) != dim)
        throw std::invalid_argument("sample " + std::to_string(i) + " has dimension " +
                                    std::to_string(s.features.size()) + ", expected " +
                                    std::to_string(dim));
      if (!s.features.allFinite())
        throw std::invalid_argument("sample " + std::to_string(i) + " has non-finite features");
      if (s.label < 1 || s.label > unknown_label())
        throw std::invalid_argument("sample " + std::to_string(i) + " has label " +
                                    std::to_string(s.label) + " outside 1.." +
                                    std::to_string(unknown_label()));
    }
  }

  /// True when every sample carries a known label (a valid training set).
  bool known_only() const {
    for (const auto& s : samples)
      if (s.label > num_known) return false;
    return true;
  }
};

/// A cluster summarised by centroid, mean member distance, majority label and purity.
struct GranularBall {
  std::vector<std::size_t> members;
  Vector centroid;
  double radius = 0.0;
  int label = 0;
  double purity = 0.0;

  std::size_t count() const { return members.size(); }
};

struct HyperParams {
  double p_l = 0.9;
  /// Unset means max(4, ceil(N / (50 K))).
  std::optional<std::size_t> n_l;
  double p_t = 1.0;
  std::size_t n_t = 3;
  Metric metric = Metric::cosine_distance;
  std::uint64_t seed = 0;
  std::size_t D = 64;
  std::size_t epochs = 10;
  std::size_t batch_size = 128;
  double learning_rate = 2e-5;

  std::size_t resolved_n_l(std::size_t n, int k) const {
    if (n_l) return *n_l;
    const std::size_t denom = 50 * static_cast<std::size_t>(std::max(k, 1));
    return std::max<std::size_t>(4, (n + denom - 1) / denom);
  }

  void validate() const {
    if (!(p_l > 0.0 && p_l <= 1.0)) throw std::invalid_argument("p_l must lie in (0, 1]");
    if (!(p_t > 0.0 && p_t <= 1.0)) throw std::invalid_argument("p_t must lie in (0, 1]");
    if (n_l && *n_l == 0) throw std::invalid_argument("n_l must be positive");
    if (n_t == 0) throw std::invalid_argument("n_t must be positive");
    if (D == 0) throw std::invalid_argument("encoder dimension must be positive");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  }
};

/// One sphere of a multi-granularity boundary.
struct Boundary {
  Vector centroid;
  double radius = 0.0;
  std::size_t source_count = 0;
  double source_purity = 1.0;
};

/// Per-class sub-centroids and radii; index c-1 holds class c.
struct BoundaryModel {
  Metric metric = Metric::cosine_distance;
  std::vector<std::vector<Boundary>> classes;

  int num_classes() const { return static_cast<int>(classes.size()); }
  int unknown_label() const { return num_classes() + 1; }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.size();
    return n;
  }
};

}  // namespace mogb
