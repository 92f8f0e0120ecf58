#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
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

/// splitmix64 finaliser; derives independent stream seeds from one user seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// z = max(0, W x + b).
struct DenseEncoder {
  Matrix weight;  // D x D_in
  Vector bias;    // D

  std::size_t input_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t output_dim() const { return static_cast<std::size_t>(weight.rows()); }

  /// W uniform in [-1/sqrt(D_in), 1/sqrt(D_in)], b = 0.
  static DenseEncoder init(std::size_t d_in, std::size_t d, std::uint64_t seed) {
    if (d_in == 0 || d == 0) throw std::invalid_argument("encoder dimensions must be positive");
    std::mt19937_64 rng(derive_seed(seed, 1));
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseEncoder e;
    e.weight.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d_in));
    for (Eigen::Index r = 0; r < e.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < e.weight.cols(); ++c) e.weight(r, c) = u(rng);
    e.bias = Vector::Zero(static_cast<Eigen::Index>(d));
    return e;
  }

  Vector pre_activation(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != input_dim())
      throw std::invalid_argument("encoder input has dimension " + std::to_string(x.size()) +
                                  ", expected " + std::to_string(input_dim()));
    return weight * x + bias;
  }

  Vector forward(const Vector& x) const { return pre_activation(x).cwiseMax(0.0); }

  Dataset encode(const Dataset& raw) const {
    Dataset out;
    out.dim = output_dim();
    out.num_known = raw.num_known;
    out.stage = Stage::encoded;
    out.samples.reserve(raw.size());
    for (const auto& s : raw.samples) out.samples.push_back({forward(s.features), s.label});
    return out;
  }
};

inline nlohmann::json to_json(const DenseEncoder& e, std::uint64_t seed, std::size_t epoch) {
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(e.weight.size()));
  for (Eigen::Index r = 0; r < e.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < e.weight.cols(); ++c) w.push_back(e.weight(r, c));
  return {{"D_in", e.input_dim()}, {"D", e.output_dim()}, {"W_h", w},
          {"b_h", to_json(e.bias)},   {"seed", seed},         {"epoch", epoch}};
}

inline DenseEncoder encoder_from_json(const nlohmann::json& j) {
  const auto d_in = j.at("D_in").get<std::size_t>();
  const auto d = j.at("D").get<std::size_t>();
  const auto w = j.at("W_h").get<std::vector<double>>();
  if (w.size() != d * d_in) throw std::invalid_argument("encoder checkpoint: W_h has wrong size");
  DenseEncoder e;
  e.weight.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d_in));
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d_in; ++c)
      e.weight(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[r * d_in + c];
  e.bias = vector_from_json(j.at("b_h"));
  if (static_cast<std::size_t>(e.bias.size()) != d)
    throw std::invalid_argument("encoder checkpoint: b_h has wrong size");
  return e;
}

struct NearestSub {
  double distance = std::numeric_limits<double>::infinity();
  std::size_t index = 0;
};

/// Minimum distance from z to any sub-centroid of one class; ties keep the lower index.
inline NearestSub class_distance(const Vector& z, std::span<const Boundary> subs, Metric metric) {
  if (subs.empty()) throw std::invalid_argument("class_distance: class has no sub-centroids");
  NearestSub best;
  for (std::size_t s = 0; s < subs.size(); ++s) {
    const double d = distance(z, subs[s].centroid, metric);
    if (d < best.distance) best = {d, s};
  }
  return best;
}

struct ClassPosterior {
  Vector prob;                      // p(c | z), index c-1
  std::vector<NearestSub> nearest;  // per class
};

/// p(c|z) = softmax(-d_c), d_c the distance to class c's nearest sub-centroid.
inline ClassPosterior class_posterior(const Vector& z, const BoundaryModel& model) {
  const int k = model.num_classes();
  if (k == 0) throw std::invalid_argument("model has no classes");
  ClassPosterior out;
  out.prob.resize(k);
  out.nearest.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    if (model.classes[static_cast<std::size_t>(c)].empty())
      throw std::invalid_argument("class " + std::to_string(c + 1) + " has no sub-centroids");
    auto n = class_distance(z, model.classes[static_cast<std::size_t>(c)], model.metric);
    if (!std::isfinite(n.distance))
      throw std::domain_error("non-finite distance for class " + std::to_string(c + 1));
    out.nearest.push_back(n);
    out.prob[c] = -n.distance;
  }
  const double shift = out.prob.maxCoeff();
  out.prob = (out.prob.array() - shift).exp();
  out.prob /= out.prob.sum();
  return out;
}

/// -log p(label | z) from the stabilised logits, avoiding log(0).
inline double negative_log_likelihood(const ClassPosterior& post, int label) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& n : post.nearest) m = std::max(m, -n.distance);
  double sum = 0.0;
  for (const auto& n : post.nearest) sum += std::exp(-n.distance - m);
  return m + std::log(sum) + post.nearest[static_cast<std::size_t>(label - 1)].distance;
}

struct LossResult {
  double loss = 0.0;
  std::vector<double> p_true;  // p(y_i | z_i)
};

/// Mean negative log-likelihood of the nearest-sub-centroid posterior over an encoded batch.
inline LossResult loss_gb(std::span<const LabeledVector> encoded_batch, const BoundaryModel& model) {
  if (encoded_batch.empty()) throw std::invalid_argument("loss_gb: empty batch");
  LossResult r;
  r.p_true.reserve(encoded_batch.size());
  for (const auto& s : encoded_batch) {
    if (s.label < 1 || s.label > model.num_classes())
      throw std::invalid_argument("loss_gb: label outside known classes");
    const auto post = class_posterior(s.features, model);
    r.loss += negative_log_likelihood(post, s.label);
    r.p_true.push_back(post.prob[s.label - 1]);
  }
  r.loss /= static_cast<double>(encoded_batch.size());
  return r;
}

struct Gradients {
  Matrix d_weight;
  Vector d_bias;
  double loss = 0.0;
};

/// Analytic gradient of loss_gb with respect to the encoder parameters. Sub-centroids are
/// constants; the min over sub-centroids routes gradient to the (lowest-index) argmin.
inline Gradients grad_loss(std::span<const LabeledVector> raw_batch, const DenseEncoder& enc,
                           const BoundaryModel& model) {
  if (raw_batch.empty()) throw std::invalid_argument("grad_loss: empty batch");
  Gradients g;
  g.d_weight = Matrix::Zero(enc.weight.rows(), enc.weight.cols());
  g.d_bias = Vector::Zero(enc.bias.size());
  const double inv_n = 1.0 / static_cast<double>(raw_batch.size());
  for (const auto& s : raw_batch) {
    if (s.label < 1 || s.label > model.num_classes())
      throw std::invalid_argument("grad_loss: label outside known classes");
    const Vector a = enc.pre_activation(s.features);
    const Vector z = a.cwiseMax(0.0);
    const auto post = class_posterior(z, model);
    g.loss += negative_log_likelihood(post, s.label);

    Vector dz = Vector::Zero(z.size());
    for (int c = 0; c < model.num_classes(); ++c) {
      const double coeff = (c + 1 == s.label ? 1.0 : 0.0) - post.prob[c];
      if (coeff == 0.0) continue;
      const auto& nearest = post.nearest[static_cast<std::size_t>(c)];
      const auto& o = model.classes[static_cast<std::size_t>(c)][nearest.index].centroid;
      dz += coeff * distance_gradient(z, o, model.metric);
    }
    const Vector da = (a.array() > 0.0).select(dz, 0.0);
    g.d_weight.noalias() += inv_n * da * s.features.transpose();
    g.d_bias += inv_n * da;
  }
  g.loss *= inv_n;
  return g;
}

/// Sub-centroids used by the loss: filtered balls, falling back to a class's unfiltered balls
/// and then to its encoded mean when a class would otherwise have no prototype.
inline BoundaryModel training_prototypes(const ClusterResult& cr, const Dataset& encoded,
                                         Metric metric) {
  BoundaryModel m;
  m.metric = metric;
  const auto k = static_cast<std::size_t>(encoded.num_known);
  m.classes.resize(k);
  for (const auto& b : cr.filtered)
    m.classes[static_cast<std::size_t>(b.label - 1)].push_back({b.centroid, b.radius, b.count(), b.purity});
  for (std::size_t c = 0; c < k; ++c) {
    if (!m.classes[c].empty()) continue;
    for (const auto& b : cr.balls)
      if (static_cast<std::size_t>(b.label) == c + 1)
        m.classes[c].push_back({b.centroid, b.radius, b.count(), b.purity});
    if (!m.classes[c].empty()) continue;
    Vector mean = Vector::Zero(static_cast<Eigen::Index>(encoded.dim));
    std::size_t n = 0;
    for (const auto& s : encoded.samples)
      if (static_cast<std::size_t>(s.label) == c + 1) {
        mean += s.features;
        ++n;
      }
    if (n == 0) throw std::invalid_argument("class " + std::to_string(c + 1) + " has no training samples");
    m.classes[c].push_back({mean / static_cast<double>(n), 0.0, n, 1.0});
  }
  return m;
}

/// Called at every alternation step with the encoder, the vectors it produced and the
/// clustering computed from them.
using EpochObserver =
    std::function<void(std::size_t epoch, const DenseEncoder&, const Dataset& encoded, const ClusterResult&)>;

struct HrlResult {
  DenseEncoder encoder;
  ClusterResult clustering;  // recomputed after the last update
  Dataset encoded;           // training set under the final encoder
  std::vector<double> loss_history;  // full-set L_gb before each epoch, plus the final value
};

namespace detail {

inline HyperParams epoch_cluster_params(const HyperParams& hp, std::size_t epoch) {
  HyperParams h = hp;
  h.seed = derive_seed(hp.seed, 100 + epoch);
  return h;
}

template <class Step>
void for_each_batch(const Dataset& raw, std::size_t batch_size, std::mt19937_64& rng, Step&& step) {
  std::vector<std::size_t> order(raw.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<LabeledVector> batch;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    batch.clear();
    for (std::size_t i = start; i < stop; ++i) batch.push_back(raw.samples[order[i]]);
    step(std::span<const LabeledVector>(batch));
  }
}

inline void check_training_set(const Dataset& raw) {
  if (raw.empty()) throw std::invalid_argument("training set is empty");
  if (raw.num_known < 1) throw std::invalid_argument("training set declares no known classes");
  if (!raw.known_only()) throw std::invalid_argument("training set contains unknown-class samples");
}

}  // namespace detail

/// Alternates granular-ball clustering of the current representation with one epoch of
/// mini-batch gradient descent on the nearest-sub-centroid loss.
inline HrlResult train_hrl(const Dataset& raw, const HyperParams& hp, const EpochObserver& observer = {}) {
  detail::check_training_set(raw);
  hp.validate();
  HrlResult r;
  r.encoder = DenseEncoder::init(raw.dim, hp.D, hp.seed);
  std::mt19937_64 shuffle_rng(derive_seed(hp.seed, 2));

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const Dataset encoded = r.encoder.encode(raw);
    const ClusterResult cr = cluster_adaptive(encoded, detail::epoch_cluster_params(hp, epoch));
    if (!cr.empty_classes.empty())
      warn("epoch " + std::to_string(epoch) + ": falling back to unfiltered balls for " +
           std::to_string(cr.empty_classes.size()) + " class(es)");
    const BoundaryModel protos = training_prototypes(cr, encoded, hp.metric);
    r.loss_history.push_back(loss_gb(encoded.samples, protos).loss);
    if (observer) observer(epoch, r.encoder, encoded, cr);

    detail::for_each_batch(raw, hp.batch_size, shuffle_rng, [&](std::span<const LabeledVector> batch) {
      const auto g = grad_loss(batch, r.encoder, protos);
      r.encoder.weight -= hp.learning_rate * g.d_weight;
      r.encoder.bias -= hp.learning_rate * g.d_bias;
    });
  }

  r.encoded = r.encoder.encode(raw);
  r.clustering = cluster_adaptive(r.encoded, detail::epoch_cluster_params(hp, hp.epochs));
  r.loss_history.push_back(loss_gb(r.encoded.samples, training_prototypes(r.clustering, r.encoded, hp.metric)).loss);
  return r;
}

/// K-way softmax head used only by the cross-entropy ablation.
struct LinearHead {
  Matrix weight;  // K x D
  Vector bias;    // K

  static LinearHead init(std::size_t d, std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(derive_seed(seed, 3));
    const double bound = 1.0 / std::sqrt(static_cast<double>(d));
    std::uniform_real_distribution<double> u(-bound, bound);
    LinearHead h;
    h.weight.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
    for (Eigen::Index r = 0; r < h.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < h.weight.cols(); ++c) h.weight(r, c) = u(rng);
    h.bias = Vector::Zero(static_cast<Eigen::Index>(k));
    return h;
  }

  Vector logits(const Vector& z) const { return weight * z + bias; }
};

struct CeGradients {
  Matrix d_weight;
  Vector d_bias;
  Matrix d_head_weight;
  Vector d_head_bias;
  double loss = 0.0;
};

inline CeGradients ce_grad(std::span<const LabeledVector> raw_batch, const DenseEncoder& enc,
                           const LinearHead& head) {
  if (raw_batch.empty()) throw std::invalid_argument("ce_grad: empty batch");
  CeGradients g;
  g.d_weight = Matrix::Zero(enc.weight.rows(), enc.weight.cols());
  g.d_bias = Vector::Zero(enc.bias.size());
  g.d_head_weight = Matrix::Zero(head.weight.rows(), head.weight.cols());
  g.d_head_bias = Vector::Zero(head.bias.size());
  const double inv_n = 1.0 / static_cast<double>(raw_batch.size());
  for (const auto& s : raw_batch) {
    if (s.label < 1 || s.label > head.weight.rows())
      throw std::invalid_argument("ce_grad: label outside known classes");
    const Vector a = enc.pre_activation(s.features);
    const Vector z = a.cwiseMax(0.0);
    const Vector l = head.logits(z);
    const double m = l.maxCoeff();
    Vector p = (l.array() - m).exp();
    const double sum = p.sum();
    p /= sum;
    g.loss += (m + std::log(sum) - l[s.label - 1]) * inv_n;
    Vector dl = p;
    dl[s.label - 1] -= 1.0;
    g.d_head_weight.noalias() += inv_n * dl * z.transpose();
    g.d_head_bias += inv_n * dl;
    const Vector dz = head.weight.transpose() * dl;
    const Vector da = (a.array() > 0.0).select(dz, 0.0);
    g.d_weight.noalias() += inv_n * da * s.features.transpose();
    g.d_bias += inv_n * da;
  }
  return g;
}

struct CeResult {
  DenseEncoder encoder;
  LinearHead head;
  std::vector<double> loss_history;  // mean batch loss per epoch
};

/// Encoder trained with a softmax cross-entropy head; the head is only kept for inspection.
inline CeResult train_ce_baseline(const Dataset& raw, const HyperParams& hp) {
  detail::check_training_set(raw);
  hp.validate();
  CeResult r;
  r.encoder = DenseEncoder::init(raw.dim, hp.D, hp.seed);
  r.head = LinearHead::init(hp.D, static_cast<std::size_t>(raw.num_known), hp.seed);
  std::mt19937_64 shuffle_rng(derive_seed(hp.seed, 2));
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    double total = 0.0;
    std::size_t batches = 0;
    detail::for_each_batch(raw, hp.batch_size, shuffle_rng, [&](std::span<const LabeledVector> batch) {
      const auto g = ce_grad(batch, r.encoder, r.head);
      r.encoder.weight -= hp.learning_rate * g.d_weight;
      r.encoder.bias -= hp.learning_rate * g.d_bias;
      r.head.weight -= hp.learning_rate * g.d_head_weight;
      r.head.bias -= hp.learning_rate * g.d_head_bias;
      total += g.loss;
      ++batches;
    });
    r.loss_history.push_back(total / static_cast<double>(batches));
  }
  return r;
}

}  // namespace mogb
