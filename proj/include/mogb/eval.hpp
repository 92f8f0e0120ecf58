#pragma once

#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mogb {

struct EvalReport {
  int num_known = 0;
  double acc = 0.0;
  double f1_all = 0.0;      // macro over K+1 classes
  double f1_known = 0.0;    // macro over 1..K
  double f1_unknown = 0.0;  // class K+1 alone
  std::vector<double> per_class_f1;
  /// confusion[gold-1][pred-1], (K+1) x (K+1)
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t n_boundaries = 0;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : confusion)
      for (auto v : row) n += v;
    return n;
  }
};

/// Per-class F1 is 2TP / (2TP + FP + FN), and 0 when that denominator is 0.
inline EvalReport evaluate(std::span<const int> predictions, std::span<const int> gold, int num_known) {
  if (predictions.size() != gold.size())
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(gold.size()) + " gold labels");
  if (num_known < 1) throw std::invalid_argument("evaluate: need at least one known class");
  const auto n_cls = static_cast<std::size_t>(num_known + 1);
  EvalReport r;
  r.num_known = num_known;
  r.confusion.assign(n_cls, std::vector<std::size_t>(n_cls, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int g = gold[i];
    const int p = predictions[i];
    if (g < 1 || g > num_known + 1 || p < 1 || p > num_known + 1)
      throw std::invalid_argument("evaluate: label out of range at index " + std::to_string(i));
    ++r.confusion[static_cast<std::size_t>(g - 1)][static_cast<std::size_t>(p - 1)];
    correct += (g == p);
  }
  r.acc = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());

  r.per_class_f1.resize(n_cls);
  for (std::size_t c = 0; c < n_cls; ++c) {
    const double tp = static_cast<double>(r.confusion[c][c]);
    double fp = 0.0, fn = 0.0;
    for (std::size_t o = 0; o < n_cls; ++o) {
      if (o == c) continue;
      fp += static_cast<double>(r.confusion[o][c]);
      fn += static_cast<double>(r.confusion[c][o]);
    }
    const double denom = 2.0 * tp + fp + fn;
    r.per_class_f1[c] = denom > 0.0 ? 2.0 * tp / denom : 0.0;
  }
  double known_sum = 0.0;
  for (std::size_t c = 0; c + 1 < n_cls; ++c) known_sum += r.per_class_f1[c];
  r.f1_unknown = r.per_class_f1.back();
  r.f1_known = known_sum / static_cast<double>(num_known);
  r.f1_all = (known_sum + r.f1_unknown) / static_cast<double>(n_cls);
  return r;
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"K", r.num_known},
          {"acc", r.acc},
          {"f1_all", r.f1_all},
          {"f1_unknown", r.f1_unknown},
          {"f1_known", r.f1_known},
          {"per_class_f1", r.per_class_f1},
          {"confusion", r.confusion},
          {"n_boundaries", r.n_boundaries}};
}

/// Percentages with two decimals: "Acc,F1-All,F1-U,F1-K".
inline std::string csv_metrics(const EvalReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%.2f,%.2f,%.2f,%.2f", 100.0 * r.acc, 100.0 * r.f1_all,
                100.0 * r.f1_unknown, 100.0 * r.f1_known);
  return buf;
}

inline constexpr const char* kCsvMetricsHeader = "acc,f1_all,f1_u,f1_k";

}  // namespace mogb
