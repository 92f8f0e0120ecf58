#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mogb/boundary.hpp"
#include "mogb/cluster.hpp"
#include "mogb/encoder.hpp"
#include "mogb/eval.hpp"
#include "mogb/io.hpp"
#include "mogb/log.hpp"
#include "mogb/synthetic.hpp"
#include "mogb/types.hpp"

namespace mogb {

// ---------------------------------------------------------------------------
// Open-set split
// ---------------------------------------------------------------------------

struct SplitResult {
  Dataset train;
  Dataset valid;
  Dataset test;
  /// Original label -> dense label (1..K, or K+1 for every unknown class).
  std::map<int, int> remap;
  std::vector<int> known_original;
};

struct SplitOptions {
  double test_fraction = 0.3;
  double valid_fraction = 0.1;
};

/// Designates round(ratio * #classes) randomly chosen classes (at least one) as known.
/// Known classes are split per class into train/valid/test; unknown classes contribute the
/// same test fraction, relabelled K+1. Samples the source already marks as open go to test.
inline SplitResult split_open(const Dataset& ds, double ratio, std::uint64_t seed, SplitOptions opt = {}) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("known class ratio must lie in (0, 1]");
  if (!(opt.test_fraction > 0.0 && opt.test_fraction < 1.0))
    throw std::invalid_argument("test fraction must lie in (0, 1)");
  const int source_open = ds.unknown_label();
  std::map<int, std::vector<std::size_t>> by_class;
  std::vector<std::size_t> open_samples;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int y = ds.samples[i].label;
    if (ds.num_known > 0 && y == source_open)
      open_samples.push_back(i);
    else
      by_class[y].push_back(i);
  }
  if (by_class.size() < 2 && open_samples.empty())
    throw std::invalid_argument("split_open: need at least two classes");

  std::vector<int> classes;
  for (const auto& [c, idx] : by_class) classes.push_back(c);
  const auto n_known = static_cast<std::size_t>(
      std::max(1L, std::lround(ratio * static_cast<double>(classes.size()))));
  if (n_known == 0) throw std::invalid_argument("split_open: ratio yields no known classes");
  if (n_known >= classes.size() && open_samples.empty())
    throw std::invalid_argument("split_open: every class is known, nothing is left to test as unknown");

  std::mt19937_64 rng(derive_seed(seed, 10));
  std::vector<int> shuffled = classes;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  SplitResult r;
  r.known_original.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(std::min(n_known, classes.size())));
  std::sort(r.known_original.begin(), r.known_original.end());
  const int k = static_cast<int>(r.known_original.size());
  for (int i = 0; i < k; ++i) r.remap[r.known_original[static_cast<std::size_t>(i)]] = i + 1;
  for (int c : classes)
    if (!r.remap.count(c)) r.remap[c] = k + 1;
  if (!open_samples.empty()) r.remap[source_open] = k + 1;

  for (auto* d : {&r.train, &r.valid, &r.test}) {
    d->dim = ds.dim;
    d->num_known = k;
    d->stage = ds.stage;
  }

  std::vector<std::pair<std::size_t, int>> train_idx, valid_idx, test_idx;  // (source index, new label)
  for (int c : classes) {
    auto idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    const int label = r.remap[c];
    const auto n_test = std::min(idx.size(), static_cast<std::size_t>(std::lround(opt.test_fraction * static_cast<double>(idx.size()))));
    for (std::size_t i = 0; i < n_test; ++i) test_idx.emplace_back(idx[i], label);
    if (label > k) continue;
    const std::size_t rest = idx.size() - n_test;
    auto n_valid = static_cast<std::size_t>(std::lround(opt.valid_fraction * static_cast<double>(rest)));
    if (rest > 0 && n_valid >= rest) n_valid = rest - 1;
    for (std::size_t i = n_test; i < n_test + n_valid; ++i) valid_idx.emplace_back(idx[i], label);
    for (std::size_t i = n_test + n_valid; i < idx.size(); ++i) train_idx.emplace_back(idx[i], label);
  }
  for (auto i : open_samples) test_idx.emplace_back(i, k + 1);

  auto fill = [&](Dataset& d, std::vector<std::pair<std::size_t, int>>& idx) {
    std::sort(idx.begin(), idx.end());
    d.samples.reserve(idx.size());
    for (const auto& [i, label] : idx) d.samples.push_back({ds.samples[i].features, label});
  };
  fill(r.train, train_idx);
  fill(r.valid, valid_idx);
  fill(r.test, test_idx);
  for (int c = 1; c <= k; ++c) {
    const bool present = std::any_of(r.train.samples.begin(), r.train.samples.end(),
                                     [c](const LabeledVector& s) { return s.label == c; });
    if (!present) throw std::invalid_argument("split_open: known class " + std::to_string(c) + " has no training samples");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

enum class Ablation { full, no_hrl, no_mb, no_hrl_no_mb };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_hrl: return "no_hrl";
    case Ablation::no_mb: return "no_mb";
    case Ablation::no_hrl_no_mb: return "no_hrl_no_mb";
  }
  return "?";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no_hrl") return Ablation::no_hrl;
  if (s == "no_mb") return Ablation::no_mb;
  if (s == "no_hrl_no_mb" || s == "no_hrl+mb") return Ablation::no_hrl_no_mb;
  throw std::invalid_argument("unknown ablation: " + s);
}

inline bool uses_hrl(Ablation a) { return a == Ablation::full || a == Ablation::no_mb; }
inline bool uses_mb(Ablation a) { return a == Ablation::full || a == Ablation::no_hrl; }

struct Sweep {
  std::string param;
  std::vector<double> values;
};

/// Parameters applied only when building boundaries; sweeping them reuses the trained encoder.
inline bool is_boundary_param(const std::string& p) { return p == "p_t" || p == "n_t"; }

inline void set_param(HyperParams& hp, const std::string& name, double v) {
  auto as_count = [&](double x) {
    if (!(x >= 0.0) || x != std::floor(x)) throw std::invalid_argument(name + " must be a non-negative integer");
    return static_cast<std::size_t>(x);
  };
  if (name == "p_t") hp.p_t = v;
  else if (name == "n_t") hp.n_t = as_count(v);
  else if (name == "p_l") hp.p_l = v;
  else if (name == "n_l") hp.n_l = as_count(v);
  else if (name == "epochs") hp.epochs = as_count(v);
  else if (name == "batch_size") hp.batch_size = as_count(v);
  else if (name == "learning_rate") hp.learning_rate = v;
  else if (name == "D") hp.D = as_count(v);
  else throw std::invalid_argument("unknown sweep parameter: " + name);
}

struct ExperimentConfig {
  std::string dataset_name = "synthetic";
  std::string dataset_path;                 // GBEM or TSV; empty means synthetic
  std::optional<SyntheticSpec> synthetic;   // regenerated per seed
  double known_class_ratio = 0.25;
  SplitOptions split;
  HyperParams hp;
  std::vector<Ablation> ablations{Ablation::full};
  std::optional<Sweep> sweep;
  std::string output_dir;
  std::vector<std::uint64_t> seeds{0};
  OpenOptions open;

  void validate() const {
    if (!(known_class_ratio > 0.0 && known_class_ratio <= 1.0))
      throw std::invalid_argument("known_class_ratio must lie in (0, 1]");
    if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
    if (ablations.empty()) throw std::invalid_argument("at least one ablation is required");
    if (dataset_path.empty() && !synthetic) throw std::invalid_argument("config names no dataset");
    if (sweep && sweep->values.empty()) throw std::invalid_argument("sweep has no values");
    hp.validate();
  }
};

inline nlohmann::json to_json(const HyperParams& hp) {
  nlohmann::json j = {{"p_l", hp.p_l},   {"p_t", hp.p_t},     {"n_t", hp.n_t},
                      {"metric", std::string(to_string(hp.metric))},
                      {"seed", hp.seed}, {"D", hp.D},         {"epochs", hp.epochs},
                      {"batch_size", hp.batch_size},          {"learning_rate", hp.learning_rate}};
  j["n_l"] = hp.n_l ? nlohmann::json(*hp.n_l) : nlohmann::json(nullptr);
  return j;
}

inline void apply_json(HyperParams& hp, const nlohmann::json& j) {
  hp.p_l = j.value("p_l", hp.p_l);
  hp.p_t = j.value("p_t", hp.p_t);
  hp.n_t = j.value("n_t", hp.n_t);
  if (j.contains("n_l")) {
    if (j["n_l"].is_null()) hp.n_l.reset();
    else hp.n_l = j["n_l"].get<std::size_t>();
  }
  if (j.contains("metric")) hp.metric = parse_metric(j["metric"].get<std::string>());
  hp.seed = j.value("seed", hp.seed);
  hp.D = j.value("D", hp.D);
  hp.epochs = j.value("epochs", hp.epochs);
  hp.batch_size = j.value("batch_size", hp.batch_size);
  hp.learning_rate = j.value("learning_rate", hp.learning_rate);
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["dataset_name"] = c.dataset_name;
  j["dataset_path"] = c.dataset_path;
  j["synthetic"] = c.synthetic ? to_json(*c.synthetic) : nlohmann::json(nullptr);
  j["known_class_ratio"] = c.known_class_ratio;
  j["test_fraction"] = c.split.test_fraction;
  j["valid_fraction"] = c.split.valid_fraction;
  j["hyper"] = to_json(c.hp);
  std::vector<std::string> abl;
  for (auto a : c.ablations) abl.push_back(to_string(a));
  j["ablations"] = abl;
  j["sweep"] = c.sweep ? nlohmann::json{{"param", c.sweep->param}, {"values", c.sweep->values}} : nlohmann::json(nullptr);
  j["output_dir"] = c.output_dir;
  j["seeds"] = c.seeds;
  j["normalized_open"] = c.open.normalized;
  return j;
}

/// Overlays the keys present in `j` onto `c`.
inline void apply_json(ExperimentConfig& c, const nlohmann::json& j) {
  c.dataset_name = j.value("dataset_name", c.dataset_name);
  c.dataset_path = j.value("dataset_path", c.dataset_path);
  if (j.contains("synthetic")) {
    if (j["synthetic"].is_null()) c.synthetic.reset();
    else c.synthetic = synthetic_spec_from_json(j["synthetic"]);
  }
  c.known_class_ratio = j.value("known_class_ratio", c.known_class_ratio);
  c.split.test_fraction = j.value("test_fraction", c.split.test_fraction);
  c.split.valid_fraction = j.value("valid_fraction", c.split.valid_fraction);
  if (j.contains("hyper")) apply_json(c.hp, j["hyper"]);
  if (j.contains("ablations")) {
    c.ablations.clear();
    for (const auto& a : j["ablations"]) c.ablations.push_back(parse_ablation(a.get<std::string>()));
  }
  if (j.contains("sweep")) {
    if (j["sweep"].is_null()) c.sweep.reset();
    else c.sweep = Sweep{j["sweep"].at("param").get<std::string>(), j["sweep"].at("values").get<std::vector<double>>()};
  }
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
  c.open.normalized = j.value("normalized_open", c.open.normalized);
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

struct CellResult {
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::full;
  std::optional<double> sweep_value;
  HyperParams hp;
  bool ok = false;
  std::string error;
  EvalReport report;
  std::vector<double> loss_history;
  std::size_t train_size = 0, valid_size = 0, test_size = 0;
  std::size_t terminal_balls = 0;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  bool all_ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.ok; });
  }
};

inline constexpr const char* kResultsCsvHeader =
    "dataset,ratio,seed,ablation,p_t,n_t,n_boundaries,acc,f1_all,f1_u,f1_k";

namespace detail {

inline std::string fmt_double(double v, const char* f = "%g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string cell_name(const ExperimentConfig& cfg, const CellResult& c) {
  std::string s = cfg.dataset_name + "_seed" + std::to_string(c.seed) + "_" + to_string(c.ablation);
  if (cfg.sweep && c.sweep_value) s += "_" + cfg.sweep->param + fmt_double(*c.sweep_value);
  return s;
}

struct TrainedRepresentation {
  DenseEncoder encoder;
  Dataset encoded_train;
  std::optional<ClusterResult> clustering;
  std::vector<double> loss_history;
};

inline std::string training_key(bool hrl, const HyperParams& hp) {
  return (hrl ? "hrl|" : "ce|") + to_json(hp).dump();
}

}  // namespace detail

inline std::string csv_row(const ExperimentConfig& cfg, const CellResult& c) {
  std::ostringstream row;
  row << cfg.dataset_name << ',' << detail::fmt_double(cfg.known_class_ratio, "%.2f") << ',' << c.seed << ','
      << to_string(c.ablation) << ',' << detail::fmt_double(c.hp.p_t, "%.2f") << ',' << c.hp.n_t << ',';
  if (c.ok)
    row << c.report.n_boundaries << ',' << csv_metrics(c.report);
  else
    row << "NA,NA,NA,NA,NA";
  return row.str();
}

inline nlohmann::json to_json(const ExperimentConfig& cfg, const CellResult& c) {
  nlohmann::json j = {{"dataset", cfg.dataset_name},
                      {"ratio", cfg.known_class_ratio},
                      {"seed", c.seed},
                      {"ablation", to_string(c.ablation)},
                      {"hyper", to_json(c.hp)},
                      {"ok", c.ok},
                      {"sizes", {{"train", c.train_size}, {"valid", c.valid_size}, {"test", c.test_size}}}};
  if (cfg.sweep && c.sweep_value) j["sweep"] = {{"param", cfg.sweep->param}, {"value", *c.sweep_value}};
  if (c.ok) {
    j["report"] = to_json(c.report);
    j["loss_history"] = c.loss_history;
    j["terminal_balls"] = c.terminal_balls;
  } else {
    j["error"] = c.error;
  }
  return j;
}

inline Dataset load_experiment_dataset(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (!cfg.dataset_path.empty()) return load_dataset(cfg.dataset_path);
  return gen_synthetic(*cfg.synthetic, derive_seed(seed, 20));
}

/// Runs every (seed x ablation x sweep value) cell: split, train, build boundaries, classify
/// open-set, evaluate. A failing cell is recorded and the sweep continues. When
/// cfg.output_dir is set, per-cell JSON goes to <dir>/cells/ and the aggregate to <dir>/results.csv.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult out;
  const std::vector<std::optional<double>> sweep_values = [&] {
    std::vector<std::optional<double>> v;
    if (cfg.sweep)
      for (double x : cfg.sweep->values) v.emplace_back(x);
    else
      v.emplace_back(std::nullopt);
    return v;
  }();

  for (auto seed : cfg.seeds) {
    std::optional<SplitResult> split;
    std::string split_error;
    try {
      split = split_open(load_experiment_dataset(cfg, seed), cfg.known_class_ratio, seed, cfg.split);
    } catch (const std::exception& e) {
      split_error = e.what();
    }
    std::map<std::string, detail::TrainedRepresentation> cache;

    for (auto ablation : cfg.ablations) {
      for (const auto& sv : sweep_values) {
        CellResult cell;
        cell.seed = seed;
        cell.ablation = ablation;
        cell.sweep_value = sv;
        cell.hp = cfg.hp;
        cell.hp.seed = derive_seed(cfg.hp.seed, seed);
        try {
          if (!split) throw std::runtime_error("split failed: " + split_error);
          if (sv) set_param(cell.hp, cfg.sweep->param, *sv);
          cell.hp.validate();
          cell.train_size = split->train.size();
          cell.valid_size = split->valid.size();
          cell.test_size = split->test.size();

          HyperParams train_hp = cell.hp;
          if (cfg.sweep && is_boundary_param(cfg.sweep->param)) {
            train_hp.p_t = cfg.hp.p_t;
            train_hp.n_t = cfg.hp.n_t;
          }
          const bool hrl = uses_hrl(ablation);
          const auto key = detail::training_key(hrl, train_hp);
          auto it = cache.find(key);
          if (it == cache.end()) {
            detail::TrainedRepresentation rep;
            if (hrl) {
              auto r = train_hrl(split->train, train_hp);
              rep.encoder = std::move(r.encoder);
              rep.encoded_train = std::move(r.encoded);
              rep.clustering = std::move(r.clustering);
              rep.loss_history = std::move(r.loss_history);
            } else {
              auto r = train_ce_baseline(split->train, train_hp);
              rep.encoder = std::move(r.encoder);
              rep.encoded_train = rep.encoder.encode(split->train);
              rep.loss_history = std::move(r.loss_history);
            }
            it = cache.emplace(key, std::move(rep)).first;
          }
          auto& rep = it->second;
          cell.loss_history = rep.loss_history;

          BoundaryModel model;
          if (uses_mb(ablation)) {
            if (!rep.clustering)
              rep.clustering = cluster_adaptive(rep.encoded_train, detail::epoch_cluster_params(train_hp, train_hp.epochs));
            const auto cr = refilter(*rep.clustering, cell.hp.p_t, cell.hp.n_t, split->train.num_known);
            cell.terminal_balls = cr.balls.size();
            model = build_boundaries(cr, rep.encoded_train, cell.hp.metric);
          } else {
            model = build_single_boundary_baseline(rep.encoded_train, cell.hp.metric);
          }

          const Dataset test_z = rep.encoder.encode(split->test);
          const auto preds = classify_open_batch(test_z, model, cfg.open);
          std::vector<int> pred_labels, gold;
          pred_labels.reserve(preds.size());
          gold.reserve(preds.size());
          for (std::size_t i = 0; i < preds.size(); ++i) {
            pred_labels.push_back(preds[i].label);
            gold.push_back(test_z.samples[i].label);
          }
          cell.report = evaluate(pred_labels, gold, split->test.num_known);
          cell.report.n_boundaries = model.total();
          if (cell.report.total() != split->test.size())
            throw std::logic_error("confusion matrix does not account for every test sample");
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.error = e.what();
          warn("cell " + detail::cell_name(cfg, cell) + " failed: " + e.what());
        }
        out.cells.push_back(std::move(cell));
      }
    }
  }

  if (!cfg.output_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(cfg.output_dir) / "cells");
    for (const auto& c : out.cells)
      write_json(to_json(cfg, c), (fs::path(cfg.output_dir) / "cells" / (detail::cell_name(cfg, c) + ".json")).string());
    std::ofstream csv(fs::path(cfg.output_dir) / "results.csv", std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write results.csv in " + cfg.output_dir);
    csv << kResultsCsvHeader << '\n';
    for (const auto& c : out.cells) csv << csv_row(cfg, c) << '\n';
  }
  return out;
}

}  // namespace mogb
