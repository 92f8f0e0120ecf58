// Command-line driver: data generation, the individual pipeline stages, and full experiments.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mogb/mogb.hpp"

namespace fs = std::filesystem;
using namespace mogb;

namespace {

/// Hyperparameter flags shared by every subcommand that clusters or trains. Only flags the
/// user actually passed are applied, so they layer over a config file.
struct HyperFlags {
  double p_l = 0, p_t = 0, lr = 0;
  std::size_t n_l = 0, n_t = 0, d = 0, epochs = 0, batch = 0;
  std::uint64_t seed = 0;
  std::string metric;
  std::vector<CLI::Option*> opts;

  void add(CLI::App& app) {
    opts = {app.add_option("--p-l", p_l, "purity limit for splitting"),
            app.add_option("--n-l", n_l, "sample-count limit for splitting"),
            app.add_option("--p-t", p_t, "quality-filter purity threshold"),
            app.add_option("--n-t", n_t, "quality-filter count threshold (strict)"),
            app.add_option("--metric", metric, "cosine_distance or euclidean"),
            app.add_option("--hp-seed", seed, "base seed for clustering and training"),
            app.add_option("--dim", d, "encoder output dimension D"),
            app.add_option("--epochs", epochs),
            app.add_option("--batch-size", batch),
            app.add_option("--lr", lr, "learning rate")};
  }

  void apply(HyperParams& hp) const {
    if (opts[0]->count()) hp.p_l = p_l;
    if (opts[1]->count()) hp.n_l = n_l;
    if (opts[2]->count()) hp.p_t = p_t;
    if (opts[3]->count()) hp.n_t = n_t;
    if (opts[4]->count()) hp.metric = parse_metric(metric);
    if (opts[5]->count()) hp.seed = seed;
    if (opts[6]->count()) hp.D = d;
    if (opts[7]->count()) hp.epochs = epochs;
    if (opts[8]->count()) hp.batch_size = batch;
    if (opts[9]->count()) hp.learning_rate = lr;
  }
};

/// Experiment flags for `run` and `sweep`: defaults < --preset < --config < flags.
struct ExperimentFlags {
  std::string config_path, preset, dataset, name, out;
  double ratio = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> ablations;
  std::string family;
  bool normalized = false;
  HyperFlags hyper;
  CLI::Option *o_dataset, *o_name, *o_ratio, *o_seeds, *o_abl, *o_family, *o_norm, *o_out;

  void add(CLI::App& app) {
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--preset", preset, "start from a built-in config (ring)")->check(CLI::IsMember({"ring"}));
    o_dataset = app.add_option("--dataset", dataset, "GBEM or .tsv dataset; omit for synthetic data");
    o_name = app.add_option("--name", name, "dataset name written to the CSV");
    o_ratio = app.add_option("--ratio", ratio, "known class ratio in (0, 1]");
    o_seeds = app.add_option("--seeds", seeds, "experiment seeds")->delimiter(',');
    o_abl = app.add_option("--ablations", ablations, "full,no_hrl,no_mb,no_hrl_no_mb")->delimiter(',');
    o_family = app.add_option("--family", family, "synthetic family when no dataset is given");
    o_norm = app.add_flag("--normalized-open", normalized, "rank satisfied spheres by distance / radius");
    o_out = app.add_option("--out", out, "output directory");
    hyper.add(app);
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    cfg.synthetic = SyntheticSpec{};
    if (preset == "ring") cfg = ring_benchmark_config();
    if (!config_path.empty()) apply_json(cfg, read_json(config_path));
    if (o_dataset->count()) {
      cfg.dataset_path = dataset;
      cfg.synthetic.reset();
      if (!o_name->count() && cfg.dataset_name == "synthetic") cfg.dataset_name = fs::path(dataset).stem().string();
    }
    if (o_family->count()) {
      if (!cfg.synthetic) cfg.synthetic = SyntheticSpec{};
      cfg.synthetic->family = family;
    }
    if (o_name->count()) cfg.dataset_name = name;
    if (o_ratio->count()) cfg.known_class_ratio = ratio;
    if (o_seeds->count()) cfg.seeds = seeds;
    if (o_abl->count()) {
      cfg.ablations.clear();
      for (const auto& a : ablations) cfg.ablations.push_back(parse_ablation(a));
    }
    if (o_norm->count()) cfg.open.normalized = normalized;
    if (o_out->count()) cfg.output_dir = out;
    hyper.apply(cfg.hp);
    cfg.validate();
    return cfg;
  }
};

int report_experiment(const ExperimentConfig& cfg, const ExperimentResult& r) {
  std::cout << kResultsCsvHeader << '\n';
  for (const auto& c : r.cells) std::cout << csv_row(cfg, c) << '\n';
  std::size_t failed = 0;
  for (const auto& c : r.cells) failed += !c.ok;
  if (failed) std::cerr << failed << " of " << r.cells.size() << " cells failed\n";
  return failed ? 1 : 0;
}

std::vector<int> read_predictions(const std::string& path) {
  const auto j = read_json(path);
  return j.at("predictions").get<std::vector<int>>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-granularity open intent classification: granular-ball clustering, "
               "nearest-sub-centroid training and open-set inference"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic open-set dataset");
  std::string synth_spec, synth_out, family;
  std::uint64_t synth_seed = 0;
  SyntheticSpec spec;
  synth->add_option("--spec", synth_spec, "JSON generator spec")->check(CLI::ExistingFile);
  auto* o_family = synth->add_option("--family", family, "ring, crescent or gaussian_mixture");
  synth->add_option("--seed", synth_seed);
  auto* o_classes = synth->add_option("--classes", spec.num_classes);
  auto* o_per = synth->add_option("--per-class", spec.per_class);
  auto* o_intra = synth->add_option("--intra-open", spec.intra_open);
  auto* o_inter = synth->add_option("--inter-open", spec.inter_open);
  auto* o_spacing = synth->add_option("--spacing", spec.spacing);
  auto* o_lift = synth->add_option("--lift", spec.lift, "none or rff");
  synth->add_option("--out", synth_out, "output .gbem or .tsv")->required();

  // split
  auto* split = app.add_subcommand("split", "designate known classes and write train/valid/test");
  std::string split_data, split_out;
  double split_ratio = 0.25;
  std::uint64_t split_seed = 0;
  split->add_option("--data", split_data)->required()->check(CLI::ExistingFile);
  split->add_option("--ratio", split_ratio, "known class ratio");
  split->add_option("--seed", split_seed);
  split->add_option("--out", split_out, "output directory")->required();

  // cluster
  auto* cluster = app.add_subcommand("cluster", "adaptive granular-ball clustering of a training set");
  std::string cluster_data, cluster_out;
  HyperFlags cluster_hp;
  cluster->add_option("--data", cluster_data)->required()->check(CLI::ExistingFile);
  cluster->add_option("--out", cluster_out, "output JSON")->required();
  cluster_hp.add(*cluster);

  // train
  auto* train = app.add_subcommand("train", "train the encoder and build decision boundaries");
  std::string train_data, train_out, train_ablation = "full";
  HyperFlags train_hp;
  train->add_option("--data", train_data)->required()->check(CLI::ExistingFile);
  train->add_option("--ablation", train_ablation, "full, no_hrl, no_mb or no_hrl_no_mb");
  train->add_option("--out", train_out, "output directory")->required();
  train_hp.add(*train);

  // infer
  auto* infer = app.add_subcommand("infer", "open-set classification with a trained model");
  std::string infer_model, infer_data, infer_out;
  bool infer_norm = false;
  infer->add_option("--model", infer_model, "directory written by `train`")->required()->check(CLI::ExistingDirectory);
  infer->add_option("--data", infer_data)->required()->check(CLI::ExistingFile);
  infer->add_option("--out", infer_out, "predictions JSON")->required();
  infer->add_flag("--normalized-open", infer_norm);

  // eval
  auto* eval = app.add_subcommand("eval", "score predictions against gold labels");
  std::string eval_pred, eval_data, eval_out;
  eval->add_option("--predictions", eval_pred)->required()->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "labelled test set")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "report JSON");

  // run / sweep
  auto* run = app.add_subcommand("run", "full pipeline over seeds x ablations");
  ExperimentFlags run_flags;
  run_flags.add(*run);
  auto* sweep = app.add_subcommand("sweep", "sensitivity sweep over one hyperparameter");
  ExperimentFlags sweep_flags;
  std::string sweep_param;
  std::vector<double> sweep_values;
  sweep_flags.add(*sweep);
  sweep->add_option("--param", sweep_param, "p_t, n_t, p_l, n_l, epochs, batch_size, learning_rate or D");
  sweep->add_option("--values", sweep_values)->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      SyntheticSpec s;
      if (!synth_spec.empty()) s = synthetic_spec_from_json(read_json(synth_spec));
      if (o_family->count()) s.family = family;
      if (o_classes->count()) s.num_classes = spec.num_classes;
      if (o_per->count()) s.per_class = spec.per_class;
      if (o_intra->count()) s.intra_open = spec.intra_open;
      if (o_inter->count()) s.inter_open = spec.inter_open;
      if (o_spacing->count()) s.spacing = spec.spacing;
      if (o_lift->count()) s.lift = spec.lift;
      const auto ds = gen_synthetic(s, synth_seed);
      save_dataset(ds, synth_out);
      std::cout << "wrote " << ds.size() << " samples (D_in=" << ds.dim << ", K=" << ds.num_known << ") to "
                << synth_out << '\n';
      return 0;
    }

    if (*split) {
      const auto r = split_open(load_dataset(split_data), split_ratio, split_seed);
      fs::create_directories(split_out);
      save_embeddings(r.train, (fs::path(split_out) / "train.gbem").string());
      save_embeddings(r.valid, (fs::path(split_out) / "valid.gbem").string());
      save_embeddings(r.test, (fs::path(split_out) / "test.gbem").string());
      nlohmann::json remap = nlohmann::json::object();
      for (const auto& [from, to] : r.remap) remap[std::to_string(from)] = to;
      write_json({{"K", r.train.num_known}, {"known_original", r.known_original}, {"remap", remap}},
                 (fs::path(split_out) / "remap.json").string());
      std::cout << "K=" << r.train.num_known << " train=" << r.train.size() << " valid=" << r.valid.size()
                << " test=" << r.test.size() << '\n';
      return 0;
    }

    if (*cluster) {
      HyperParams hp;
      cluster_hp.apply(hp);
      const auto ds = load_dataset(cluster_data);
      const auto r = cluster_adaptive(ds, hp);
      write_json(to_json(r), cluster_out);
      std::cout << "m=" << r.balls.size() << " filtered=" << r.filtered.size() << " splits=" << r.splits << '\n';
      return 0;
    }

    if (*train) {
      HyperParams hp;
      train_hp.apply(hp);
      const auto ablation = parse_ablation(train_ablation);
      const auto raw = load_dataset(train_data);
      DenseEncoder enc;
      Dataset encoded;
      std::optional<ClusterResult> cr;
      std::vector<double> losses;
      if (uses_hrl(ablation)) {
        auto r = train_hrl(raw, hp);
        enc = std::move(r.encoder);
        encoded = std::move(r.encoded);
        cr = std::move(r.clustering);
        losses = std::move(r.loss_history);
      } else {
        auto r = train_ce_baseline(raw, hp);
        enc = std::move(r.encoder);
        encoded = enc.encode(raw);
        losses = std::move(r.loss_history);
      }
      BoundaryModel model;
      if (uses_mb(ablation)) {
        if (!cr) cr = cluster_adaptive(encoded, detail::epoch_cluster_params(hp, hp.epochs));
        model = build_boundaries(*cr, encoded, hp.metric);
      } else {
        model = build_single_boundary_baseline(encoded, hp.metric);
      }
      fs::create_directories(train_out);
      write_json(to_json(enc, hp.seed, hp.epochs), (fs::path(train_out) / "encoder.json").string());
      write_json(to_json(model), (fs::path(train_out) / "boundaries.json").string());
      write_json({{"ablation", train_ablation}, {"hyper", to_json(hp)}, {"loss_history", losses}},
                 (fs::path(train_out) / "training.json").string());
      std::cout << "boundaries=" << model.total() << " final_loss=" << (losses.empty() ? 0.0 : losses.back()) << '\n';
      return 0;
    }

    if (*infer) {
      const auto enc = encoder_from_json(read_json((fs::path(infer_model) / "encoder.json").string()));
      const auto model = boundary_model_from_json(read_json((fs::path(infer_model) / "boundaries.json").string()));
      const auto z = enc.encode(load_dataset(infer_data));
      const auto preds = classify_open_batch(z, model, {.normalized = infer_norm});
      std::vector<int> labels;
      std::vector<double> dists;
      for (const auto& p : preds) {
        labels.push_back(p.label);
        dists.push_back(std::isfinite(p.distance) ? p.distance : -1.0);
      }
      write_json({{"K", model.num_classes()}, {"predictions", labels}, {"distance", dists}}, infer_out);
      std::cout << "classified " << labels.size() << " samples\n";
      return 0;
    }

    if (*eval) {
      const auto preds = read_predictions(eval_pred);
      const auto ds = load_dataset(eval_data);
      std::vector<int> gold;
      for (const auto& s : ds.samples) gold.push_back(s.label);
      const auto r = evaluate(preds, gold, ds.num_known);
      if (!eval_out.empty()) write_json(to_json(r), eval_out);
      std::cout << kCsvMetricsHeader << '\n' << csv_metrics(r) << '\n';
      return 0;
    }

    if (*run) {
      const auto cfg = run_flags.build();
      return report_experiment(cfg, run_experiment(cfg));
    }

    if (*sweep) {
      auto cfg = sweep_flags.build();
      if (!sweep_param.empty()) cfg.sweep = Sweep{sweep_param, sweep_values};
      if (!cfg.sweep) throw std::invalid_argument("sweep needs --param and --values or a config sweep block");
      cfg.validate();
      return report_experiment(cfg, run_experiment(cfg));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
