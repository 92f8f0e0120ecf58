// Trains on a small ring dataset and compares multi-granularity boundaries with one sphere per class.
#include <cstdio>

#include "mogb/mogb.hpp"

int main() {
  using namespace mogb;

  SyntheticSpec spec;
  spec.spacing = 4.5;  // neighbouring rings overlap
  spec.lift = "rff";
  const Dataset data = gen_synthetic(spec, 7);

  // Every geometric class is known; the hole and outside points are the unknowns.
  const SplitResult split = split_open(data, 1.0, 7);

  HyperParams hp;
  hp.metric = Metric::euclidean;
  hp.D = 32;
  hp.epochs = 20;
  hp.learning_rate = 0.2;
  hp.seed = 7;
  const HrlResult trained = train_hrl(split.train, hp);
  std::printf("loss %.4f -> %.4f over %zu epochs\n", trained.loss_history.front(), trained.loss_history.back(),
              hp.epochs);

  const Dataset test = trained.encoder.encode(split.test);
  std::vector<int> gold;
  for (const auto& s : test.samples) gold.push_back(s.label);

  auto score = [&](const char* name, const BoundaryModel& model) {
    std::vector<int> pred;
    for (const auto& p : classify_open_batch(test, model)) pred.push_back(p.label);
    const EvalReport r = evaluate(pred, gold, test.num_known);
    std::printf("%-8s boundaries=%-3zu %s  (%s)\n", name, model.total(), csv_metrics(r).c_str(), kCsvMetricsHeader);
  };
  score("multi", build_boundaries(trained.clustering, trained.encoded, hp.metric));
  score("single", build_single_boundary_baseline(trained.encoded, hp.metric));
}
