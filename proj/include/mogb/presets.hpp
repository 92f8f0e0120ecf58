#pragma once

#include "mogb/experiment.hpp"
#include "mogb/synthetic.hpp"

namespace mogb {

/// Ring-with-hole benchmark: three interlocked annuli (neighbouring centres 4.5 apart, so the
/// rings overlap in lenses) seen through a 64-d random Fourier lift, 200 intra-open points in
/// the holes and 200 inter-open points outside. Every class is known; the open samples only
/// appear in the test split.
inline ExperimentConfig ring_benchmark_config() {
  ExperimentConfig cfg;
  cfg.dataset_name = "ring";
  SyntheticSpec spec;
  spec.family = "ring";
  spec.num_classes = 3;
  spec.spacing = 4.5;
  spec.intra_open = 200;
  spec.inter_open = 200;
  spec.lift = "rff";
  cfg.synthetic = spec;
  cfg.known_class_ratio = 1.0;
  cfg.hp.metric = Metric::euclidean;
  cfg.hp.D = 32;
  cfg.hp.epochs = 20;
  cfg.hp.learning_rate = 0.2;
  cfg.ablations = {Ablation::full, Ablation::no_hrl, Ablation::no_mb, Ablation::no_hrl_no_mb};
  cfg.seeds = {1, 2, 3, 4, 5};
  return cfg;
}

}  // namespace mogb
