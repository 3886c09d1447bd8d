#pragma once

#include "ensdiv/train.hpp"

namespace ensdiv {

struct DebiasReport {
  std::vector<std::vector<double>> biases;  // per learner, per output dim
  double div_before = 0.0;
  double div_after = 0.0;
  bool percent_defined = false;  // false when div_before is numerically zero
  double percent_removed = 0.0;
  double max_aggregate_change = 0.0;
};

/// Subtracts the per-learner constant b_j = mean(f_j) - mean(fbar), computed
/// on the training split, and reports diversity on the requested split before
/// and after. The aggregate prediction is unchanged by construction.
/// Mean-output regression only.
DebiasReport debias(const EnsembleModel& model, const Dataset& dataset, Split report_split);

/// Per-learner debiased predictions on a split (f_j minus its training bias).
std::vector<Mat> debiased_predictions(const EnsembleModel& model, const Dataset& dataset,
                                      Split split);

struct DropoutCell {
  double fraction = 0.0;
  std::size_t trials = 0;
  double mean_relative_err_increase = 0.0;
};

/// Test-time learner dropout: for each fraction, removes round(p*M) random
/// learners (at least one kept) `trials` times and averages the relative
/// increase of the ensemble loss over the full-ensemble loss.
std::vector<DropoutCell> dropout_codependence(const EnsembleModel& model, const Dataset& dataset,
                                              Split split, const std::vector<double>& fractions,
                                              std::size_t trials, Rng& rng, LossKind kind);

struct GapPoint {
  std::size_t epoch = 0;
  double train_err = 0.0;
  double test_err = 0.0;
  double gap = 0.0;  // test_err - train_err
  Decomposition train, test;
};

/// Generalization-gap series from a recorded training history.
std::vector<GapPoint> gap_series(const TrainHistory& history);

struct SweepRow {
  double beta = 0.0;
  std::uint64_t seed = 0;
  Decomposition train, val, test;
  double test_accuracy = 0.0;
  bool has_accuracy = false;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

struct SweepCellResult {
  SweepRow row;
  TrainHistory history;
  EnsembleModel model;
};

/// Trains one model per (beta, seed) pair and evaluates every split.
/// Deterministic given seeds; cells are independent, so `workers` > 1 only
/// changes wall time, not results.
std::vector<SweepCellResult> beta_sweep(const Dataset& dataset, const EnsembleConfig& ens_cfg,
                                        const std::vector<double>& betas,
                                        const std::vector<std::uint64_t>& seeds,
                                        const TrainConfig& train_cfg, int workers = 1);

}  // namespace ensdiv
