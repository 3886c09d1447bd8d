#pragma once

#include <optional>
#include <string>

#include "ensdiv/data.hpp"
#include "ensdiv/objectives.hpp"

namespace ensdiv {

struct EnsembleConfig {
  std::size_t num_learners = 5;
  std::vector<std::size_t> hidden = {20};
  AggregationMode mode = AggregationMode::MeanOutput;
  TaskKind task = TaskKind::Regression;
  std::vector<double> weights;             // empty -> equal weights
  std::vector<std::uint64_t> init_seeds;   // empty -> derived from TrainConfig seed

  void validate() const;
};

struct TrainConfig {
  Optimizer optimizer = SgdMomentum{0.01, 0.9};
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;  // early-stop evaluations without improvement
  double weight_decay = 0.0;
  double learner_dropout_p = 0.0;  // per-batch independent drop probability
  std::uint64_t seed = 1;

  void validate() const;
};

/// Either the beta-interpolated objective or gradient-adjusted targets.
struct TrainingObjective {
  enum class Kind { Beta, Gat };
  Kind kind = Kind::Beta;
  double beta = 1.0;
  std::optional<LossKind> loss;  // default: MSE or cross-entropy by mode
  GatObjective gat;

  static TrainingObjective beta_objective(double beta, std::optional<LossKind> loss = {});
  static TrainingObjective gat_objective(double alpha, GatObjective::Variant variant);
};

struct EpochRecord {
  Decomposition train;
  std::optional<Decomposition> val, test;
  std::vector<double> learner_train_losses;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  std::string stop_reason;
};

struct TrainResult {
  EnsembleModel model;        // parameters from the best validation epoch
  EnsembleModel final_model;  // parameters after the last completed epoch
  TrainHistory history;
};

/// Builds the ensemble from the config (layer sizes filled in from the
/// dataset) and runs the mini-batch loop. Early stopping monitors the
/// ensemble loss on the validation split (train split if none).
TrainResult train_ensemble(const Dataset& dataset, const EnsembleConfig& ens_cfg,
                           const TrainingObjective& objective, const TrainConfig& cfg);

/// Constructs an initialized (untrained) model for the dataset.
EnsembleModel init_ensemble(const Dataset& dataset, const EnsembleConfig& ens_cfg,
                            std::uint64_t seed);

struct EvalResult {
  Decomposition decomp;
  std::vector<double> learner_losses;
  double accuracy = 0.0;
  bool has_accuracy = false;
};

EvalResult evaluate(const EnsembleModel& model, const Dataset& dataset, Split split,
                    LossKind kind);

LossKind objective_loss_kind(const TrainingObjective& objective, AggregationMode mode);

/// Per-learner init seed used when EnsembleConfig::init_seeds is empty.
std::uint64_t derived_learner_seed(std::uint64_t seed, std::size_t learner);

}  // namespace ensdiv
