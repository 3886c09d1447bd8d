#include "ensdiv/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ensdiv {

namespace {

constexpr std::uint64_t kBatchStreamTag = 0xba7c4e5000001ULL;
constexpr std::uint64_t kDropoutStreamTag = 0xd409007000002ULL;

}  // namespace

void EnsembleConfig::validate() const {
  if (num_learners < 2) throw ConfigError("ensemble config: need at least 2 learners");
  if (!weights.empty() && weights.size() != num_learners)
    throw ConfigError("ensemble config: weight count does not match learner count");
  if (!init_seeds.empty() && init_seeds.size() != num_learners)
    throw ConfigError("ensemble config: init seed count does not match learner count");
  const bool classification_mode = mode != AggregationMode::MeanOutput;
  if (classification_mode != (task == TaskKind::Classification))
    throw ConfigError("ensemble config: aggregation mode incompatible with task kind");
}

void TrainConfig::validate() const {
  if (optimizer_lr(optimizer) <= 0.0) throw ConfigError("train config: learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("train config: batch size must be >= 1");
  if (patience < 1) throw ConfigError("train config: patience must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("train config: weight decay must be >= 0");
  if (learner_dropout_p < 0.0 || learner_dropout_p >= 1.0)
    throw ConfigError("train config: learner dropout must lie in [0, 1)");
}

TrainingObjective TrainingObjective::beta_objective(double beta, std::optional<LossKind> loss) {
  TrainingObjective o;
  o.kind = Kind::Beta;
  o.beta = beta;
  o.loss = loss;
  return o;
}

TrainingObjective TrainingObjective::gat_objective(double alpha, GatObjective::Variant variant) {
  TrainingObjective o;
  o.kind = Kind::Gat;
  o.gat.alpha = alpha;
  o.gat.variant = variant;
  return o;
}

LossKind objective_loss_kind(const TrainingObjective& objective, AggregationMode mode) {
  if (objective.kind == TrainingObjective::Kind::Gat) return LossKind::MSE;
  return objective.loss.value_or(default_loss_for(mode));
}

std::uint64_t derived_learner_seed(std::uint64_t seed, std::size_t learner) {
  return Rng::derive_seed(seed, learner);
}

EnsembleModel init_ensemble(const Dataset& dataset, const EnsembleConfig& ens_cfg,
                            std::uint64_t seed) {
  ens_cfg.validate();
  if (ens_cfg.task != dataset.task)
    throw ConfigError("init_ensemble: config task does not match dataset task");

  EnsembleModel model;
  model.mode = ens_cfg.mode;
  model.task = ens_cfg.task;
  model.config.layer_sizes.push_back(dataset.num_features());
  for (std::size_t h : ens_cfg.hidden) model.config.layer_sizes.push_back(h);
  model.config.layer_sizes.push_back(dataset.num_outputs());
  model.config.validate();

  if (ens_cfg.weights.empty()) {
    model.weights.assign(ens_cfg.num_learners, 1.0 / static_cast<double>(ens_cfg.num_learners));
  } else {
    model.weights = ens_cfg.weights;
  }
  for (std::size_t j = 0; j < ens_cfg.num_learners; ++j) {
    const std::uint64_t learner_seed =
        ens_cfg.init_seeds.empty() ? derived_learner_seed(seed, j) : ens_cfg.init_seeds[j];
    Rng rng(learner_seed);
    model.learners.push_back(init_mlp(model.config, rng));
  }
  model.validate();
  return model;
}

EvalResult evaluate(const EnsembleModel& model, const Dataset& dataset, Split split,
                    LossKind kind) {
  const auto& idx = dataset.indices(split);
  if (idx.empty()) throw ConfigError("evaluate: empty split");
  const Mat x = dataset.x.select_rows(idx);
  const Mat y = dataset.y.select_rows(idx);
  const EnsembleOutputs outputs = ensemble_predict(model, x);

  EvalResult res;
  res.decomp = decompose(kind, outputs, y);
  res.learner_losses.resize(model.size(), 0.0);
  for (std::size_t i = 0; i < outputs.active.size(); ++i) {
    const std::size_t j = outputs.active[i];
    const Mat& pred =
        model.mode == AggregationMode::MeanOutput ? outputs.scores[j] : outputs.probs[j];
    res.learner_losses[j] = loss_value(kind, pred, y);
  }
  if (model.task == TaskKind::Classification) {
    res.has_accuracy = true;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < outputs.aggregate.rows(); ++r) {
      std::size_t argmax = 0;
      for (std::size_t c = 1; c < outputs.aggregate.cols(); ++c)
        if (outputs.aggregate(r, c) > outputs.aggregate(r, argmax)) argmax = c;
      if (static_cast<int>(argmax) == dataset.labels[idx[r]]) ++correct;
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(idx.size());
  }
  return res;
}

namespace {

void validate_objective(const TrainingObjective& objective, const EnsembleConfig& ens_cfg) {
  if (objective.kind == TrainingObjective::Kind::Beta) {
    if (!(objective.beta >= 0.0 && objective.beta <= 1.0))
      throw ConfigError("training: beta must lie in [0, 1]");
    const LossKind kind = objective_loss_kind(objective, ens_cfg.mode);
    if (!loss_mode_compatible(kind, ens_cfg.mode))
      throw ConfigError("training: loss kind incompatible with aggregation mode");
  } else {
    if (ens_cfg.task != TaskKind::Regression || ens_cfg.mode != AggregationMode::MeanOutput)
      throw ConfigError("training: GAT objectives require mean-output regression");
    if (!(objective.gat.alpha >= 0.0)) throw ConfigError("training: GAT alpha must be >= 0");
  }
}

}  // namespace

TrainResult train_ensemble(const Dataset& dataset, const EnsembleConfig& ens_cfg,
                           const TrainingObjective& objective, const TrainConfig& cfg) {
  ens_cfg.validate();
  cfg.validate();
  validate_objective(objective, ens_cfg);
  if (dataset.train_idx.empty()) throw ConfigError("training: empty train split");

  const LossKind kind = objective_loss_kind(objective, ens_cfg.mode);
  EnsembleModel model = init_ensemble(dataset, ens_cfg, cfg.seed);
  std::vector<OptState> opt_states;
  for (std::size_t j = 0; j < model.size(); ++j)
    opt_states.push_back(init_opt_state(model.learners[j]));

  TrainResult result;
  result.model = model;
  result.final_model = model;
  if (cfg.max_epochs == 0) {
    result.history.stop_reason = "max-epochs-zero";
    return result;
  }

  Rng batch_rng(Rng::derive_seed(cfg.seed, kBatchStreamTag));
  Rng dropout_rng(Rng::derive_seed(cfg.seed, kDropoutStreamTag));

  const bool has_val = !dataset.val_idx.empty();
  const bool has_test = !dataset.test_idx.empty();
  const Split monitor_split = has_val ? Split::Val : Split::Train;

  double best_err = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order = dataset.train_idx;

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    batch_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(start + cfg.batch_size, order.size());
      const std::vector<std::size_t> batch(order.begin() + start, order.begin() + end);
      const Mat xb = dataset.x.select_rows(batch);
      const Mat yb = dataset.y.select_rows(batch);

      LearnerMask mask;
      if (cfg.learner_dropout_p > 0.0) {
        mask.assign(model.size(), true);
        bool any = false;
        do {
          any = false;
          for (std::size_t j = 0; j < model.size(); ++j) {
            mask[j] = dropout_rng.uniform() >= cfg.learner_dropout_p;
            any = any || mask[j];
          }
        } while (!any);  // at least one survivor, resampled
      }

      EnsembleForward fwd = ensemble_forward(model, xb, mask);
      const std::vector<Mat> score_grads =
          objective.kind == TrainingObjective::Kind::Beta
              ? beta_loss_gradients(fwd.outputs, yb, kind, objective.beta)
              : gat_gradients(fwd.outputs, yb, objective.gat);

      for (std::size_t j : fwd.outputs.active) {
        const MlpGrads grads = mlp_backward(model.learners[j], fwd.traces[j], score_grads[j]);
        apply_update(model.learners[j], grads, opt_states[j], cfg.optimizer, cfg.weight_decay);
      }
    }

    EpochRecord rec;
    const EvalResult train_eval = evaluate(model, dataset, Split::Train, kind);
    rec.train = train_eval.decomp;
    rec.learner_train_losses = train_eval.learner_losses;
    if (has_val) rec.val = evaluate(model, dataset, Split::Val, kind).decomp;
    if (has_test) rec.test = evaluate(model, dataset, Split::Test, kind).decomp;
    result.history.epochs.push_back(rec);

    const double monitor_err = monitor_split == Split::Val ? rec.val->err : rec.train.err;
    if (monitor_err < best_err) {
      best_err = monitor_err;
      since_best = 0;
      result.history.best_epoch = epoch;
      result.model = model;
    } else {
      ++since_best;
    }
    if (since_best >= cfg.patience) {
      result.history.stop_reason = "early-stop";
      result.final_model = model;
      return result;
    }
  }
  result.history.stop_reason = "max-epochs";
  result.final_model = model;
  return result;
}

}  // namespace ensdiv
