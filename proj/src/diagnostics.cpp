#include "ensdiv/diagnostics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace ensdiv {

namespace {

std::vector<std::vector<double>> training_biases(const EnsembleModel& model,
                                                 const Dataset& dataset) {
  // b_j = mean over training inputs of (f_j - fbar), per output dimension
  const Mat x = dataset.x_split(Split::Train);
  const EnsembleOutputs outputs = ensemble_predict(model, x);
  const std::vector<double> agg_mean = col_mean(outputs.aggregate);
  std::vector<std::vector<double>> biases(model.size());
  for (std::size_t j = 0; j < model.size(); ++j) {
    const std::vector<double> learner_mean = col_mean(outputs.scores[j]);
    biases[j].resize(learner_mean.size());
    for (std::size_t c = 0; c < learner_mean.size(); ++c)
      biases[j][c] = learner_mean[c] - agg_mean[c];
  }
  return biases;
}

}  // namespace

DebiasReport debias(const EnsembleModel& model, const Dataset& dataset, Split report_split) {
  if (model.task != TaskKind::Regression || model.mode != AggregationMode::MeanOutput)
    throw DomainError("debias: defined for mean-output regression only");

  const std::vector<std::vector<double>> biases = training_biases(model, dataset);

  const Mat x = dataset.x_split(report_split);
  const Mat y = dataset.y_split(report_split);
  EnsembleOutputs outputs = ensemble_predict(model, x);
  const Decomposition before = decompose(LossKind::MSE, outputs, y);

  // debiased aggregate, recomputed to measure the (null) change
  Mat debiased_agg(outputs.aggregate.rows(), outputs.aggregate.cols());
  EnsembleOutputs after_outputs = outputs;
  for (std::size_t i = 0; i < outputs.active.size(); ++i) {
    const std::size_t j = outputs.active[i];
    Mat shifted = outputs.scores[j];
    for (std::size_t r = 0; r < shifted.rows(); ++r)
      for (std::size_t c = 0; c < shifted.cols(); ++c) shifted(r, c) -= biases[j][c];
    axpy_in_place(debiased_agg, outputs.active_weights[i], shifted);
    after_outputs.scores[j] = std::move(shifted);
  }

  DebiasReport report;
  report.biases = biases;
  report.div_before = before.div;
  report.max_aggregate_change = max_abs_diff(debiased_agg, outputs.aggregate);

  after_outputs.aggregate = outputs.aggregate;  // unchanged by construction
  after_outputs.mean_scores = outputs.mean_scores;
  const Decomposition after = decompose(LossKind::MSE, after_outputs, y);
  report.div_after = after.div;

  if (std::fabs(report.div_before) >= 1e-12) {
    report.percent_defined = true;
    report.percent_removed = 100.0 * (report.div_before - report.div_after) / report.div_before;
  }
  return report;
}

std::vector<Mat> debiased_predictions(const EnsembleModel& model, const Dataset& dataset,
                                      Split split) {
  const std::vector<std::vector<double>> biases = training_biases(model, dataset);
  const Mat x = dataset.x_split(split);
  const EnsembleOutputs outputs = ensemble_predict(model, x);
  std::vector<Mat> preds(model.size());
  for (std::size_t j = 0; j < model.size(); ++j) {
    Mat shifted = outputs.scores[j];
    for (std::size_t r = 0; r < shifted.rows(); ++r)
      for (std::size_t c = 0; c < shifted.cols(); ++c) shifted(r, c) -= biases[j][c];
    preds[j] = std::move(shifted);
  }
  return preds;
}

std::vector<DropoutCell> dropout_codependence(const EnsembleModel& model, const Dataset& dataset,
                                              Split split, const std::vector<double>& fractions,
                                              std::size_t trials, Rng& rng, LossKind kind) {
  if (trials < 1) throw ConfigError("dropout_codependence: need at least one trial");
  const Mat x = dataset.x_split(split);
  const Mat y = dataset.y_split(split);
  const double full_err = decompose(kind, ensemble_predict(model, x), y).err;
  if (!(full_err > 0.0))
    throw DomainError("dropout_codependence: full-ensemble loss is zero; relative increase undefined");

  const std::size_t m = model.size();
  std::vector<DropoutCell> cells;
  for (double p : fractions) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout_codependence: fraction must lie in [0,1)");
    const auto drop = static_cast<std::size_t>(std::llround(p * static_cast<double>(m)));
    DropoutCell cell;
    cell.fraction = p;
    cell.trials = trials;
    if (drop == 0) {
      cell.mean_relative_err_increase = 0.0;  // nothing removed, exactly zero
      cells.push_back(cell);
      continue;
    }
    if (drop >= m) throw ConfigError("dropout_codependence: fraction drops every learner");
    double acc = 0.0;
    std::vector<std::size_t> order(m);
    for (std::size_t t = 0; t < trials; ++t) {
      for (std::size_t j = 0; j < m; ++j) order[j] = j;
      rng.shuffle(order);
      LearnerMask mask(m, true);
      for (std::size_t d = 0; d < drop; ++d) mask[order[d]] = false;
      const double err = decompose(kind, ensemble_predict(model, x, mask), y).err;
      acc += (err - full_err) / full_err;
    }
    cell.mean_relative_err_increase = acc / static_cast<double>(trials);
    cells.push_back(cell);
  }
  return cells;
}

std::vector<GapPoint> gap_series(const TrainHistory& history) {
  std::vector<GapPoint> out;
  for (std::size_t e = 0; e < history.epochs.size(); ++e) {
    const EpochRecord& rec = history.epochs[e];
    if (!rec.test) throw ConfigError("gap_series: history has no test-split metrics");
    GapPoint p;
    p.epoch = e;
    p.train = rec.train;
    p.test = *rec.test;
    p.train_err = rec.train.err;
    p.test_err = rec.test->err;
    p.gap = p.test_err - p.train_err;
    out.push_back(p);
  }
  return out;
}

std::vector<SweepCellResult> beta_sweep(const Dataset& dataset, const EnsembleConfig& ens_cfg,
                                        const std::vector<double>& betas,
                                        const std::vector<std::uint64_t>& seeds,
                                        const TrainConfig& train_cfg, int workers) {
  for (double b : betas)
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("beta_sweep: beta must lie in [0, 1]");
  if (betas.empty() || seeds.empty()) throw ConfigError("beta_sweep: empty beta or seed list");

  struct Cell {
    double beta;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double b : betas)
    for (std::uint64_t s : seeds) cells.push_back({b, s});

  std::vector<SweepCellResult> results(cells.size());
  const LossKind kind = default_loss_for(ens_cfg.mode);

  auto run_cell = [&](std::size_t i) {
    TrainConfig cfg = train_cfg;
    cfg.seed = cells[i].seed;
    const TrainingObjective objective = TrainingObjective::beta_objective(cells[i].beta);
    TrainResult trained = train_ensemble(dataset, ens_cfg, objective, cfg);

    SweepCellResult& out = results[i];
    out.history = std::move(trained.history);
    out.model = std::move(trained.model);
    out.row.beta = cells[i].beta;
    out.row.seed = cells[i].seed;
    out.row.best_epoch = out.history.best_epoch;
    out.row.epochs_run = out.history.epochs.size();
    out.row.train = evaluate(out.model, dataset, Split::Train, kind).decomp;
    if (!dataset.val_idx.empty()) out.row.val = evaluate(out.model, dataset, Split::Val, kind).decomp;
    if (!dataset.test_idx.empty()) {
      const EvalResult test = evaluate(out.model, dataset, Split::Test, kind);
      out.row.test = test.decomp;
      out.row.test_accuracy = test.accuracy;
      out.row.has_accuracy = test.has_accuracy;
    }
  };

  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        run_cell(i);
      }
    };
    std::vector<std::thread> pool;
    const int count = std::min<int>(workers, static_cast<int>(cells.size()));
    for (int w = 0; w < count; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

}  // namespace ensdiv
