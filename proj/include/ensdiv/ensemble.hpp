#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "ensdiv/mlp.hpp"

namespace ensdiv {

enum class TaskKind { Regression, Classification };

/// How the M base learners combine into one prediction:
///   MeanOutput - weighted mean of raw outputs (regression)
///   ScoreAvg   - weighted mean of scores, then softmax (classification)
///   ProbAvg    - softmax per learner, then weighted mean (classification)
enum class AggregationMode { MeanOutput, ScoreAvg, ProbAvg };

const char* to_string(AggregationMode mode);
const char* to_string(TaskKind task);

struct EnsembleModel {
  MlpConfig config;  // shared by all learners
  std::vector<MlpParams> learners;
  std::vector<double> weights;  // simplex: sums to 1, all >= 0
  AggregationMode mode = AggregationMode::MeanOutput;
  TaskKind task = TaskKind::Regression;

  std::size_t size() const { return learners.size(); }
  void validate() const;
};

/// Learner mask; empty vector means "all active".
using LearnerMask = std::vector<bool>;

struct EnsembleOutputs {
  AggregationMode mode = AggregationMode::MeanOutput;
  std::vector<Mat> scores;  // per learner; empty Mat for inactive learners
  std::vector<Mat> probs;   // classification: softmax(scores) per learner
  Mat aggregate;            // f-bar, q-bar or p-bar depending on mode
  Mat mean_scores;          // weighted mean of active scores (all modes)
  std::vector<std::size_t> active;
  std::vector<double> active_weights;  // renormalized over active learners

  bool is_active(std::size_t j) const;
  double active_weight_of(std::size_t j) const;  // 0 for inactive
};

struct EnsembleForward {
  EnsembleOutputs outputs;
  std::vector<ForwardTrace> traces;  // aligned with learners; empty for inactive
};

EnsembleForward ensemble_forward(const EnsembleModel& model, const Mat& x,
                                 const LearnerMask& mask = {});

/// Forward without traces, for evaluation-only paths.
EnsembleOutputs ensemble_predict(const EnsembleModel& model, const Mat& x,
                                 const LearnerMask& mask = {});

/// Maps d(loss)/d(aggregate prediction) to per-learner score gradients:
/// MeanOutput scales by w_j; ScoreAvg applies the softmax Jacobian once at
/// the mean score then scales by w_j; ProbAvg applies each learner's own
/// softmax Jacobian. Inactive learners get zero gradients.
std::vector<Mat> distribute_gradient(const EnsembleOutputs& outputs,
                                     const Mat& grad_wrt_aggregate);

/// Keeps the listed learners and renormalizes their weights to the simplex.
EnsembleModel subensemble(const EnsembleModel& model, const std::vector<std::size_t>& keep);

/// Row-wise product J_phi(s)^T v where phi is softmax and probs = phi(s).
Mat softmax_vjp(const Mat& probs, const Mat& v);

void save_ensemble(std::ostream& os, const EnsembleModel& model);
EnsembleModel load_ensemble(std::istream& is);
void save_ensemble_file(const std::string& path, const EnsembleModel& model);
EnsembleModel load_ensemble_file(const std::string& path);

}  // namespace ensdiv
