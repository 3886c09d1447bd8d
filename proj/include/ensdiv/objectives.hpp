#pragma once

#include <vector>

#include "ensdiv/ensemble.hpp"

namespace ensdiv {

enum class LossKind { MSE, CrossEntropy, Brier };

const char* to_string(LossKind kind);

/// Supported pairs: MSE/MeanOutput, CrossEntropy/ScoreAvg,
/// CrossEntropy/ProbAvg, Brier/ProbAvg. Everything else is rejected.
bool loss_mode_compatible(LossKind kind, AggregationMode mode);
LossKind default_loss_for(AggregationMode mode);

/// Batch-mean loss. Rows are examples. MSE/Brier sum squared differences over
/// output dims; cross-entropy is -sum_k y(k) log pred(k) with a clamped log.
/// CrossEntropy and Brier require simplex-valued rows on both sides.
double loss_value(LossKind kind, const Mat& pred, const Mat& y);

struct Decomposition {
  double err = 0.0;      // loss of the aggregate prediction
  double err_bar = 0.0;  // weighted mean of the individual losses
  double div = 0.0;      // err_bar - err
};

/// Evaluates both sides of the loss split for one batch. Individual losses in
/// classification are always taken on each learner's own probabilities.
Decomposition decompose(LossKind kind, const EnsembleOutputs& outputs, const Mat& y);

/// (1-beta)*err_bar + beta*err; equivalently err_bar - beta*div.
double beta_loss(const Decomposition& d, double beta);

/// Per-learner score gradients of the batch-mean beta objective:
/// (1-beta)*w_j*grad(individual loss) + beta*(chain through the aggregate).
/// Inactive learners receive zero matrices.
std::vector<Mat> beta_loss_gradients(const EnsembleOutputs& outputs, const Mat& y, LossKind kind,
                                     double beta);

struct GatObjective {
  enum class Variant { Full, LeaveOneOut };
  double alpha = 0.0;
  Variant variant = Variant::Full;
};

/// Targets shifted against the ensemble-error gradient: y - alpha*(fbar - y),
/// or the leave-one-out mean for the LeaveOneOut variant. Regression,
/// MeanOutput, equal weights only.
Mat gat_targets(const Mat& y, const EnsembleOutputs& outputs, const GatObjective& gat,
                std::size_t learner_index);

/// (1/M) sum_i batch-mean ||f_i - ytilde_i||^2.
double gat_loss(const EnsembleOutputs& outputs, const Mat& y, const GatObjective& gat);

/// Per-learner score gradients of gat_loss, including the dependence of the
/// adjusted targets on the learner outputs.
std::vector<Mat> gat_gradients(const EnsembleOutputs& outputs, const Mat& y,
                               const GatObjective& gat);

/// beta = 1 - 1/(1+alpha)^2.
double gat_equivalent_beta(double alpha);

/// gamma = alpha/(alpha+1)^2 * M*((alpha+2)M - 2(alpha+1)) / (M-1)^2.
double gat_m1_gamma(double alpha, std::size_t m);

}  // namespace ensdiv
