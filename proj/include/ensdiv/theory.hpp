#pragma once

#include <optional>
#include <vector>

#include "ensdiv/objectives.hpp"
#include "ensdiv/rng.hpp"

namespace ensdiv {

/// Closed-form diversity per loss/aggregation pair:
///   MSE/MeanOutput  - weighted variance of outputs around the mean
///   CE/ScoreAvg     - weighted KL(qbar || p_j)
///   CE/ProbAvg      - weighted sum_k y(k) log(pbar(k)/p_j(k))
///   Brier/ProbAvg   - weighted variance of probabilities around the mean
/// Must agree with decompose(...).div.
double closed_form_div(LossKind kind, const EnsembleOutputs& outputs, const Mat& y);

/// True-class-only variant of the probability-averaging form; equals the full
/// expression when y is one-hot.
double prob_avg_ce_div_true_class(const EnsembleOutputs& outputs, const Mat& y);

/// Losses with analytic Hessians used by the remainder verifier. The
/// cross-entropy variant acts directly on probability vectors.
enum class TheoryLoss { MSE, CrossEntropyOnProbs, Logistic, Exponential };

double theory_loss_value(TheoryLoss kind, const Mat& f, const Mat& y);
Mat theory_loss_gradient(TheoryLoss kind, const Mat& f, const Mat& y);

/// Exact Hessian of the loss with respect to its first argument, at a single
/// point (f and y are 1 x d row vectors). Boundary points are rejected where
/// the Hessian is singular.
Mat hessian(TheoryLoss kind, const Mat& f, const Mat& y);

struct TaylorCertificate {
  double residual = 0.0;     // L(f_j,y) - L(fbar,y) - grad(fbar)^T (f_j - fbar)
  std::optional<double> c;   // point in [0,1] matching the quadratic form
  double match_error = 0.0;  // |quadratic form at c - residual| (best achieved)
};

/// Locates c in [0,1] such that 0.5*d^T H(fbar + c*d) d equals the first-order
/// remainder, via a 256-point grid scan plus bisection on a sign change.
/// Failure to locate yields an absent c and the best achieved error.
TaylorCertificate taylor_remainder_check(TheoryLoss kind, const Mat& f_j, const Mat& f_bar,
                                         const Mat& y, double tol);

enum class PathologyCase { RealLine, Simplex };

struct PathologyPoint {
  double t = 0.0;
  double err = 0.0;
  double err_bar = 0.0;
  double beta_loss = 0.0;
};

/// Constructive sequences showing the augmented loss is unbounded below for
/// beta > 1. RealLine: MSE with two learners moving as +t and -(w1/w2) t.
/// Simplex: cross-entropy (raw logs, err_bar capped at 1e9) with one learner
/// sliding toward the vertex y_inf. beta = 1 is allowed as a bounded control;
/// beta < 1 is rejected.
std::vector<PathologyPoint> pathology_sequence(LossKind kind, double beta,
                                               const std::vector<double>& weights, const Mat& y,
                                               PathologyCase pathology_case, double t_max,
                                               const Mat& y_inf = Mat());

/// Limit of the ensemble loss along the Simplex sequence:
/// L((1-w1) y + w1 y_inf, y) with raw logs.
double pathology_simplex_err_limit(double w1, const Mat& y, const Mat& y_inf);

struct CollusionShifts {
  double base = 0.0;                 // shared prediction f
  std::vector<double> shifts;        // per-learner offsets
  double shift_mean = 0.0;
  Decomposition decomp;              // computed from the shift form
  double err_from_mean = 0.0;        // (f + mean(shift) - y)^2
};

/// Scalar equal-weight regression where learner j predicts f + shift_j.
/// The ensemble error depends on the shifts only through their mean.
CollusionShifts collusion_shift_decomposition(double f, const std::vector<double>& shifts,
                                              double y);

struct BetaExpectation {
  double mc_mean = 0.0;  // Monte Carlo estimate of E log(pbar / p_j)
  double approx = 0.0;   // Var[p_j] / (2 pbar^2)
};

/// Draws p_j ~ Beta(phi*pbar, phi*(1-pbar)) and compares the sampled mean of
/// log(pbar/p_j) against the second-order approximation.
BetaExpectation beta_expectation_check(double p_bar, double phi, std::size_t n, Rng& rng);

}  // namespace ensdiv
