#include "ensdiv/objectives.hpp"

#include <cmath>
#include <sstream>

namespace ensdiv {

namespace {

constexpr double kLogEps = 1e-12;
constexpr double kSimplexTol = 1e-6;

void require_simplex_rows(const Mat& m, const char* what) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      if (v < -kSimplexTol) {
        std::ostringstream os;
        os << what << ": negative probability " << v << " in row " << r;
        throw DomainError(os.str());
      }
      sum += v;
    }
    if (std::fabs(sum - 1.0) > kSimplexTol) {
      std::ostringstream os;
      os << what << ": row " << r << " sums to " << sum << ", expected 1";
      throw DomainError(os.str());
    }
  }
}

double squared_error_mean(const Mat& pred, const Mat& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - y.data()[i];
    total += d * d;
  }
  return total / static_cast<double>(pred.rows());
}

double cross_entropy_mean(const Mat& pred, const Mat& y) {
  double total = 0.0;
  for (std::size_t r = 0; r < pred.rows(); ++r)
    for (std::size_t c = 0; c < pred.cols(); ++c) {
      const double yk = y(r, c);
      if (yk != 0.0) total -= yk * stable_log(pred(r, c), kLogEps);
    }
  return total / static_cast<double>(pred.rows());
}

}  // namespace

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::MSE: return "mse";
    case LossKind::CrossEntropy: return "cross-entropy";
    case LossKind::Brier: return "brier";
  }
  return "?";
}

bool loss_mode_compatible(LossKind kind, AggregationMode mode) {
  switch (mode) {
    case AggregationMode::MeanOutput: return kind == LossKind::MSE;
    case AggregationMode::ScoreAvg: return kind == LossKind::CrossEntropy;
    case AggregationMode::ProbAvg:
      return kind == LossKind::CrossEntropy || kind == LossKind::Brier;
  }
  return false;
}

LossKind default_loss_for(AggregationMode mode) {
  return mode == AggregationMode::MeanOutput ? LossKind::MSE : LossKind::CrossEntropy;
}

double loss_value(LossKind kind, const Mat& pred, const Mat& y) {
  if (!pred.same_shape(y)) throw_dim_error("loss_value", pred, y);
  if (pred.rows() == 0) throw DomainError("loss_value: empty batch");
  switch (kind) {
    case LossKind::MSE: return squared_error_mean(pred, y);
    case LossKind::CrossEntropy:
      require_simplex_rows(pred, "cross-entropy predictions");
      require_simplex_rows(y, "cross-entropy targets");
      return cross_entropy_mean(pred, y);
    case LossKind::Brier:
      require_simplex_rows(pred, "brier predictions");
      require_simplex_rows(y, "brier targets");
      return squared_error_mean(pred, y);
  }
  throw DomainError("loss_value: unknown loss kind");
}

namespace {

void require_compatible(LossKind kind, AggregationMode mode) {
  if (!loss_mode_compatible(kind, mode)) {
    std::ostringstream os;
    os << "loss " << to_string(kind) << " is incompatible with aggregation " << to_string(mode);
    throw DomainError(os.str());
  }
}

// Individual predictions under the decomposition: raw outputs for
// MeanOutput, each learner's own probabilities otherwise.
const Mat& individual_prediction(const EnsembleOutputs& outputs, std::size_t j) {
  return outputs.mode == AggregationMode::MeanOutput ? outputs.scores[j] : outputs.probs[j];
}

}  // namespace

Decomposition decompose(LossKind kind, const EnsembleOutputs& outputs, const Mat& y) {
  require_compatible(kind, outputs.mode);
  Decomposition d;
  d.err = loss_value(kind, outputs.aggregate, y);
  d.err_bar = 0.0;
  for (std::size_t i = 0; i < outputs.active.size(); ++i) {
    const std::size_t j = outputs.active[i];
    d.err_bar += outputs.active_weights[i] * loss_value(kind, individual_prediction(outputs, j), y);
  }
  d.div = d.err_bar - d.err;
  return d;
}

double beta_loss(const Decomposition& d, double beta) {
  return (1.0 - beta) * d.err_bar + beta * d.err;
}

namespace {

// d(batch-mean loss)/d(probabilities): -y/p for CE, 2(p-y) for Brier.
Mat grad_wrt_probs(LossKind kind, const Mat& probs, const Mat& y) {
  const double n = static_cast<double>(probs.rows());
  Mat g(probs.rows(), probs.cols());
  if (kind == LossKind::CrossEntropy) {
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double yk = y.data()[i];
      g.data()[i] = yk == 0.0 ? 0.0 : -yk / (n * std::max(probs.data()[i], kLogEps));
    }
  } else {
    for (std::size_t i = 0; i < probs.size(); ++i)
      g.data()[i] = 2.0 * (probs.data()[i] - y.data()[i]) / n;
  }
  return g;
}

}  // namespace

std::vector<Mat> beta_loss_gradients(const EnsembleOutputs& outputs, const Mat& y, LossKind kind,
                                     double beta) {
  require_compatible(kind, outputs.mode);
  if (!outputs.aggregate.same_shape(y)) throw_dim_error("beta_loss_gradients", outputs.aggregate, y);
  const double n = static_cast<double>(y.rows());

  const std::size_t m = outputs.scores.size();
  std::vector<Mat> grads(m);
  for (std::size_t j = 0; j < m; ++j) grads[j] = Mat(y.rows(), y.cols());

  if (beta != 1.0) {
    // Individual term: w_j * grad of each learner's own loss.
    for (std::size_t i = 0; i < outputs.active.size(); ++i) {
      const std::size_t j = outputs.active[i];
      const double wj = outputs.active_weights[i];
      Mat g(y.rows(), y.cols());
      switch (outputs.mode) {
        case AggregationMode::MeanOutput:
          for (std::size_t k = 0; k < g.size(); ++k)
            g.data()[k] = 2.0 * (outputs.scores[j].data()[k] - y.data()[k]) / n;
          break;
        case AggregationMode::ScoreAvg:
        case AggregationMode::ProbAvg:
          if (kind == LossKind::CrossEntropy) {
            // softmax + CE composite: (p_j - y)/n
            for (std::size_t k = 0; k < g.size(); ++k)
              g.data()[k] = (outputs.probs[j].data()[k] - y.data()[k]) / n;
          } else {
            g = softmax_vjp(outputs.probs[j], grad_wrt_probs(kind, outputs.probs[j], y));
          }
          break;
      }
      axpy_in_place(grads[j], (1.0 - beta) * wj, g);
    }
  }

  if (beta != 0.0) {
    Mat g_agg;
    switch (outputs.mode) {
      case AggregationMode::MeanOutput: {
        g_agg = Mat(y.rows(), y.cols());
        for (std::size_t k = 0; k < g_agg.size(); ++k)
          g_agg.data()[k] = 2.0 * (outputs.aggregate.data()[k] - y.data()[k]) / n;
        break;
      }
      case AggregationMode::ScoreAvg:
      case AggregationMode::ProbAvg:
        g_agg = grad_wrt_probs(kind, outputs.aggregate, y);
        break;
    }
    const std::vector<Mat> ens = distribute_gradient(outputs, g_agg);
    for (std::size_t j = 0; j < m; ++j) axpy_in_place(grads[j], beta, ens[j]);
  }
  return grads;
}

namespace {

void require_gat_setting(const EnsembleOutputs& outputs, const GatObjective& gat) {
  if (outputs.mode != AggregationMode::MeanOutput)
    throw DomainError("gradient-adjusted targets are defined for mean-output regression only");
  if (!(gat.alpha >= 0.0) || !std::isfinite(gat.alpha))
    throw DomainError("gat: alpha must be finite and >= 0");
  if (outputs.active.size() < 2) throw DomainError("gat: need at least 2 active learners");
  const double w0 = outputs.active_weights.front();
  for (double w : outputs.active_weights)
    if (std::fabs(w - w0) > 1e-12) throw DomainError("gat: requires equal learner weights");
}

Mat leave_one_out_mean(const EnsembleOutputs& outputs, std::size_t learner_index) {
  const std::size_t m = outputs.active.size();
  Mat sum(outputs.aggregate.rows(), outputs.aggregate.cols());
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = outputs.active[i];
    if (j == learner_index) continue;
    add_in_place(sum, outputs.scores[j]);
  }
  scale_in_place(sum, 1.0 / static_cast<double>(m - 1));
  return sum;
}

}  // namespace

Mat gat_targets(const Mat& y, const EnsembleOutputs& outputs, const GatObjective& gat,
                std::size_t learner_index) {
  require_gat_setting(outputs, gat);
  if (!outputs.is_active(learner_index)) throw DomainError("gat_targets: inactive learner");
  Mat g;  // ensemble-error gradient d/dfbar of (1/2)(fbar - y)^2
  if (gat.variant == GatObjective::Variant::Full) {
    g = sub(outputs.aggregate, y);
  } else {
    g = sub(leave_one_out_mean(outputs, learner_index), y);
  }
  return axpy(y, -gat.alpha, g);
}

double gat_loss(const EnsembleOutputs& outputs, const Mat& y, const GatObjective& gat) {
  require_gat_setting(outputs, gat);
  const double m = static_cast<double>(outputs.active.size());
  double total = 0.0;
  for (std::size_t j : outputs.active) {
    const Mat ytilde = gat_targets(y, outputs, gat, j);
    total += loss_value(LossKind::MSE, outputs.scores[j], ytilde);
  }
  return total / m;
}

std::vector<Mat> gat_gradients(const EnsembleOutputs& outputs, const Mat& y,
                               const GatObjective& gat) {
  require_gat_setting(outputs, gat);
  const std::size_t m = outputs.active.size();
  const double md = static_cast<double>(m);
  const double n = static_cast<double>(y.rows());

  std::vector<Mat> resid(outputs.scores.size());  // f_i - ytilde_i
  for (std::size_t j : outputs.active)
    resid[j] = sub(outputs.scores[j], gat_targets(y, outputs, gat, j));

  std::vector<Mat> grads(outputs.scores.size());
  for (std::size_t j = 0; j < grads.size(); ++j) grads[j] = Mat(y.rows(), y.cols());

  if (gat.variant == GatObjective::Variant::Full) {
    // d/df_k [(1/M) sum_i ||f_i - ytilde||^2]; ytilde depends on fbar.
    Mat resid_sum(y.rows(), y.cols());
    for (std::size_t j : outputs.active) add_in_place(resid_sum, resid[j]);
    for (std::size_t j : outputs.active) {
      grads[j] = scale(resid[j], 2.0 / (md * n));
      axpy_in_place(grads[j], 2.0 * gat.alpha / (md * md * n), resid_sum);
    }
  } else {
    Mat resid_sum(y.rows(), y.cols());
    for (std::size_t j : outputs.active) add_in_place(resid_sum, resid[j]);
    for (std::size_t j : outputs.active) {
      grads[j] = scale(resid[j], 2.0 / (md * n));
      // every other residual feeds back through its leave-one-out mean
      Mat others = sub(resid_sum, resid[j]);
      axpy_in_place(grads[j], 2.0 * gat.alpha / (md * (md - 1.0) * n), others);
    }
  }
  return grads;
}

double gat_equivalent_beta(double alpha) {
  if (!(alpha >= 0.0)) throw DomainError("gat_equivalent_beta: alpha must be >= 0");
  const double s = 1.0 + alpha;
  return 1.0 - 1.0 / (s * s);
}

double gat_m1_gamma(double alpha, std::size_t m) {
  if (m < 2) throw DomainError("gat_m1_gamma: M must be >= 2");
  if (!(alpha >= 0.0)) throw DomainError("gat_m1_gamma: alpha must be >= 0");
  const double md = static_cast<double>(m);
  const double s = alpha + 1.0;
  return (alpha / (s * s)) * (md * ((alpha + 2.0) * md - 2.0 * s)) / ((md - 1.0) * (md - 1.0));
}

}  // namespace ensdiv
