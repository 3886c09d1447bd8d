#include "ensdiv/theory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ensdiv {

namespace {

constexpr double kLogEps = 1e-12;
constexpr double kErrBarCap = 1e9;

double mean_over_rows(const std::vector<double>& per_row) {
  double s = 0.0;
  for (double v : per_row) s += v;
  return s / static_cast<double>(per_row.size());
}

}  // namespace

double closed_form_div(LossKind kind, const EnsembleOutputs& outputs, const Mat& y) {
  if (!loss_mode_compatible(kind, outputs.mode)) {
    std::ostringstream os;
    os << "closed_form_div: no closed form for " << to_string(kind) << " with "
       << to_string(outputs.mode);
    throw DomainError(os.str());
  }
  const std::size_t n = outputs.aggregate.rows();
  double div = 0.0;
  switch (outputs.mode) {
    case AggregationMode::MeanOutput: {
      for (std::size_t i = 0; i < outputs.active.size(); ++i) {
        const Mat& fj = outputs.scores[outputs.active[i]];
        double acc = 0.0;
        for (std::size_t k = 0; k < fj.size(); ++k) {
          const double d = fj.data()[k] - outputs.aggregate.data()[k];
          acc += d * d;
        }
        div += outputs.active_weights[i] * acc / static_cast<double>(n);
      }
      return div;
    }
    case AggregationMode::ScoreAvg: {
      // sum_j w_j KL(qbar || p_j)
      for (std::size_t i = 0; i < outputs.active.size(); ++i) {
        const Mat& pj = outputs.probs[outputs.active[i]];
        double acc = 0.0;
        for (std::size_t k = 0; k < pj.size(); ++k) {
          const double q = outputs.aggregate.data()[k];
          if (q > 0.0)
            acc += q * (stable_log(q, kLogEps) - stable_log(pj.data()[k], kLogEps));
        }
        div += outputs.active_weights[i] * acc / static_cast<double>(n);
      }
      return div;
    }
    case AggregationMode::ProbAvg: {
      if (kind == LossKind::CrossEntropy) {
        // sum_j w_j sum_k y(k) log(pbar(k)/p_j(k))
        for (std::size_t i = 0; i < outputs.active.size(); ++i) {
          const Mat& pj = outputs.probs[outputs.active[i]];
          double acc = 0.0;
          for (std::size_t k = 0; k < pj.size(); ++k) {
            const double yk = y.data()[k];
            if (yk != 0.0)
              acc += yk * (stable_log(outputs.aggregate.data()[k], kLogEps) -
                           stable_log(pj.data()[k], kLogEps));
          }
          div += outputs.active_weights[i] * acc / static_cast<double>(n);
        }
        return div;
      }
      // Brier: sum_j w_j ||p_j - pbar||^2
      for (std::size_t i = 0; i < outputs.active.size(); ++i) {
        const Mat& pj = outputs.probs[outputs.active[i]];
        double acc = 0.0;
        for (std::size_t k = 0; k < pj.size(); ++k) {
          const double d = pj.data()[k] - outputs.aggregate.data()[k];
          acc += d * d;
        }
        div += outputs.active_weights[i] * acc / static_cast<double>(n);
      }
      return div;
    }
  }
  throw DomainError("closed_form_div: unknown mode");
}

double prob_avg_ce_div_true_class(const EnsembleOutputs& outputs, const Mat& y) {
  if (outputs.mode != AggregationMode::ProbAvg)
    throw DomainError("true-class diversity form requires probability averaging");
  const std::size_t n = outputs.aggregate.rows();
  double div = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    // k* = argmax y(r, .)
    std::size_t kstar = 0;
    for (std::size_t k = 1; k < y.cols(); ++k)
      if (y(r, k) > y(r, kstar)) kstar = k;
    for (std::size_t i = 0; i < outputs.active.size(); ++i) {
      const Mat& pj = outputs.probs[outputs.active[i]];
      div += outputs.active_weights[i] * y(r, kstar) *
             (stable_log(outputs.aggregate(r, kstar), kLogEps) -
              stable_log(pj(r, kstar), kLogEps));
    }
  }
  return div / static_cast<double>(n);
}

namespace {

void require_row_vector_pair(const Mat& f, const Mat& y, const char* what) {
  if (f.rows() != 1 || y.rows() != 1 || f.cols() != y.cols()) throw_dim_error(what, f, y);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double theory_loss_value(TheoryLoss kind, const Mat& f, const Mat& y) {
  require_row_vector_pair(f, y, "theory_loss_value");
  switch (kind) {
    case TheoryLoss::MSE: {
      double s = 0.0;
      for (std::size_t k = 0; k < f.size(); ++k) {
        const double d = f.data()[k] - y.data()[k];
        s += d * d;
      }
      return s;
    }
    case TheoryLoss::CrossEntropyOnProbs: {
      double s = 0.0;
      for (std::size_t k = 0; k < f.size(); ++k) {
        const double yk = y.data()[k];
        if (yk != 0.0) {
          if (f.data()[k] <= 0.0)
            throw DomainError("cross-entropy on probabilities: boundary point");
          s -= yk * std::log(f.data()[k]);
        }
      }
      return s;
    }
    case TheoryLoss::Logistic:
      return std::log1p(std::exp(-y(0, 0) * f(0, 0)));
    case TheoryLoss::Exponential:
      return std::exp(-y(0, 0) * f(0, 0));
  }
  throw DomainError("theory_loss_value: unknown loss");
}

Mat theory_loss_gradient(TheoryLoss kind, const Mat& f, const Mat& y) {
  require_row_vector_pair(f, y, "theory_loss_gradient");
  Mat g(1, f.cols());
  switch (kind) {
    case TheoryLoss::MSE:
      for (std::size_t k = 0; k < f.size(); ++k)
        g.data()[k] = 2.0 * (f.data()[k] - y.data()[k]);
      return g;
    case TheoryLoss::CrossEntropyOnProbs:
      for (std::size_t k = 0; k < f.size(); ++k) {
        const double yk = y.data()[k];
        if (yk != 0.0) {
          if (f.data()[k] <= 0.0)
            throw DomainError("cross-entropy on probabilities: boundary point");
          g.data()[k] = -yk / f.data()[k];
        }
      }
      return g;
    case TheoryLoss::Logistic:
      g(0, 0) = -y(0, 0) * sigmoid(-y(0, 0) * f(0, 0));
      return g;
    case TheoryLoss::Exponential:
      g(0, 0) = -y(0, 0) * std::exp(-y(0, 0) * f(0, 0));
      return g;
  }
  throw DomainError("theory_loss_gradient: unknown loss");
}

Mat hessian(TheoryLoss kind, const Mat& f, const Mat& y) {
  require_row_vector_pair(f, y, "hessian");
  const std::size_t d = f.cols();
  switch (kind) {
    case TheoryLoss::MSE:
      return scale(Mat::identity(d), 2.0);
    case TheoryLoss::CrossEntropyOnProbs: {
      Mat h(d, d);
      for (std::size_t k = 0; k < d; ++k) {
        const double yk = y.data()[k];
        if (yk != 0.0) {
          const double fk = f.data()[k];
          if (fk <= 0.0)
            throw DomainError("hessian: cross-entropy singular at the simplex boundary");
          h(k, k) = yk / (fk * fk);
        }
      }
      return h;
    }
    case TheoryLoss::Logistic: {
      if (d != 1) throw DimError("hessian: logistic loss is scalar");
      const double s = sigmoid(y(0, 0) * f(0, 0));
      Mat h(1, 1);
      h(0, 0) = y(0, 0) * y(0, 0) * s * (1.0 - s);
      return h;
    }
    case TheoryLoss::Exponential: {
      if (d != 1) throw DimError("hessian: exponential loss is scalar");
      Mat h(1, 1);
      h(0, 0) = y(0, 0) * y(0, 0) * std::exp(-y(0, 0) * f(0, 0));
      return h;
    }
  }
  throw DomainError("hessian: unknown loss");
}

namespace {

// 0.5 * d^T H(fbar + c*d, y) d
double quadratic_form(TheoryLoss kind, const Mat& f_bar, const Mat& delta, const Mat& y,
                      double c) {
  const Mat point = axpy(f_bar, c, delta);
  const Mat h = hessian(kind, point, y);
  double q = 0.0;
  for (std::size_t a = 0; a < delta.cols(); ++a) {
    if (delta(0, a) == 0.0) continue;
    for (std::size_t b = 0; b < delta.cols(); ++b)
      q += delta(0, a) * h(a, b) * delta(0, b);
  }
  return 0.5 * q;
}

}  // namespace

TaylorCertificate taylor_remainder_check(TheoryLoss kind, const Mat& f_j, const Mat& f_bar,
                                         const Mat& y, double tol) {
  require_row_vector_pair(f_j, y, "taylor_remainder_check");
  require_row_vector_pair(f_bar, y, "taylor_remainder_check");

  TaylorCertificate cert;
  const Mat delta = sub(f_j, f_bar);
  const Mat grad = theory_loss_gradient(kind, f_bar, y);
  double directional = 0.0;
  for (std::size_t k = 0; k < delta.size(); ++k) directional += grad.data()[k] * delta.data()[k];
  cert.residual =
      theory_loss_value(kind, f_j, y) - theory_loss_value(kind, f_bar, y) - directional;

  if (max_abs(delta) == 0.0) {
    cert.c = 0.0;
    cert.match_error = std::fabs(cert.residual);
    return cert;
  }

  const auto gap = [&](double c) { return quadratic_form(kind, f_bar, delta, y, c) - cert.residual; };

  if (kind == TheoryLoss::MSE) {
    // constant Hessian: any c matches, report the midpoint
    cert.c = 0.5;
    cert.match_error = std::fabs(gap(0.5));
    return cert;
  }

  constexpr int kGridPoints = 256;
  double best_c = 0.0;
  double best_err = std::fabs(gap(0.0));
  double prev_gap = gap(0.0);
  double prev_c = 0.0;
  bool bracketed = false;
  double lo = 0.0, hi = 0.0;
  for (int k = 1; k <= kGridPoints; ++k) {
    const double c = static_cast<double>(k) / kGridPoints;
    const double g = gap(c);
    if (std::fabs(g) < best_err) {
      best_err = std::fabs(g);
      best_c = c;
    }
    if (!bracketed && ((prev_gap <= 0.0 && g >= 0.0) || (prev_gap >= 0.0 && g <= 0.0))) {
      bracketed = true;
      lo = prev_c;
      hi = c;
    }
    prev_gap = g;
    prev_c = c;
  }

  if (bracketed) {
    double glo = gap(lo);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double gm = gap(mid);
      if (std::fabs(gm) <= best_err) {
        best_err = std::fabs(gm);
        best_c = mid;
      }
      if (best_err == 0.0) break;
      if ((glo <= 0.0 && gm <= 0.0) || (glo >= 0.0 && gm >= 0.0)) {
        lo = mid;
        glo = gm;
      } else {
        hi = mid;
      }
    }
  }

  cert.match_error = best_err;
  if (best_err <= tol) cert.c = best_c;
  return cert;
}

namespace {

double raw_ce(const Mat& pred, const Mat& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double yk = y.data()[k];
    if (yk != 0.0) s -= yk * std::log(pred.data()[k]);  // clamp intentionally disabled
  }
  return s;
}

std::vector<double> trace_ts(PathologyCase pathology_case, double t_max) {
  std::vector<double> ts;
  if (pathology_case == PathologyCase::RealLine) {
    const double stride = std::max(1.0, std::ceil(t_max / 4096.0));
    for (double t = 1.0; t <= t_max; t += stride) ts.push_back(t);
    if (ts.back() != t_max) ts.push_back(t_max);
  } else {
    // geometric spacing suits the logarithmic divergence
    constexpr int kPoints = 512;
    double prev = 0.0;
    for (int k = 0; k <= kPoints; ++k) {
      double t = std::pow(t_max, static_cast<double>(k) / kPoints);
      if (t <= prev) continue;
      ts.push_back(t);
      prev = t;
    }
    if (ts.back() != t_max) ts.push_back(t_max);
  }
  return ts;
}

}  // namespace

std::vector<PathologyPoint> pathology_sequence(LossKind kind, double beta,
                                               const std::vector<double>& weights, const Mat& y,
                                               PathologyCase pathology_case, double t_max,
                                               const Mat& y_inf) {
  if (beta < 1.0)
    throw DomainError("pathology_sequence: beta < 1 certifies nothing; use beta >= 1");
  if (weights.size() < 2) throw DomainError("pathology_sequence: need at least 2 weights");
  if (!(t_max >= 1.0)) throw DomainError("pathology_sequence: t_max must be >= 1");

  std::vector<PathologyPoint> trace;
  const std::size_t m = weights.size();

  if (pathology_case == PathologyCase::RealLine) {
    if (kind != LossKind::MSE)
      throw DomainError("pathology_sequence: the real-line case requires an unbounded domain (MSE)");
    const double w1 = weights[0], w2 = weights[1];
    if (!(w1 > 0.0) || !(w2 > 0.0))
      throw DomainError("pathology_sequence: w1 and w2 must be positive");
    const std::size_t d = y.cols();
    for (double t : trace_ts(pathology_case, t_max)) {
      Mat f1(1, d), f2(1, d), zero(1, d), fbar(1, d);
      for (std::size_t k = 0; k < d; ++k) {
        f1(0, k) = t;
        f2(0, k) = -w1 / w2 * t;
        fbar(0, k) = w1 * f1(0, k) + w2 * f2(0, k);
      }
      PathologyPoint p;
      p.t = t;
      p.err = theory_loss_value(TheoryLoss::MSE, fbar, y);
      p.err_bar = w1 * theory_loss_value(TheoryLoss::MSE, f1, y) +
                  w2 * theory_loss_value(TheoryLoss::MSE, f2, y);
      for (std::size_t j = 2; j < m; ++j)
        p.err_bar += weights[j] * theory_loss_value(TheoryLoss::MSE, zero, y);
      p.beta_loss = (1.0 - beta) * p.err_bar + beta * p.err;
      trace.push_back(p);
    }
    return trace;
  }

  // Simplex case
  if (kind != LossKind::CrossEntropy)
    throw DomainError("pathology_sequence: the simplex case requires cross-entropy");
  if (y_inf.rows() != 1 || y_inf.cols() != y.cols())
    throw DimError("pathology_sequence: y_inf must be a row vector matching y");
  for (std::size_t k = 0; k < y.size(); ++k)
    if (!(y.data()[k] > 0.0))
      throw DomainError("pathology_sequence: y must lie in the simplex interior");
  const double w1 = weights[0];
  if (!(w1 > 0.0) || !(w1 < 1.0))
    throw DomainError("pathology_sequence: need 0 < w1 < 1");

  const double finite_ce_of_y = raw_ce(y, y);
  for (double t : trace_ts(pathology_case, t_max)) {
    const double inv = 1.0 / t;
    Mat f1(1, y.cols()), fbar(1, y.cols());
    for (std::size_t k = 0; k < y.cols(); ++k) {
      f1(0, k) = inv * y.data()[k] + (1.0 - inv) * y_inf.data()[k];
      fbar(0, k) = w1 * f1(0, k) + (1.0 - w1) * y.data()[k];
    }
    PathologyPoint p;
    p.t = t;
    p.err = raw_ce(fbar, y);
    p.err_bar = w1 * raw_ce(f1, y) + (1.0 - w1) * finite_ce_of_y;
    if (!(p.err_bar < kErrBarCap)) p.err_bar = kErrBarCap;
    p.beta_loss = (1.0 - beta) * p.err_bar + beta * p.err;
    trace.push_back(p);
  }
  return trace;
}

double pathology_simplex_err_limit(double w1, const Mat& y, const Mat& y_inf) {
  Mat fbar(1, y.cols());
  for (std::size_t k = 0; k < y.cols(); ++k)
    fbar(0, k) = (1.0 - w1) * y.data()[k] + w1 * y_inf.data()[k];
  return raw_ce(fbar, y);
}

CollusionShifts collusion_shift_decomposition(double f, const std::vector<double>& shifts,
                                              double y) {
  if (shifts.size() < 2) throw DomainError("collusion_shift_decomposition: need >= 2 learners");
  CollusionShifts out;
  out.base = f;
  out.shifts = shifts;
  const double m = static_cast<double>(shifts.size());
  double mean = 0.0;
  for (double c : shifts) mean += c;
  mean /= m;
  out.shift_mean = mean;

  double err_bar = 0.0, div = 0.0;
  for (double c : shifts) {
    const double e = f + c - y;
    err_bar += e * e;
    const double dev = c - mean;
    div += dev * dev;
  }
  out.decomp.err_bar = err_bar / m;
  out.decomp.div = div / m;
  out.decomp.err = out.decomp.err_bar - out.decomp.div;
  const double e = f + mean - y;
  out.err_from_mean = e * e;
  return out;
}

BetaExpectation beta_expectation_check(double p_bar, double phi, std::size_t n, Rng& rng) {
  if (!(p_bar > 0.0) || !(p_bar < 1.0))
    throw DomainError("beta_expectation_check: p_bar must lie strictly inside (0,1)");
  if (!(phi > 0.0)) throw DomainError("beta_expectation_check: phi must be positive");
  if (n == 0) throw DomainError("beta_expectation_check: need at least one sample");

  const double a = phi * p_bar;
  const double b = phi * (1.0 - p_bar);
  const double log_p_bar = std::log(p_bar);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pj = rng.beta(a, b);
    acc += log_p_bar - std::log(pj);
  }
  BetaExpectation out;
  out.mc_mean = acc / static_cast<double>(n);
  const double var = p_bar * (1.0 - p_bar) / (1.0 + phi);
  out.approx = var / (2.0 * p_bar * p_bar);
  return out;
}

}  // namespace ensdiv
