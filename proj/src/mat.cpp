#include "ensdiv/mat.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ensdiv {

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    std::ostringstream os;
    os << "Mat: data length " << data_.size() << " does not match " << rows_ << "x" << cols_;
    throw DimError(os.str());
  }
}

Mat Mat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m.cols_) throw DimError("Mat::from_rows: ragged rows");
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Mat Mat::row_vector(std::initializer_list<double> values) {
  Mat m(1, values.size());
  std::size_t c = 0;
  for (double v : values) m(0, c++) = v;
  return m;
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Mat::require_finite(const char* what) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << what << ": non-finite entry in " << rows_ << "x" << cols_ << " matrix";
      throw DomainError(os.str());
    }
  }
}

Mat Mat::select_rows(const std::vector<std::size_t>& idx) const {
  Mat out(idx.size(), cols_);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows_) throw DimError("Mat::select_rows: row index out of range");
    std::copy_n(data_.data() + idx[i] * cols_, cols_, out.data() + i * cols_);
  }
  return out;
}

Mat Mat::row(std::size_t r) const {
  Mat out(1, cols_);
  std::copy_n(data_.data() + r * cols_, cols_, out.data());
  return out;
}

void throw_dim_error(const char* op, const Mat& a, const Mat& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
     << b.cols();
  throw DimError(os.str());
}

Mat matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows()) throw_dim_error("matmul", a, b);
  Mat out(a.rows(), b.cols());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* outi = out.data() + i * m;
    const double* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) outi[j] += aip * bp[j];
    }
  }
  return out;
}

Mat transpose(const Mat& a) {
  Mat out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  return out;
}

namespace {
template <class F>
Mat zip(const char* op, const Mat& a, const Mat& b, F f) {
  if (!a.same_shape(b)) throw_dim_error(op, a, b);
  Mat out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = f(a.data()[i], b.data()[i]);
  return out;
}
}  // namespace

Mat add(const Mat& a, const Mat& b) {
  return zip("add", a, b, [](double x, double y) { return x + y; });
}

Mat sub(const Mat& a, const Mat& b) {
  return zip("sub", a, b, [](double x, double y) { return x - y; });
}

Mat hadamard(const Mat& a, const Mat& b) {
  return zip("hadamard", a, b, [](double x, double y) { return x * y; });
}

Mat scale(const Mat& a, double s) {
  Mat out = a;
  scale_in_place(out, s);
  return out;
}

Mat add_scalar(const Mat& a, double s) {
  Mat out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += s;
  return out;
}

Mat axpy(const Mat& a, double s, const Mat& b) {
  return zip("axpy", a, b, [s](double x, double y) { return x + s * y; });
}

void scale_in_place(Mat& a, double s) {
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] *= s;
}

void add_in_place(Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw_dim_error("add_in_place", a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
}

void axpy_in_place(Mat& a, double s, const Mat& b) {
  if (!a.same_shape(b)) throw_dim_error("axpy_in_place", a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += s * b.data()[i];
}

std::vector<double> row_sum(const Mat& a) {
  std::vector<double> out(a.rows(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out[r] += a(r, c);
  return out;
}

std::vector<double> col_sum(const Mat& a) {
  std::vector<double> out(a.cols(), 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out[c] += a(r, c);
  return out;
}

std::vector<double> col_mean(const Mat& a) {
  std::vector<double> out = col_sum(a);
  if (a.rows() == 0) return out;
  for (double& v : out) v /= static_cast<double>(a.rows());
  return out;
}

double total_sum(const Mat& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
  return s;
}

double max_abs(const Mat& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i]));
  return m;
}

double max_abs_diff(const Mat& a, const Mat& b) {
  if (!a.same_shape(b)) throw_dim_error("max_abs_diff", a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

Mat add_row_broadcast(const Mat& a, const std::vector<double>& v) {
  if (v.size() != a.cols()) throw DimError("add_row_broadcast: vector length != cols");
  Mat out = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) += v[c];
  return out;
}

Mat softmax_rows(const Mat& scores) {
  Mat out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    double mx = scores(r, 0);
    for (std::size_t c = 1; c < scores.cols(); ++c) mx = std::max(mx, scores(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < scores.cols(); ++c) {
      const double e = std::exp(scores(r, c) - mx);
      out(r, c) = e;
      denom += e;
    }
    for (std::size_t c = 0; c < scores.cols(); ++c) out(r, c) /= denom;
  }
  return out;
}

double stable_log(double p, double eps) { return std::log(std::max(p, eps)); }

}  // namespace ensdiv
