#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "ensdiv/error.hpp"

namespace ensdiv {

/// Dense row-major matrix of doubles. All kernels are pure: identical inputs
/// produce bit-identical outputs, and no kernel mutates its operands.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Mat from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Mat row_vector(std::initializer_list<double> values);
  static Mat identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  /// Throws DomainError if any entry is NaN or infinite.
  void require_finite(const char* what) const;

  Mat select_rows(const std::vector<std::size_t>& idx) const;
  Mat row(std::size_t r) const;

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

[[noreturn]] void throw_dim_error(const char* op, const Mat& a, const Mat& b);

Mat matmul(const Mat& a, const Mat& b);
Mat transpose(const Mat& a);
Mat add(const Mat& a, const Mat& b);
Mat sub(const Mat& a, const Mat& b);
Mat hadamard(const Mat& a, const Mat& b);
Mat scale(const Mat& a, double s);
Mat add_scalar(const Mat& a, double s);
/// a + s*b, shapes must match.
Mat axpy(const Mat& a, double s, const Mat& b);
void scale_in_place(Mat& a, double s);
void add_in_place(Mat& a, const Mat& b);
void axpy_in_place(Mat& a, double s, const Mat& b);

std::vector<double> row_sum(const Mat& a);
std::vector<double> col_sum(const Mat& a);
std::vector<double> col_mean(const Mat& a);
double total_sum(const Mat& a);
double max_abs(const Mat& a);
double max_abs_diff(const Mat& a, const Mat& b);

/// Adds a length-cols row vector to every row.
Mat add_row_broadcast(const Mat& a, const std::vector<double>& v);

/// Row-wise softmax with max-shift; every output row lies on the open
/// probability simplex for finite input.
Mat softmax_rows(const Mat& scores);

/// log(max(p, eps)); keeps cross-entropy finite for collapsed predictions.
double stable_log(double p, double eps = 1e-12);

}  // namespace ensdiv
