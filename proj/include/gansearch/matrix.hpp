#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace gansearch {

// Dense row-major matrix of doubles. Rows are samples wherever a matrix holds
// a batch; weights are stored as [d_out x d_in].
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v);
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scaled(const Matrix& m, double s);
void add_inplace(Matrix& target, const Matrix& other);
void axpy_inplace(Matrix& target, double alpha, const Matrix& other);

// 1 x cols sum over rows.
Matrix column_sum(const Matrix& m);
double sum(const Matrix& m);
double mean(const Matrix& m);

Matrix concat_cols(const Matrix& left, const Matrix& right);
Matrix slice_cols(const Matrix& m, std::size_t begin, std::size_t end);
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

bool all_finite(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

// Throws DimensionError naming both shapes when they differ.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace gansearch
