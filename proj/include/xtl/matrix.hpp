#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace xtl {

/// Row-major dense matrix of 64-bit floats. Every vector/matrix quantity in
/// the library (feature rows, embeddings, weights, distance tables) is one of
/// these. Reductions over entries always run in a fixed index order so that
/// repeated evaluation is bit-identical.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Matrix& m);

/// Product a*b with a fixed left-to-right summation over the inner dimension.
/// Throws std::invalid_argument naming both shapes on a dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& m);

/// Elementwise max(0, x).
Matrix relu(const Matrix& x);

/// Elementwise tanh.
Matrix tanh_map(const Matrix& x);

/// Entry (i,j) = sum_k (a(i,k) - b(j,k))^2. Requires equal column counts.
/// When called with a == b the result has an exactly zero diagonal and is
/// bitwise symmetric.
Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b);

/// sqrt of the sum of squared entries, accumulated in index order.
double frobenius_norm(const Matrix& x);

/// Column sums as a 1 x cols row vector, accumulated in row order.
Matrix column_sums(const Matrix& m);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Metric used for ranking and for the triplet hinge. Cosine is only valid
/// for retrieval ranking; the losses reject it.
enum class Distance { squared_euclidean, euclidean, cosine };

std::string to_string(Distance d);
Distance distance_from_string(const std::string& s);

}  // namespace xtl
