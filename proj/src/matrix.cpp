#include "xtl/matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "xtl/parallel.hpp"

namespace xtl {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                " does not match shape " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("Matrix::from_rows: ragged rows");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string shape_string(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_string(a) +
                                " vs " + shape_string(b));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix out(m, n);
  // i-k-j order: each out(i,j) accumulates over k in ascending order, which
  // keeps the summation order fixed while staying cache friendly. Rows are
  // independent, so splitting them across threads changes nothing.
  auto rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double* out_row = out.data().data() + i * n;
      const double* a_row = a.data().data() + i * k;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double av = a_row[kk];
        const double* b_row = b.data().data() + kk * n;
        for (std::size_t j = 0; j < n; ++j) out_row[j] += av * b_row[j];
      }
    }
  };
  if (m * k * n >= (std::size_t{1} << 21)) {
    parallel_for(m, rows);
  } else {
    rows(0, m);
  }
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix tanh_map(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = std::tanh(v);
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

Matrix pairwise_sq_dist(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("pairwise_sq_dist: feature dimensions disagree: " +
                                shape_string(a) + " vs " + shape_string(b));
  }
  Matrix out(a.rows(), b.rows());
  auto rows = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < b.rows(); ++j) {
        out(i, j) = squared_distance(a.row(i), b.row(j));
      }
    }
  };
  if (a.rows() * b.rows() * a.cols() >= (std::size_t{1} << 21)) {
    parallel_for(a.rows(), rows);
  } else {
    rows(0, a.rows());
  }
  return out;
}

double frobenius_norm(const Matrix& x) {
  double s = 0.0;
  for (double v : x.data()) s += v * v;
  return std::sqrt(s);
}

Matrix column_sums(const Matrix& m) {
  Matrix out(1, m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(0, j) += m(i, j);
  return out;
}

std::string to_string(Distance d) {
  switch (d) {
    case Distance::squared_euclidean: return "squared_euclidean";
    case Distance::euclidean: return "euclidean";
    case Distance::cosine: return "cosine";
  }
  return "?";
}

Distance distance_from_string(const std::string& s) {
  if (s == "squared_euclidean") return Distance::squared_euclidean;
  if (s == "euclidean") return Distance::euclidean;
  if (s == "cosine") return Distance::cosine;
  throw std::invalid_argument("unknown distance: " + s);
}

}  // namespace xtl
