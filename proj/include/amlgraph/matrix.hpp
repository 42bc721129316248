#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "amlgraph/error.hpp"

namespace amlgraph {

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    require<ShapeError>(data_.size() == rows * cols, "Matrix: value count does not match shape");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> init) {
    rows_ = init.size();
    cols_ = rows_ ? init.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& row : init) {
      require<ShapeError>(row.size() == cols_, "Matrix: ragged initializer");
      data_.insert(data_.end(), row.begin(), row.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  void fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  Matrix& operator+=(const Matrix& o) {
    require<ShapeError>(same_shape(o), "Matrix +=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    require<ShapeError>(same_shape(o), "Matrix -=: shape mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) noexcept {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

  std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }

inline bool all_finite(const Matrix& m) noexcept {
  return std::all_of(m.values().begin(), m.values().end(), [](double v) { return std::isfinite(v); });
}

inline void check_finite(const Matrix& m, const char* where) {
  if (!all_finite(m)) throw TrainingError(std::string(where) + ": non-finite value");
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  require<ShapeError>(a.same_shape(b), "max_abs_diff: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.values()[i] - b.values()[i]));
  return d;
}

namespace detail {

/// Runs body(begin, end) over [0, n) split into contiguous chunks. Each
/// index is handled by exactly one call, so per-index results do not depend
/// on the thread count.
template <class Body>
void parallel_rows(std::size_t n, std::size_t work_per_row, Body&& body) {
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t total = n * std::max<std::size_t>(work_per_row, 1);
  std::size_t threads = std::min<std::size_t>(hw, total / (1u << 16));
  threads = std::min(threads, n);
  if (threads <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads - 1);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t b = t * chunk, e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back([&body, b, e] { body(b, e); });
  }
  body(std::size_t{0}, std::min(n, chunk));
}

}  // namespace detail

namespace detail {

// c[i0..i0+R) += a[i0..i0+R) * b, accumulating over k in ascending order.
template <std::size_t R>
inline void matmul_rows(const double* a, const double* b, double* c, std::size_t k_dim, std::size_t n) {
  for (std::size_t k = 0; k < k_dim; ++k) {
    const double* bk = b + k * n;
    double x[R];
    for (std::size_t r = 0; r < R; ++r) x[r] = a[r * k_dim + k];
    for (std::size_t j = 0; j < n; ++j) {
      const double bj = bk[j];
      for (std::size_t r = 0; r < R; ++r) c[r * n + j] += x[r] * bj;
    }
  }
}

}  // namespace detail

/// A * B. Every entry sums over the shared index in ascending order, so
/// the result does not depend on blocking or thread count.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require<ShapeError>(a.cols() == b.rows(), "matmul: " + a.shape_str() + " * " + b.shape_str());
  Matrix c(a.rows(), b.cols());
  const std::size_t k_dim = a.cols(), n = b.cols();
  detail::parallel_rows(a.rows(), k_dim * n, [&](std::size_t r0, std::size_t r1) {
    std::size_t i = r0;
    for (; i + 4 <= r1; i += 4) detail::matmul_rows<4>(a.data() + i * k_dim, b.data(), c.data() + i * n, k_dim, n);
    for (; i < r1; ++i) detail::matmul_rows<1>(a.data() + i * k_dim, b.data(), c.data() + i * n, k_dim, n);
  });
  return c;
}

/// Aᵀ * B. Reduction over the shared row index runs in ascending order.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require<ShapeError>(a.rows() == b.rows(), "matmul_tn: " + a.shape_str() + "^T * " + b.shape_str());
  Matrix c(a.cols(), b.cols());
  const std::size_t m = a.cols(), n = b.cols(), rows = a.rows();
  detail::parallel_rows(m, rows * n, [&](std::size_t r0, std::size_t r1) {
    std::size_t k = 0;
    for (; k + 4 <= rows; k += 4) {
      const double* b0 = b.data() + k * n;
      const double *b1 = b0 + n, *b2 = b1 + n, *b3 = b2 + n;
      for (std::size_t i = r0; i < r1; ++i) {
        const double x0 = a(k, i), x1 = a(k + 1, i), x2 = a(k + 2, i), x3 = a(k + 3, i);
        double* ci = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] = (((ci[j] + x0 * b0[j]) + x1 * b1[j]) + x2 * b2[j]) + x3 * b3[j];
      }
    }
    for (; k < rows; ++k) {
      const double* bk = b.data() + k * n;
      for (std::size_t i = r0; i < r1; ++i) {
        const double x = a(k, i);
        double* ci = c.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += x * bk[j];
      }
    }
  });
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

/// A * Bᵀ, with the same per-entry summation order as matmul.
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require<ShapeError>(a.cols() == b.cols(), "matmul_nt: " + a.shape_str() + " * " + b.shape_str() + "^T");
  return matmul(a, transpose(b));
}

inline Matrix relu(const Matrix& a) {
  Matrix r = a;
  for (auto& v : r.values()) v = v > 0.0 ? v : 0.0;
  return r;
}

/// Gradient of relu given the forward input: passes grad where input > 0.
inline Matrix relu_backward(const Matrix& grad_out, const Matrix& forward_input) {
  require<ShapeError>(grad_out.same_shape(forward_input), "relu_backward: shape mismatch");
  Matrix g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(forward_input.values()[i] > 0.0)) g.values()[i] = 0.0;
  return g;
}

inline Matrix leaky_relu(const Matrix& a, double slope) {
  Matrix r = a;
  for (auto& v : r.values()) v = v > 0.0 ? v : slope * v;
  return r;
}

/// Adds row vector b (1×C or length C) to every row of A.
inline Matrix add_bias(const Matrix& a, std::span<const double> b) {
  require<ShapeError>(b.size() == a.cols(), "add_bias: bias length " + std::to_string(b.size()) +
                                                " vs " + std::to_string(a.cols()) + " columns");
  Matrix r = a;
  for (std::size_t i = 0; i < r.rows(); ++i) {
    auto row = r.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return r;
}

inline Matrix add_bias(const Matrix& a, const Matrix& b) {
  require<ShapeError>(b.rows() == 1, "add_bias: bias must be a row vector");
  return add_bias(a, b.row(0));
}

/// Column sums as a 1×C matrix.
inline Matrix column_sums(const Matrix& a) {
  Matrix s(1, a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) s(0, j) += row[j];
  }
  return s;
}

/// [A | B]
inline Matrix hconcat(const Matrix& a, const Matrix& b) {
  require<ShapeError>(a.rows() == b.rows(), "hconcat: row mismatch");
  Matrix r(a.rows(), a.cols() + b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::copy(a.row(i).begin(), a.row(i).end(), r.row(i).begin());
    std::copy(b.row(i).begin(), b.row(i).end(), r.row(i).begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return r;
}

/// Columns [begin, end) of A.
inline Matrix column_slice(const Matrix& a, std::size_t begin, std::size_t end) {
  require<ShapeError>(begin <= end && end <= a.cols(), "column_slice: range out of bounds");
  Matrix r(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    std::copy(a.row(i).begin() + static_cast<std::ptrdiff_t>(begin),
              a.row(i).begin() + static_cast<std::ptrdiff_t>(end), r.row(i).begin());
  return r;
}

inline Matrix select_rows(const Matrix& a, std::span<const std::size_t> idx) {
  Matrix r(idx.size(), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require<ShapeError>(idx[i] < a.rows(), "select_rows: index out of range");
    std::copy(a.row(idx[i]).begin(), a.row(idx[i]).end(), r.row(i).begin());
  }
  return r;
}

}  // namespace amlgraph
