#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dssfn/rng.hpp"

namespace dssfn {

// Dense real matrix, row-major contiguous storage. Dimensions are fixed at
// construction; a default-constructed Matrix is the empty 0x0 placeholder
// and is rejected by every numerical operation.
class Matrix {
 public:
  Matrix() = default;

  // Zero-filled rows x cols matrix. Throws std::invalid_argument unless
  // both dimensions are positive.
  Matrix(int rows, int cols);

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
  static Matrix identity(int n);

  // Row-literal constructor for tests and small fixtures. All rows must
  // have the same length.
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double& at(int r, int c);
  double at(int r, int c) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  // Exact element-wise equality (used by determinism and round-trip tests).
  friend bool operator==(const Matrix& a, const Matrix& b);
  friend bool operator!=(const Matrix& a, const Matrix& b) { return !(a == b); }

  // Throws std::domain_error naming the first non-finite entry, if any.
  void check_finite(const std::string& context) const;

  // Debug dump: one row per line, entries space-separated, enough digits to
  // round-trip a double exactly.
  void print(std::ostream& os) const;
  std::string to_debug_string() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// ---- arithmetic -----------------------------------------------------------

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);
Matrix operator*(const Matrix& a, double s);
Matrix& operator+=(Matrix& a, const Matrix& b);
Matrix& operator-=(Matrix& a, const Matrix& b);
Matrix& operator*=(Matrix& a, double s);

// a <- a + s * b
void add_scaled(Matrix& a, double s, const Matrix& b);

// ---- products -------------------------------------------------------------

// a (r x k) times b (k x c). Throws std::invalid_argument on inner
// dimension mismatch, with both shapes in the message.
Matrix mat_mul(const Matrix& a, const Matrix& b);

// a * b^T without forming the transpose.
Matrix mat_mul_nt(const Matrix& a, const Matrix& b);

// a^T * b without forming the transpose.
Matrix mat_mul_tn(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// ---- reductions -----------------------------------------------------------

double frobenius_norm_sq(const Matrix& a);
double frobenius_norm(const Matrix& a);

// Largest absolute entry (0 for the empty matrix).
double max_abs(const Matrix& a);

// ---- SPD solves -----------------------------------------------------------

// Thrown when a matrix handed to solve_spd / SpdFactor is not numerically
// positive definite. pivot is the zero-based index of the first Cholesky
// pivot that failed; for consensus Gram systems this typically means the
// regularization weight is too small or the Gram matrix is degenerate.
struct NotPositiveDefiniteError : std::runtime_error {
  NotPositiveDefiniteError(const std::string& msg, int pivot_index)
      : std::runtime_error(msg), pivot(pivot_index) {}
  int pivot;
};

// Cholesky factorization of a symmetric positive definite matrix, reusable
// across many right-hand sides. The input must be square and symmetric to
// within 1e-10 relative tolerance; only the lower triangle is read.
class SpdFactor {
 public:
  explicit SpdFactor(const Matrix& s);
  ~SpdFactor();
  SpdFactor(SpdFactor&&) noexcept;
  SpdFactor& operator=(SpdFactor&&) noexcept;
  SpdFactor(const SpdFactor&) = delete;
  SpdFactor& operator=(const SpdFactor&) = delete;

  int dim() const;

  // Solves S * X = rhs.
  Matrix solve(const Matrix& rhs) const;

  // Solves X * S = b, i.e. X = b * S^{-1}.
  Matrix solve_right(const Matrix& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot S * X = rhs for SPD S.
Matrix solve_spd(const Matrix& s, const Matrix& rhs);

// ---- random fill ----------------------------------------------------------

// rows x cols matrix with i.i.d. entries uniform in [-scale, scale), drawn
// from rng in row-major order. scale must be positive and finite.
Matrix random_matrix(SeededRng& rng, int rows, int cols, double scale);

}  // namespace dssfn
