#include "dssfn/matrix.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace dssfn {
namespace {

using ERowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<ERowMajor>;
using ECMap = Eigen::Map<const ERowMajor>;

ECMap map_of(const Matrix& m) { return ECMap(m.data(), m.rows(), m.cols()); }
EMap map_of(Matrix& m) { return EMap(m.data(), m.rows(), m.cols()); }

[[noreturn]] void throw_shape(const char* op, const Matrix& a, const Matrix& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes " << a.rows() << "x" << a.cols() << " and "
     << b.rows() << "x" << b.cols();
  throw std::invalid_argument(os.str());
}

void require_nonempty(const char* op, const Matrix& a) {
  if (a.empty()) {
    throw std::invalid_argument(std::string(op) + ": empty matrix");
  }
}

}  // namespace

Matrix::Matrix(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 1 || cols < 1) {
    std::ostringstream os;
    os << "Matrix: dimensions must be positive, got " << rows << "x" << cols;
    throw std::invalid_argument(os.str());
  }
  data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  if (r == 0) throw std::invalid_argument("from_rows: no rows");
  const int c = static_cast<int>(rows.begin()->size());
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) {
      throw std::invalid_argument("from_rows: ragged rows");
    }
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

double& Matrix::at(int r, int c) {
  if (r < 0 || r >= rows_ || c < 0 || c >= cols_) {
    std::ostringstream os;
    os << "Matrix::at: index (" << r << "," << c << ") out of range for "
       << rows_ << "x" << cols_;
    throw std::out_of_range(os.str());
  }
  return (*this)(r, c);
}

double Matrix::at(int r, int c) const {
  return const_cast<Matrix*>(this)->at(r, c);
}

bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
}

void Matrix::check_finite(const std::string& context) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      std::ostringstream os;
      os << context << ": non-finite entry " << data_[i] << " at ("
         << i / cols_ << "," << i % cols_ << ")";
      throw std::domain_error(os.str());
    }
  }
}

void Matrix::print(std::ostream& os) const {
  char buf[40];
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", (*this)(r, c));
      if (c) os << ' ';
      os << buf;
    }
    os << '\n';
  }
}

std::string Matrix::to_debug_string() const {
  std::ostringstream os;
  print(os);
  return os.str();
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  out += b;
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  Matrix out = a;
  out -= b;
  return out;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix out = a;
  out *= s;
  return out;
}

Matrix operator*(const Matrix& a, double s) { return s * a; }

Matrix& operator+=(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape("add", a, b);
  map_of(a) += map_of(b);
  return a;
}

Matrix& operator-=(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape("sub", a, b);
  map_of(a) -= map_of(b);
  return a;
}

Matrix& operator*=(Matrix& a, double s) {
  map_of(a) *= s;
  return a;
}

void add_scaled(Matrix& a, double s, const Matrix& b) {
  if (!a.same_shape(b)) throw_shape("add_scaled", a, b);
  map_of(a) += s * map_of(b);
}

Matrix mat_mul(const Matrix& a, const Matrix& b) {
  require_nonempty("mat_mul", a);
  require_nonempty("mat_mul", b);
  if (a.cols() != b.rows()) throw_shape("mat_mul", a, b);
  Matrix out(a.rows(), b.cols());
  map_of(out).noalias() = map_of(a) * map_of(b);
  return out;
}

Matrix mat_mul_nt(const Matrix& a, const Matrix& b) {
  require_nonempty("mat_mul_nt", a);
  require_nonempty("mat_mul_nt", b);
  if (a.cols() != b.cols()) throw_shape("mat_mul_nt", a, b);
  Matrix out(a.rows(), b.rows());
  map_of(out).noalias() = map_of(a) * map_of(b).transpose();
  return out;
}

Matrix mat_mul_tn(const Matrix& a, const Matrix& b) {
  require_nonempty("mat_mul_tn", a);
  require_nonempty("mat_mul_tn", b);
  if (a.rows() != b.rows()) throw_shape("mat_mul_tn", a, b);
  Matrix out(a.cols(), b.cols());
  map_of(out).noalias() = map_of(a).transpose() * map_of(b);
  return out;
}

Matrix transpose(const Matrix& a) {
  require_nonempty("transpose", a);
  Matrix out(a.cols(), a.rows());
  map_of(out) = map_of(a).transpose();
  return out;
}

double frobenius_norm_sq(const Matrix& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  return acc;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(frobenius_norm_sq(a)); }

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (double v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

// ---- SPD solves -----------------------------------------------------------

namespace {

// Unblocked Cholesky scan used only after the fast path rejects the matrix,
// to report which pivot failed. Pivots at or below floor count as failures,
// so an exactly singular matrix is caught even when rounding noise keeps its
// pivots a hair above zero.
int find_failing_pivot(const Matrix& s, double floor) {
  const int n = s.rows();
  std::vector<double> l(static_cast<std::size_t>(n) * n, 0.0);
  auto L = [&](int r, int c) -> double& { return l[static_cast<std::size_t>(r) * n + c]; };
  for (int j = 0; j < n; ++j) {
    double d = s(j, j);
    for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > floor) || !std::isfinite(d)) return j;
    const double root = std::sqrt(d);
    L(j, j) = root;
    for (int i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (int k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
      L(i, j) = v / root;
    }
  }
  return n - 1;
}

}  // namespace

struct SpdFactor::Impl {
  Eigen::LLT<Eigen::MatrixXd> llt;
  int n = 0;
};

SpdFactor::SpdFactor(const Matrix& s) : impl_(new Impl) {
  require_nonempty("SpdFactor", s);
  if (s.rows() != s.cols()) {
    std::ostringstream os;
    os << "SpdFactor: matrix must be square, got " << s.rows() << "x" << s.cols();
    throw std::invalid_argument(os.str());
  }
  const int n = s.rows();
  const double scale = std::max(1.0, max_abs(s));
  for (int r = 0; r < n; ++r) {
    for (int c = r + 1; c < n; ++c) {
      if (std::abs(s(r, c) - s(c, r)) > 1e-10 * scale) {
        std::ostringstream os;
        os << "SpdFactor: matrix not symmetric at (" << r << "," << c << "): "
           << s(r, c) << " vs " << s(c, r);
        throw std::invalid_argument(os.str());
      }
    }
  }
  Eigen::MatrixXd sym(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c <= r; ++c) {
      const double v = 0.5 * (s(r, c) + s(c, r));
      sym(r, c) = v;
      sym(c, r) = v;
    }
  }
  impl_->n = n;
  impl_->llt.compute(sym);
  // LLT can numerically succeed on a singular matrix when a zero pivot rounds
  // to tiny positive, so back the info() check with a condition estimate.
  if (impl_->llt.info() != Eigen::Success || !(impl_->llt.rcond() > 1e-14)) {
    const int pivot = find_failing_pivot(s, 1e-13 * scale);
    std::ostringstream os;
    os << "SpdFactor: matrix not positive definite (pivot " << pivot
       << " failed); the Gram system may be degenerate or its "
          "regularization weight too small";
    throw NotPositiveDefiniteError(os.str(), pivot);
  }
}

SpdFactor::~SpdFactor() = default;
SpdFactor::SpdFactor(SpdFactor&&) noexcept = default;
SpdFactor& SpdFactor::operator=(SpdFactor&&) noexcept = default;

int SpdFactor::dim() const { return impl_->n; }

Matrix SpdFactor::solve(const Matrix& rhs) const {
  require_nonempty("SpdFactor::solve", rhs);
  if (rhs.rows() != impl_->n) {
    std::ostringstream os;
    os << "SpdFactor::solve: rhs has " << rhs.rows() << " rows, expected "
       << impl_->n;
    throw std::invalid_argument(os.str());
  }
  Matrix out(rhs.rows(), rhs.cols());
  map_of(out) = impl_->llt.solve(map_of(rhs));
  return out;
}

Matrix SpdFactor::solve_right(const Matrix& b) const {
  require_nonempty("SpdFactor::solve_right", b);
  if (b.cols() != impl_->n) {
    std::ostringstream os;
    os << "SpdFactor::solve_right: lhs has " << b.cols() << " cols, expected "
       << impl_->n;
    throw std::invalid_argument(os.str());
  }
  // S symmetric: X = b S^{-1} = (S^{-1} b^T)^T.
  Matrix out(b.rows(), b.cols());
  map_of(out) = impl_->llt.solve(map_of(b).transpose()).transpose();
  return out;
}

Matrix solve_spd(const Matrix& s, const Matrix& rhs) {
  return SpdFactor(s).solve(rhs);
}

Matrix random_matrix(SeededRng& rng, int rows, int cols, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    std::ostringstream os;
    os << "random_matrix: scale must be positive and finite, got " << scale;
    throw std::invalid_argument(os.str());
  }
  Matrix out(rows, cols);
  double* p = out.data();
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) p[i] = scale * rng.next_symmetric();
  return out;
}

}  // namespace dssfn
