#include "oracles.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace oracle {

using dssfn::Matrix;

Matrix mat_mul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("oracle: shape");
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      long double acc = 0.0L;
      for (int k = 0; k < a.cols(); ++k) {
        acc += static_cast<long double>(a(i, k)) * b(k, j);
      }
      out(i, j) = static_cast<double>(acc);
    }
  }
  return out;
}

Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

double frobenius_sq(const Matrix& a) {
  long double acc = 0.0L;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      acc += static_cast<long double>(a(i, j)) * a(i, j);
    }
  }
  return static_cast<double>(acc);
}

Matrix solve_linear(Matrix a, Matrix rhs) {
  const int n = a.rows();
  if (a.cols() != n || rhs.rows() != n) {
    throw std::invalid_argument("oracle: solve_linear shapes");
  }
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (std::abs(a(pivot, col)) < 1e-300) {
      throw std::runtime_error("oracle: singular system");
    }
    if (pivot != col) {
      for (int j = 0; j < n; ++j) std::swap(a(col, j), a(pivot, j));
      for (int j = 0; j < rhs.cols(); ++j) std::swap(rhs(col, j), rhs(pivot, j));
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (int j = col; j < n; ++j) a(r, j) -= f * a(col, j);
      for (int j = 0; j < rhs.cols(); ++j) rhs(r, j) -= f * rhs(col, j);
    }
  }
  Matrix x(n, rhs.cols());
  for (int j = 0; j < rhs.cols(); ++j) {
    for (int r = n - 1; r >= 0; --r) {
      long double acc = rhs(r, j);
      for (int k = r + 1; k < n; ++k) {
        acc -= static_cast<long double>(a(r, k)) * x(k, j);
      }
      x(r, j) = static_cast<double>(acc / a(r, r));
    }
  }
  return x;
}

Matrix solve_right(const Matrix& s, const Matrix& b) {
  // x s = b  <=>  s^T x^T = b^T; s is symmetric in every use here but the
  // transpose keeps the oracle correct for any s.
  return oracle::transpose(solve_linear(oracle::transpose(s), oracle::transpose(b)));
}

Matrix project_ball(const Matrix& o, double eps) {
  const double nsq = frobenius_sq(o);
  if (nsq <= eps) return o;
  const double scale = std::sqrt(eps / nsq);
  Matrix out(o.rows(), o.cols());
  for (int i = 0; i < o.rows(); ++i) {
    for (int j = 0; j < o.cols(); ++j) out(i, j) = o(i, j) * scale;
  }
  return out;
}

namespace {

Matrix ridge_solution(const Matrix& y, const Matrix& t, double lam) {
  const Matrix gram = oracle::mat_mul(y, oracle::transpose(y));
  Matrix shifted = gram;
  for (int i = 0; i < shifted.rows(); ++i) shifted(i, i) += lam;
  return solve_right(shifted, oracle::mat_mul(t, oracle::transpose(y)));
}

}  // namespace

Matrix constrained_ls(const Matrix& y, const Matrix& t, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("oracle: eps must be > 0");
  Matrix o = ridge_solution(y, t, 0.0);
  if (frobenius_sq(o) <= eps) return o;
  // ||o(lam)||^2 decreases monotonically in lam; bracket then bisect.
  double lo = 0.0;
  double hi = 1.0;
  while (frobenius_sq(ridge_solution(y, t, hi)) > eps) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw std::runtime_error("oracle: bracket failed");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (frobenius_sq(ridge_solution(y, t, mid)) > eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return ridge_solution(y, t, hi);
}

double objective(const Matrix& y, const Matrix& t, const Matrix& o) {
  const Matrix fit = oracle::mat_mul(o, y);
  long double acc = 0.0L;
  for (int i = 0; i < t.rows(); ++i) {
    for (int j = 0; j < t.cols(); ++j) {
      const long double d = static_cast<long double>(t(i, j)) - fit(i, j);
      acc += d * d;
    }
  }
  return static_cast<double>(acc);
}

Matrix pooled_ridge(const std::vector<Matrix>& ys, const std::vector<Matrix>& ts,
                    double mu) {
  if (ys.empty() || ys.size() != ts.size()) {
    throw std::invalid_argument("oracle: pooled_ridge shards");
  }
  Matrix gram(ys[0].rows(), ys[0].rows());
  Matrix cross(ts[0].rows(), ys[0].rows());
  for (std::size_t m = 0; m < ys.size(); ++m) {
    const Matrix g = oracle::mat_mul(ys[m], oracle::transpose(ys[m]));
    const Matrix c = oracle::mat_mul(ts[m], oracle::transpose(ys[m]));
    for (int i = 0; i < gram.rows(); ++i) {
      for (int j = 0; j < gram.cols(); ++j) gram(i, j) += g(i, j);
    }
    for (int i = 0; i < cross.rows(); ++i) {
      for (int j = 0; j < cross.cols(); ++j) cross(i, j) += c(i, j);
    }
  }
  for (int i = 0; i < gram.rows(); ++i) gram(i, i) += mu;
  return solve_right(gram, cross);
}

double rel_max_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return 1e300;
  double scale = 1.0;
  for (int i = 0; i < b.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) scale = std::max(scale, std::abs(b(i, j)));
  }
  double worst = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  }
  return worst;
}

}  // namespace oracle
