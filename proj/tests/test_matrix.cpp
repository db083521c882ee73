#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dssfn/matrix.hpp"
#include "oracles.hpp"

using dssfn::Matrix;
using dssfn::SeededRng;

namespace {

Matrix random_spd(SeededRng& rng, int n) {
  const Matrix g = dssfn::random_matrix(rng, n, n, 1.0);
  Matrix s = dssfn::mat_mul_nt(g, g);
  for (int i = 0; i < n; ++i) s(i, i) += 1.0;
  return s;
}

}  // namespace

TEST_CASE("matrix construction and access") {
  Matrix a(2, 3);
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 3);
  CHECK(a(1, 2) == 0.0);
  a(1, 2) = 7.5;
  CHECK(a.at(1, 2) == 7.5);

  CHECK_THROWS_AS(Matrix(0, 3), std::invalid_argument);
  CHECK_THROWS_AS(Matrix(3, -1), std::invalid_argument);
  CHECK_THROWS_AS(a.at(2, 0), std::out_of_range);
  CHECK_THROWS_AS(a.at(0, 3), std::out_of_range);

  const Matrix empty;
  CHECK(empty.empty());
  CHECK_THROWS_AS(dssfn::transpose(empty), std::invalid_argument);

  const Matrix id = Matrix::identity(3);
  CHECK(id(0, 0) == 1.0);
  CHECK(id(0, 1) == 0.0);

  const Matrix lit = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  CHECK(lit(1, 0) == 3.0);
  CHECK_THROWS_AS(Matrix::from_rows({{1.0}, {2.0, 3.0}}), std::invalid_argument);
}

TEST_CASE("matrix equality is exact") {
  const Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  Matrix b = a;
  CHECK(a == b);
  b(0, 0) += 1e-16;  // below any tolerance, but equality is exact
  CHECK(a == b);     // 1 + 1e-16 rounds back to 1
  b(0, 0) = 1.0 + 1e-15;
  CHECK(a != b);
  CHECK(a != Matrix(2, 3));
}

TEST_CASE("row-major storage order") {
  const Matrix a = Matrix::from_rows({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  const double* p = a.data();
  CHECK(p[0] == 1.0);
  CHECK(p[2] == 3.0);
  CHECK(p[3] == 4.0);
  CHECK(a.values().size() == 6);
}

TEST_CASE("product matches the worked example") {
  const Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
  const Matrix b = Matrix::from_rows({{0.0}, {1.0}});
  const Matrix c = dssfn::mat_mul(a, b);
  CHECK(c == Matrix::from_rows({{2.0}, {4.0}}));
}

TEST_CASE("products match the triple-loop oracle") {
  SeededRng rng(11);
  for (auto [r, k, c] : {std::tuple{3, 4, 5}, {1, 7, 2}, {8, 1, 8}, {13, 13, 13}}) {
    const Matrix a = dssfn::random_matrix(rng, r, k, 2.0);
    const Matrix b = dssfn::random_matrix(rng, k, c, 2.0);
    CHECK(oracle::rel_max_diff(dssfn::mat_mul(a, b), oracle::mat_mul(a, b)) < 1e-13);

    const Matrix bt = dssfn::random_matrix(rng, c, k, 2.0);
    CHECK(oracle::rel_max_diff(dssfn::mat_mul_nt(a, bt),
                               oracle::mat_mul(a, oracle::transpose(bt))) < 1e-13);

    const Matrix at = dssfn::random_matrix(rng, k, r, 2.0);
    CHECK(oracle::rel_max_diff(dssfn::mat_mul_tn(at, b),
                               oracle::mat_mul(oracle::transpose(at), b)) < 1e-13);
  }
  CHECK_THROWS_AS(dssfn::mat_mul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("product is associative within rounding") {
  SeededRng rng(12);
  const Matrix a = dssfn::random_matrix(rng, 20, 30, 1.0);
  const Matrix b = dssfn::random_matrix(rng, 30, 25, 1.0);
  const Matrix c = dssfn::random_matrix(rng, 25, 10, 1.0);
  const Matrix left = dssfn::mat_mul(dssfn::mat_mul(a, b), c);
  const Matrix right = dssfn::mat_mul(a, dssfn::mat_mul(b, c));
  CHECK(oracle::rel_max_diff(left, right) < 1e-9);
}

TEST_CASE("transpose and elementwise operators") {
  SeededRng rng(13);
  const Matrix a = dssfn::random_matrix(rng, 4, 6, 1.0);
  const Matrix b = dssfn::random_matrix(rng, 4, 6, 1.0);

  CHECK(dssfn::transpose(dssfn::transpose(a)) == a);
  CHECK(dssfn::transpose(a) == oracle::transpose(a));

  const Matrix sum = a + b;
  const Matrix diff = a - b;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) {
      CHECK(sum(i, j) == a(i, j) + b(i, j));
      CHECK(diff(i, j) == a(i, j) - b(i, j));
    }
  }
  CHECK(2.0 * a == a * 2.0);
  Matrix c = a;
  c += b;
  CHECK(c == sum);
  c -= b;
  CHECK(oracle::rel_max_diff(c, a) < 1e-15);
  c = a;
  c *= 3.0;
  CHECK(c == 3.0 * a);

  Matrix d = a;
  dssfn::add_scaled(d, -0.5, b);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 6; ++j) CHECK(d(i, j) == a(i, j) - 0.5 * b(i, j));
  }
  CHECK_THROWS_AS(a + Matrix(5, 6), std::invalid_argument);
}

TEST_CASE("norms match the entrywise oracle") {
  const Matrix a = Matrix::from_rows({{2.0, 2.0}, {2.0, 2.0}});
  CHECK(dssfn::frobenius_norm_sq(a) == 16.0);
  CHECK(dssfn::frobenius_norm(a) == 4.0);
  CHECK(dssfn::max_abs(Matrix::from_rows({{-3.0, 1.0}, {2.0, -0.5}})) == 3.0);
  CHECK(dssfn::max_abs(Matrix()) == 0.0);

  SeededRng rng(14);
  const Matrix r = dssfn::random_matrix(rng, 9, 17, 5.0);
  CHECK(dssfn::frobenius_norm_sq(r) ==
        doctest::Approx(oracle::frobenius_sq(r)).epsilon(1e-14));
}

TEST_CASE("check_finite names the bad entry") {
  Matrix a(2, 2);
  a.check_finite("fixture");
  a(1, 0) = std::nan("");
  try {
    a.check_finite("fixture");
    CHECK(false);
  } catch (const std::domain_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("fixture") != std::string::npos);
    CHECK(msg.find("1") != std::string::npos);
  }
}

TEST_CASE("debug printing round-trips doubles") {
  const Matrix a = Matrix::from_rows({{1.0 / 3.0, -2.0e-17}});
  const std::string s = a.to_debug_string();
  std::istringstream in(s);
  double x = 0.0, y = 0.0;
  in >> x >> y;
  CHECK(x == 1.0 / 3.0);
  CHECK(y == -2.0e-17);
}

TEST_CASE("spd solve matches the worked example") {
  const Matrix s = Matrix::from_rows({{2.0, 0.0}, {0.0, 2.0}});
  const Matrix rhs = Matrix::from_rows({{4.0}, {6.0}});
  const Matrix x = dssfn::solve_spd(s, rhs);
  // the factor path divides by sqrt(2) twice, so allow rounding at the ulp
  CHECK(oracle::rel_max_diff(x, Matrix::from_rows({{2.0}, {3.0}})) < 1e-14);
}

TEST_CASE("spd solve agrees with Gaussian elimination") {
  SeededRng rng(15);
  for (int n : {1, 2, 5, 12, 40}) {
    const Matrix s = random_spd(rng, n);
    const Matrix rhs = dssfn::random_matrix(rng, n, 3, 1.0);
    const Matrix x = dssfn::solve_spd(s, rhs);
    CHECK(oracle::rel_max_diff(x, oracle::solve_linear(s, rhs)) < 1e-9);
    // residual check, independent of any solver
    CHECK(oracle::rel_max_diff(oracle::mat_mul(s, x), rhs) < 1e-8);
  }
}

TEST_CASE("spd factor solves both sides") {
  SeededRng rng(16);
  const Matrix s = random_spd(rng, 8);
  const dssfn::SpdFactor f(s);
  CHECK(f.dim() == 8);

  const Matrix rhs = dssfn::random_matrix(rng, 8, 2, 1.0);
  CHECK(oracle::rel_max_diff(oracle::mat_mul(s, f.solve(rhs)), rhs) < 1e-8);

  const Matrix b = dssfn::random_matrix(rng, 3, 8, 1.0);
  const Matrix x = f.solve_right(b);
  CHECK(oracle::rel_max_diff(oracle::mat_mul(x, s), b) < 1e-8);
  CHECK(oracle::rel_max_diff(x, oracle::solve_right(s, b)) < 1e-9);

  CHECK_THROWS_AS(f.solve(Matrix(7, 2)), std::invalid_argument);
  CHECK_THROWS_AS(f.solve_right(Matrix(3, 7)), std::invalid_argument);
}

TEST_CASE("spd failures carry the failing pivot") {
  const Matrix indefinite = Matrix::from_rows({{1.0, 0.0}, {0.0, -1.0}});
  try {
    dssfn::solve_spd(indefinite, Matrix(2, 1));
    CHECK(false);
  } catch (const dssfn::NotPositiveDefiniteError& e) {
    CHECK(e.pivot == 1);
    CHECK(std::string(e.what()).find("positive definite") != std::string::npos);
  }

  Matrix zero(3, 3);
  try {
    dssfn::solve_spd(zero, Matrix(3, 1));
    CHECK(false);
  } catch (const dssfn::NotPositiveDefiniteError& e) {
    CHECK(e.pivot == 0);
  }

  // rank-1 Gram: second pivot collapses
  const Matrix ones = Matrix::from_rows({{1.0, 1.0}, {1.0, 1.0}});
  try {
    dssfn::solve_spd(ones, Matrix(2, 1));
    CHECK(false);
  } catch (const dssfn::NotPositiveDefiniteError& e) {
    CHECK(e.pivot == 1);
  }

  const Matrix asym = Matrix::from_rows({{1.0, 2.0}, {0.0, 1.0}});
  CHECK_THROWS_AS(dssfn::SpdFactor{asym}, std::invalid_argument);
  CHECK_THROWS_AS(dssfn::SpdFactor{Matrix(2, 3)}, std::invalid_argument);
}

TEST_CASE("random matrices replay the generator stream") {
  SeededRng a(99);
  SeededRng b(99);
  const Matrix m = dssfn::random_matrix(a, 3, 4, 2.5);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double expect = 2.5 * b.next_symmetric();
      CHECK(m(i, j) == expect);  // row-major draw order, exact
      CHECK(m(i, j) >= -2.5);
      CHECK(m(i, j) < 2.5);
    }
  }
  SeededRng c(99);
  CHECK(dssfn::random_matrix(c, 3, 4, 2.5) == m);
  CHECK_THROWS_AS(dssfn::random_matrix(c, 3, 4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dssfn::random_matrix(c, 3, 4, -1.0), std::invalid_argument);
}

TEST_CASE("random matrix mean concentrates near zero") {
  SeededRng rng(7);
  const double scale = 0.5;
  const Matrix m = dssfn::random_matrix(rng, 1000, 1000, scale);
  long double sum = 0.0L;
  for (int i = 0; i < 1000; ++i) {
    for (int j = 0; j < 1000; ++j) sum += m(i, j);
  }
  const double mean = static_cast<double>(sum) / 1e6;
  // mean of 1e6 iid uniform[-s, s) draws: sd = s/sqrt(3e6) ~ 2.9e-4 * s
  CHECK(std::abs(mean) < 3.0 * scale / 1000.0);
}
