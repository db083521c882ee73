#pragma once

// Reference implementations the library results are checked against. Every
// routine here is written the straightforward slow way (triple loops,
// Gaussian elimination, scalar bisection) and shares no code with the
// library paths it verifies.

#include <vector>

#include "dssfn/matrix.hpp"

namespace oracle {

// Plain triple-loop product with long double accumulation.
dssfn::Matrix mat_mul(const dssfn::Matrix& a, const dssfn::Matrix& b);

dssfn::Matrix transpose(const dssfn::Matrix& a);

// Entry-by-entry sum of squares, long double accumulator.
double frobenius_sq(const dssfn::Matrix& a);

// Solves a * x = rhs by Gaussian elimination with partial pivoting.
// Throws std::runtime_error on a (numerically) singular system.
dssfn::Matrix solve_linear(dssfn::Matrix a, dssfn::Matrix rhs);

// Solves x * s = b, i.e. x = b * s^{-1}, through solve_linear on the
// transposed system.
dssfn::Matrix solve_right(const dssfn::Matrix& s, const dssfn::Matrix& b);

// Projection onto {||o||_F^2 <= eps}: identity inside the ball, radial
// rescaling outside.
dssfn::Matrix project_ball(const dssfn::Matrix& o, double eps);

// Exact solution of  min ||t - o y||_F^2  s.t. ||o||_F^2 <= eps  by
// Lagrange-multiplier bisection. Requires y y^T invertible.
dssfn::Matrix constrained_ls(const dssfn::Matrix& y, const dssfn::Matrix& t,
                             double eps);

// ||t - o y||_F^2.
double objective(const dssfn::Matrix& y, const dssfn::Matrix& t,
                 const dssfn::Matrix& o);

// Ridge solution on concatenated shards:
//   (sum_m t_m y_m^T) (sum_m y_m y_m^T + mu I)^{-1}.
dssfn::Matrix pooled_ridge(const std::vector<dssfn::Matrix>& ys,
                           const std::vector<dssfn::Matrix>& ts, double mu);

// Largest relative entry difference, scaled by max(1, max|b|).
double rel_max_diff(const dssfn::Matrix& a, const dssfn::Matrix& b);

}  // namespace oracle
