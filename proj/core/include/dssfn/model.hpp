#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dssfn/matrix.hpp"

namespace dssfn {

// Configuration for layer-by-layer training of the stacked random-feature
// network. The hidden width is n = 2Q + width_extra and the readout-norm
// budget is eps = eps_scale_override > 0 ? eps_override : 2Q, both resolved
// once the target dimension Q is known.
struct SsfnConfig {
  int layers = 20;        // L, number of hidden layers; must be >= 1
  int width_extra = 1000; // n - 2Q, rows of the random block; must be >= 1
  double eps_override = 0.0;  // readout norm-squared budget; 0 = default 2Q
  double mu_first = 0.0;  // ridge weight for the layer-0 solve
  double mu_rest = 0.0;   // ridge weight for every later solve
  std::uint64_t seed = 1;
  double weight_scale = 0.0;  // random-block entry scale; 0 = 1/sqrt(fan-in)

  int hidden_width(int q) const { return 2 * q + width_extra; }
  double eps(int q) const { return eps_override > 0.0 ? eps_override : 2.0 * q; }
};

// Learned model: weights[l] is W_{l+1} (layer l+1), readouts[l] is O_l.
// weights.size() == L, readouts.size() == L + 1. W_1 is n x P, later
// weights are n x n; O_0 is Q x P, later readouts are Q x n.
struct LayerStack {
  int input_dim = 0;   // P
  int target_dim = 0;  // Q
  int width = 0;       // n
  std::vector<Matrix> weights;
  std::vector<Matrix> readouts;

  int layer_count() const { return static_cast<int>(weights.size()); }
};

// Entrywise max(entry, 0).
Matrix relu(const Matrix& a);

// [I_Q ; -I_Q], the fixed 2Q x Q stacking matrix. Splitting a signal z into
// relu(z) and relu(-z) and subtracting recovers z, which is what lets each
// new layer reproduce the previous readout exactly.
Matrix build_vq(int q);

// Vertical stack [V_Q * o_star ; r_next]. o_star is Q x c, r_next is
// (n - 2Q) x c; the result has n rows.
Matrix assemble_weight(const Matrix& o_star, const Matrix& r_next, int q);

// relu(w * y_prev); column j is the propagated feature of sample j.
Matrix forward_layer(const Matrix& w, const Matrix& y_prev);

// Approximate solution of  min_O ||t - O y||_F^2  s.t. ||O||_F^2 <= eps:
// ridge solve t*y^T*(y*y^T + mu I)^-1 followed by the Frobenius-ball
// projection. The result always satisfies the constraint. mu == 0 with a
// rank-deficient y*y^T raises the SPD failure suggesting mu > 0.
Matrix centralized_layer_solve(const Matrix& y, const Matrix& t, double mu,
                               double eps);

// Exact solution of the same constrained problem, via the unconstrained
// least-squares solution when it is feasible and otherwise the unique
// Lagrange multiplier lam > 0 with ||t y^T (y y^T + lam I)^-1||_F^2 = eps,
// located on the eigenbasis of y y^T. Used by compare mode and tests as the
// reference; the training path never calls it.
Matrix constrained_least_squares(const Matrix& y, const Matrix& t, double eps);

struct TrainResult {
  LayerStack stack;
  // layer_costs[l] = ||T - O_l Y_l||_F^2 on the training set, l = 0..L.
  std::vector<double> layer_costs;
};

// Layer-by-layer training: solve the layer-0 readout on raw input with
// mu_first, then repeatedly assemble W_{l+1} from the readout plus a seeded
// random block and solve the next readout with mu_rest. The random block
// for W_l is drawn from SeededRng(seed ^ l), so any party holding the seed
// regenerates identical weights.
TrainResult train_centralized(const Matrix& x, const Matrix& t,
                              const SsfnConfig& cfg);

// Q x J score matrix O_layer * y_layer for input x (P x J).
// layer ranges over 0..L.
Matrix predict(const LayerStack& stack, const Matrix& x, int layer);

// Fraction of columns whose argmax row equals the label; ties break to the
// lowest row index.
double classification_accuracy(const Matrix& scores,
                               const std::vector<int>& labels);

// Versioned little-endian binary container holding the config, the seed,
// and every weight and readout matrix. Round-trips bit-exactly.
void save_model(const std::string& path, const SsfnConfig& cfg,
                const LayerStack& stack);
std::pair<SsfnConfig, LayerStack> load_model(const std::string& path);

}  // namespace dssfn
