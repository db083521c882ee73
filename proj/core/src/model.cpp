#include "dssfn/model.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dssfn/consensus.hpp"
#include "dssfn/log.hpp"
#include "dssfn/rng.hpp"

namespace dssfn {
namespace {

void validate_config(const SsfnConfig& cfg) {
  if (cfg.layers < 1) {
    throw std::invalid_argument("SsfnConfig: layers must be >= 1");
  }
  if (cfg.width_extra < 1) {
    throw std::invalid_argument(
        "SsfnConfig: width_extra must be >= 1 (the random block needs rows)");
  }
  if (cfg.eps_override < 0.0 || !std::isfinite(cfg.eps_override)) {
    throw std::invalid_argument("SsfnConfig: eps_override must be finite and >= 0");
  }
  if (cfg.mu_first < 0.0 || cfg.mu_rest < 0.0) {
    throw std::invalid_argument("SsfnConfig: ridge weights must be >= 0");
  }
}

double block_scale(const SsfnConfig& cfg, int fan_in) {
  return cfg.weight_scale > 0.0 ? cfg.weight_scale
                                : 1.0 / std::sqrt(static_cast<double>(fan_in));
}

}  // namespace

Matrix relu(const Matrix& a) {
  Matrix out = a;
  double* p = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (p[i] < 0.0) p[i] = 0.0;
  }
  return out;
}

Matrix build_vq(int q) {
  if (q < 1) {
    throw std::invalid_argument("build_vq: Q must be >= 1");
  }
  Matrix v(2 * q, q);
  for (int i = 0; i < q; ++i) {
    v(i, i) = 1.0;
    v(q + i, i) = -1.0;
  }
  return v;
}

Matrix assemble_weight(const Matrix& o_star, const Matrix& r_next, int q) {
  if (o_star.rows() != q) {
    std::ostringstream os;
    os << "assemble_weight: readout has " << o_star.rows() << " rows, expected "
       << q;
    throw std::invalid_argument(os.str());
  }
  if (o_star.cols() != r_next.cols()) {
    std::ostringstream os;
    os << "assemble_weight: column mismatch, readout " << o_star.cols()
       << " vs random block " << r_next.cols();
    throw std::invalid_argument(os.str());
  }
  const int n = 2 * q + r_next.rows();
  Matrix w(n, o_star.cols());
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < o_star.cols(); ++j) {
      const double v = o_star(i, j);
      w(i, j) = v;
      w(q + i, j) = -v;
    }
  }
  for (int i = 0; i < r_next.rows(); ++i) {
    for (int j = 0; j < r_next.cols(); ++j) {
      w(2 * q + i, j) = r_next(i, j);
    }
  }
  return w;
}

Matrix forward_layer(const Matrix& w, const Matrix& y_prev) {
  return relu(mat_mul(w, y_prev));
}

Matrix centralized_layer_solve(const Matrix& y, const Matrix& t, double mu,
                               double eps) {
  if (y.cols() != t.cols()) {
    std::ostringstream os;
    os << "centralized_layer_solve: sample counts differ, features " << y.cols()
       << " vs targets " << t.cols();
    throw std::invalid_argument(os.str());
  }
  if (mu < 0.0 || !std::isfinite(mu)) {
    throw std::invalid_argument("centralized_layer_solve: mu must be finite and >= 0");
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("centralized_layer_solve: eps must be > 0");
  }
  Matrix gram = mat_mul_nt(y, y);
  for (int i = 0; i < gram.rows(); ++i) gram(i, i) += mu;
  Matrix rhs = mat_mul_nt(t, y);
  try {
    const SpdFactor factor(gram);
    return project_frobenius(factor.solve_right(rhs), eps);
  } catch (const NotPositiveDefiniteError& e) {
    std::ostringstream os;
    os << "centralized_layer_solve: feature Gram matrix is singular (pivot "
       << e.pivot << "); use mu > 0 when samples are fewer than feature rows";
    throw NotPositiveDefiniteError(os.str(), e.pivot);
  }
}

Matrix constrained_least_squares(const Matrix& y, const Matrix& t, double eps) {
  if (y.cols() != t.cols()) {
    std::ostringstream os;
    os << "constrained_least_squares: sample counts differ, features "
       << y.cols() << " vs targets " << t.cols();
    throw std::invalid_argument(os.str());
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("constrained_least_squares: eps must be > 0");
  }
  const int r = y.rows();
  const int q = t.rows();
  const Matrix gram = mat_mul_nt(y, y);
  const Matrix g = mat_mul_nt(t, y);

  Eigen::MatrixXd a(r, r);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < r; ++j) a(i, j) = gram(i, j);
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("constrained_least_squares: eigendecomposition failed");
  }
  const Eigen::VectorXd& d = eig.eigenvalues();
  const Eigen::MatrixXd& u = eig.eigenvectors();

  // Coordinates of the cross term in the Gram eigenbasis: H = (T Y^T) U.
  Eigen::MatrixXd gd(q, r);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < r; ++j) gd(i, j) = g(i, j);
  }
  const Eigen::MatrixXd h = gd * u;

  const double dmax = std::max(d.maxCoeff(), 0.0);
  const double rank_tol = std::max(dmax, 1.0) * 1e-13 * r;

  // Minimum-norm least-squares solution: zero weight on the (near-)null
  // eigendirections. If it already sits inside the ball it is optimal.
  Eigen::MatrixXd scaled = h;
  double min_norm_sq = 0.0;
  for (int j = 0; j < r; ++j) {
    if (d(j) > rank_tol) {
      scaled.col(j) /= d(j);
      min_norm_sq += scaled.col(j).squaredNorm();
    } else {
      scaled.col(j).setZero();
    }
  }
  const auto to_matrix = [&](const Eigen::MatrixXd& coords) {
    const Eigen::MatrixXd full = coords * u.transpose();
    Matrix out(q, r);
    for (int i = 0; i < q; ++i) {
      for (int j = 0; j < r; ++j) out(i, j) = full(i, j);
    }
    return out;
  };
  if (min_norm_sq <= eps) {
    return to_matrix(scaled);
  }

  // Otherwise the optimum sits on the boundary at the unique lam > 0 with
  // phi(lam) = sum_ij h_ij^2 / (d_j + lam)^2 = eps; phi is strictly
  // decreasing, so bisection converges to machine precision.
  const auto phi = [&](double lam) {
    double acc = 0.0;
    for (int j = 0; j < r; ++j) {
      const double denom = d(j) > 0.0 ? d(j) + lam : lam;
      acc += h.col(j).squaredNorm() / (denom * denom);
    }
    return acc;
  };
  double hi = std::max(dmax, 1.0);
  while (phi(hi) > eps) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 500; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (phi(mid) > eps) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double lam = 0.5 * (lo + hi);
  Eigen::MatrixXd coords = h;
  for (int j = 0; j < r; ++j) {
    const double denom = d(j) > 0.0 ? d(j) + lam : lam;
    coords.col(j) /= denom;
  }
  return to_matrix(coords);
}

TrainResult train_centralized(const Matrix& x, const Matrix& t,
                              const SsfnConfig& cfg) {
  validate_config(cfg);
  if (x.empty() || t.empty() || x.cols() != t.cols()) {
    std::ostringstream os;
    os << "train_centralized: need matching nonempty data, features "
       << x.rows() << "x" << x.cols() << " vs targets " << t.rows() << "x"
       << t.cols();
    throw std::invalid_argument(os.str());
  }
  const int q = t.rows();
  const int n = cfg.hidden_width(q);
  const double eps = cfg.eps(q);

  TrainResult result;
  result.stack.input_dim = x.rows();
  result.stack.target_dim = q;
  result.stack.width = n;
  result.stack.weights.reserve(cfg.layers);
  result.stack.readouts.reserve(cfg.layers + 1);

  Matrix y = x;
  for (int l = 0; l <= cfg.layers; ++l) {
    const double mu = l == 0 ? cfg.mu_first : cfg.mu_rest;
    Matrix o;
    try {
      o = centralized_layer_solve(y, t, mu, eps);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "train_centralized: layer " << l << ": " << e.what();
      throw std::runtime_error(os.str());
    }
    result.layer_costs.push_back(frobenius_norm_sq(t - mat_mul(o, y)));
    if (l < cfg.layers) {
      const int fan_in = y.rows();
      SeededRng layer_rng(cfg.seed ^ static_cast<std::uint64_t>(l + 1));
      const Matrix r_block =
          random_matrix(layer_rng, n - 2 * q, fan_in, block_scale(cfg, fan_in));
      Matrix w = assemble_weight(o, r_block, q);
      y = forward_layer(w, y);
      result.stack.weights.push_back(std::move(w));
    }
    result.stack.readouts.push_back(std::move(o));
    if (log::enabled(log::Level::debug)) {
      std::ostringstream os;
      os << "central layer " << l << " cost " << result.layer_costs.back();
      log::debug(os.str());
    }
  }
  return result;
}

Matrix predict(const LayerStack& stack, const Matrix& x, int layer) {
  if (layer < 0 || layer > stack.layer_count()) {
    std::ostringstream os;
    os << "predict: layer " << layer << " out of range [0, "
       << stack.layer_count() << "]";
    throw std::out_of_range(os.str());
  }
  if (x.rows() != stack.input_dim) {
    std::ostringstream os;
    os << "predict: input has " << x.rows() << " features, model expects "
       << stack.input_dim;
    throw std::invalid_argument(os.str());
  }
  Matrix y = x;
  for (int l = 0; l < layer; ++l) {
    y = forward_layer(stack.weights[l], y);
  }
  return mat_mul(stack.readouts[layer], y);
}

double classification_accuracy(const Matrix& scores,
                               const std::vector<int>& labels) {
  if (scores.cols() != static_cast<int>(labels.size())) {
    std::ostringstream os;
    os << "classification_accuracy: " << scores.cols() << " score columns vs "
       << labels.size() << " labels";
    throw std::invalid_argument(os.str());
  }
  int hits = 0;
  for (int j = 0; j < scores.cols(); ++j) {
    int best = 0;
    for (int i = 1; i < scores.rows(); ++i) {
      if (scores(i, j) > scores(best, j)) best = i;
    }
    if (best == labels[j]) ++hits;
  }
  return static_cast<double>(hits) / scores.cols();
}

// ---- serialization ----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'S', 'F', 'N'};
constexpr std::uint32_t kVersion = 1;

void require_little_endian(const char* who) {
  if constexpr (std::endian::native != std::endian::little) {
    throw std::runtime_error(std::string(who) +
                             ": model files are little-endian only");
  }
}

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
void read_raw(std::ifstream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) {
    throw std::runtime_error("load_model: truncated file " + path);
  }
}

void write_matrix(std::ofstream& out, const Matrix& m) {
  write_raw(out, static_cast<std::int32_t>(m.rows()));
  write_raw(out, static_cast<std::int32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix(std::ifstream& in, const std::string& path) {
  std::int32_t rows = 0, cols = 0;
  read_raw(in, rows, path);
  read_raw(in, cols, path);
  if (rows < 1 || cols < 1 || static_cast<std::int64_t>(rows) * cols > (1LL << 31)) {
    throw std::runtime_error("load_model: corrupt matrix header in " + path);
  }
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) {
    throw std::runtime_error("load_model: truncated file " + path);
  }
  return m;
}

}  // namespace

void save_model(const std::string& path, const SsfnConfig& cfg,
                const LayerStack& stack) {
  require_little_endian("save_model");
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("save_model: cannot open " + path);
  }
  out.write(kMagic, sizeof kMagic);
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::int32_t>(cfg.layers));
  write_raw(out, static_cast<std::int32_t>(cfg.width_extra));
  write_raw(out, cfg.eps_override);
  write_raw(out, cfg.mu_first);
  write_raw(out, cfg.mu_rest);
  write_raw(out, cfg.seed);
  write_raw(out, cfg.weight_scale);
  write_raw(out, static_cast<std::int32_t>(stack.input_dim));
  write_raw(out, static_cast<std::int32_t>(stack.target_dim));
  write_raw(out, static_cast<std::int32_t>(stack.width));
  write_raw(out, static_cast<std::uint32_t>(stack.weights.size()));
  for (const Matrix& w : stack.weights) write_matrix(out, w);
  write_raw(out, static_cast<std::uint32_t>(stack.readouts.size()));
  for (const Matrix& o : stack.readouts) write_matrix(out, o);
  if (!out.good()) {
    throw std::runtime_error("save_model: write failed for " + path);
  }
}

std::pair<SsfnConfig, LayerStack> load_model(const std::string& path) {
  require_little_endian("load_model");
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("load_model: cannot open " + path);
  }
  char magic[4];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("load_model: " + path + " is not a model file");
  }
  std::uint32_t version = 0;
  read_raw(in, version, path);
  if (version != kVersion) {
    std::ostringstream os;
    os << "load_model: unsupported version " << version << " in " << path;
    throw std::runtime_error(os.str());
  }
  SsfnConfig cfg;
  std::int32_t layers = 0, width_extra = 0;
  read_raw(in, layers, path);
  read_raw(in, width_extra, path);
  cfg.layers = layers;
  cfg.width_extra = width_extra;
  read_raw(in, cfg.eps_override, path);
  read_raw(in, cfg.mu_first, path);
  read_raw(in, cfg.mu_rest, path);
  read_raw(in, cfg.seed, path);
  read_raw(in, cfg.weight_scale, path);
  LayerStack stack;
  std::int32_t p = 0, q = 0, n = 0;
  read_raw(in, p, path);
  read_raw(in, q, path);
  read_raw(in, n, path);
  stack.input_dim = p;
  stack.target_dim = q;
  stack.width = n;
  std::uint32_t count = 0;
  read_raw(in, count, path);
  stack.weights.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    stack.weights.push_back(read_matrix(in, path));
  }
  read_raw(in, count, path);
  stack.readouts.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    stack.readouts.push_back(read_matrix(in, path));
  }
  return {cfg, std::move(stack)};
}

}  // namespace dssfn
