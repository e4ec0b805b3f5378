#include "ibopt/problems.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace ibopt {

namespace {

double softplus(double z) {
  // log(1 + exp(z)) without overflow
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  return z > 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

void check_worker(const ProblemInstance& p, int i) {
  if (i < 0 || i >= p.n_workers()) {
    throw std::out_of_range("worker index " + std::to_string(i) +
                            " out of range [0," + std::to_string(p.n_workers()) + ")");
  }
}

}  // namespace

double power_iteration_lmax(const Matrix& A, double rel_tol, int max_iters) {
  const Eigen::Index n = A.rows();
  Vector u = Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) u[i] += 1e-3 * static_cast<double>(i % 7);
  u.normalize();
  double lambda = 0;
  for (int it = 0; it < max_iters; ++it) {
    Vector w = A * u;
    const double nw = w.norm();
    if (nw == 0) return 0;
    w /= nw;
    const double next = w.dot(A * w);
    if (it > 0 && std::abs(next - lambda) <= rel_tol * std::max(1.0, std::abs(next))) {
      return next;
    }
    lambda = next;
    u = w;
  }
  return lambda;
}

ProblemInstance quadratic_synthesize(int d, int n, int o, std::uint64_t seed,
                                     double component_shift) {
  if (d < 1 || n < 1 || o < 1) {
    throw std::invalid_argument("quadratic_synthesize: d, n, o must be >= 1");
  }
  ProblemInstance p;
  p.kind_ = ProblemKind::quadratic;
  p.d_ = d;
  p.n_ = n;
  p.o_ = o;
  p.shift_ = component_shift;

  Rng vrng = Rng::stream(seed, kServerWorkerId, 0, StreamKind::problem);
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = vrng.normal();
  const double vn = v.norm();
  if (vn == 0) throw std::runtime_error("quadratic_synthesize: degenerate direction");
  v /= vn;
  p.v_ = v;

  p.M_.reserve(n);
  p.PB_.reserve(n);
  p.shifts_.reserve(n);
  Matrix P = Matrix::Identity(d, d) - v * v.transpose();
  for (int i = 0; i < n; ++i) {
    Rng arng = Rng::stream(seed, static_cast<std::uint32_t>(i), 0, StreamKind::problem);
    Matrix A(d, o);
    for (int c = 0; c < o; ++c) {
      for (int r = 0; r < d; ++r) A(r, c) = arng.normal();
    }
    const double lmax = power_iteration_lmax(
        o <= d ? Matrix(A.transpose() * A) : Matrix(A * A.transpose()));
    if (!(lmax > 0)) {
      throw std::runtime_error("quadratic_synthesize: degenerate A_i (lmax = 0)");
    }
    Matrix PB = P * (A / std::sqrt(lmax));
    Matrix M = v * v.transpose() + PB * PB.transpose();
    p.PB_.push_back(std::move(PB));
    p.M_.push_back(std::move(M));

    Matrix Z = Matrix::Zero(d, o);
    if (component_shift > 0) {
      Rng zrng = Rng::stream(seed, static_cast<std::uint32_t>(i), 1, StreamKind::problem);
      const double scale = component_shift / o;
      for (int c = 0; c < o / 2; ++c) {
        for (int r = 0; r < d; ++r) {
          const double g = scale * zrng.normal();
          Z(r, c) = g;
          Z(r, o / 2 + c) = -g;  // exact cancellation keeps grad f_i(0) = 0
        }
      }
    }
    p.shifts_.push_back(std::move(Z));
  }

  p.M_mean_ = Matrix::Zero(d, d);
  for (const auto& M : p.M_) p.M_mean_ += M;
  p.M_mean_ /= static_cast<double>(n);

  double L = 0;
  for (const auto& M : p.M_) L = std::max(L, power_iteration_lmax(M));
  p.L_ = L;
  Eigen::SelfAdjointEigenSolver<Matrix> es(p.M_mean_, Eigen::EigenvaluesOnly);
  p.mu_ = std::max(0.0, es.eigenvalues().minCoeff());

  p.x_star_ = Vector::Zero(d);
  p.f_star_ = 0.0;
  p.zero_grads_ = true;
  p.convex_ = true;
  return p;
}

ProblemInstance logreg_build(const SparseDataset& ds, double l2,
                             const std::vector<std::vector<int>>& shards,
                             double ref_tol) {
  if (l2 < 0) throw std::invalid_argument("logreg_build: l2 must be >= 0");
  for (int r = 0; r < ds.n_rows; ++r) {
    if (ds.labels[r] != 1.0 && ds.labels[r] != -1.0) {
      throw std::invalid_argument("logreg_build: label outside {-1,+1} at row " +
                                  std::to_string(r));
    }
    double sq = 0;
    for (std::int64_t k = ds.row_offsets[r]; k < ds.row_offsets[r + 1]; ++k) {
      sq += ds.values[k] * ds.values[k];
    }
    if (std::abs(std::sqrt(sq) - 1.0) > 1e-6) {
      throw std::invalid_argument(
          "logreg_build: row " + std::to_string(r) +
          " is not unit-normalized (run normalize_rows first)");
    }
  }

  ProblemInstance p;
  p.kind_ = ProblemKind::logistic;
  p.d_ = ds.d;
  p.ds_ = ds;
  p.l2_ = l2;
  if (shards.empty()) {
    p.shards_.resize(1);
    p.shards_[0].resize(ds.n_rows);
    std::iota(p.shards_[0].begin(), p.shards_[0].end(), 0);
  } else {
    std::vector<char> seen(ds.n_rows, 0);
    for (const auto& s : shards) {
      if (s.empty()) throw std::invalid_argument("logreg_build: empty shard");
      for (int r : s) {
        if (r < 0 || r >= ds.n_rows || seen[r]) {
          throw std::invalid_argument("logreg_build: shards must partition the rows");
        }
        seen[r] = 1;
      }
    }
    for (char c : seen) {
      if (!c) throw std::invalid_argument("logreg_build: shards must cover all rows");
    }
    p.shards_ = shards;
  }
  p.n_ = static_cast<int>(p.shards_.size());
  p.L_ = 0.25 + l2;  // unit rows make each row loss 1/4-smooth
  p.mu_ = l2;
  p.zero_grads_ = false;
  p.convex_ = true;
  p.x_star_ = Vector::Zero(ds.d);
  p.f_star_ = p.value(p.x_star_);
  if (ref_tol > 0) p.solve_reference(ref_tol);
  return p;
}

double ProblemInstance::value(const Vector& x) const {
  if (kind_ == ProblemKind::quadratic) {
    return 0.5 * x.dot(M_mean_ * x);
  }
  double s = 0;
  for (int r = 0; r < ds_.n_rows; ++r) {
    double dot = 0;
    for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
      dot += ds_.values[k] * x[ds_.col_index[k]];
    }
    s += softplus(dot * ds_.labels[r]);
  }
  return s / ds_.n_rows + 0.5 * l2_ * x.squaredNorm();
}

Vector ProblemInstance::grad(const Vector& x) const {
  if (kind_ == ProblemKind::quadratic) {
    return M_mean_ * x;
  }
  Vector g = Vector::Zero(d_);
  for (int r = 0; r < ds_.n_rows; ++r) {
    double dot = 0;
    for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
      dot += ds_.values[k] * x[ds_.col_index[k]];
    }
    const double coef = ds_.labels[r] * sigmoid(dot * ds_.labels[r]);
    for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
      g[ds_.col_index[k]] += coef * ds_.values[k];
    }
  }
  g /= static_cast<double>(ds_.n_rows);
  g += l2_ * x;
  return g;
}

double ProblemInstance::value_component(int i, const Vector& x) const {
  check_worker(*this, i);
  if (kind_ == ProblemKind::quadratic) {
    return 0.5 * x.dot(M_[i] * x);
  }
  double s = 0;
  for (int r : shards_[i]) {
    double dot = 0;
    for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
      dot += ds_.values[k] * x[ds_.col_index[k]];
    }
    s += softplus(dot * ds_.labels[r]);
  }
  return s / shards_[i].size() + 0.5 * l2_ * x.squaredNorm();
}

Vector ProblemInstance::grad_full(int i, const Vector& x) const {
  check_worker(*this, i);
  if (x.size() != d_) throw std::invalid_argument("grad_full: dimension mismatch");
  if (kind_ == ProblemKind::quadratic) {
    return M_[i] * x;
  }
  Vector g = Vector::Zero(d_);
  for (int r : shards_[i]) {
    double dot = 0;
    for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
      dot += ds_.values[k] * x[ds_.col_index[k]];
    }
    const double coef = ds_.labels[r] * sigmoid(dot * ds_.labels[r]);
    for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
      g[ds_.col_index[k]] += coef * ds_.values[k];
    }
  }
  g /= static_cast<double>(shards_[i].size());
  g += l2_ * x;
  return g;
}

int ProblemInstance::inner_count(int i) const {
  check_worker(*this, i);
  return kind_ == ProblemKind::quadratic ? o_
                                         : static_cast<int>(shards_[i].size());
}

double ProblemInstance::value_inner(int i, int j, const Vector& x) const {
  check_worker(*this, i);
  if (j < 0 || j >= inner_count(i)) {
    throw std::out_of_range("inner index out of range");
  }
  if (kind_ == ProblemKind::quadratic) {
    const double a = v_.dot(x);
    const double b = PB_[i].col(j).dot(x);
    double val = 0.5 * a * a + 0.5 * o_ * b * b;
    if (shift_ > 0) val += o_ * shifts_[i].col(j).dot(x);
    return val;
  }
  const int r = shards_[i][j];
  double dot = 0;
  for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
    dot += ds_.values[k] * x[ds_.col_index[k]];
  }
  return softplus(dot * ds_.labels[r]) + 0.5 * l2_ * x.squaredNorm();
}

Vector ProblemInstance::grad_inner(int i, int j, const Vector& x) const {
  check_worker(*this, i);
  if (j < 0 || j >= inner_count(i)) {
    throw std::out_of_range("inner index out of range");
  }
  if (kind_ == ProblemKind::quadratic) {
    Vector g = v_.dot(x) * v_;
    g += (o_ * PB_[i].col(j).dot(x)) * PB_[i].col(j);
    if (shift_ > 0) g += o_ * shifts_[i].col(j);
    return g;
  }
  const int r = shards_[i][j];
  double dot = 0;
  for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
    dot += ds_.values[k] * x[ds_.col_index[k]];
  }
  const double coef = ds_.labels[r] * sigmoid(dot * ds_.labels[r]);
  Vector g = l2_ * x;
  for (std::int64_t k = ds_.row_offsets[r]; k < ds_.row_offsets[r + 1]; ++k) {
    g[ds_.col_index[k]] += coef * ds_.values[k];
  }
  return g;
}

int ProblemInstance::global_count() const {
  return kind_ == ProblemKind::quadratic ? n_ * o_ : ds_.n_rows;
}

Vector ProblemInstance::grad_global(int j, const Vector& x) const {
  if (j < 0 || j >= global_count()) {
    throw std::out_of_range("global component index out of range");
  }
  if (kind_ == ProblemKind::quadratic) {
    return grad_inner(j / o_, j % o_, x);
  }
  double dot = 0;
  for (std::int64_t k = ds_.row_offsets[j]; k < ds_.row_offsets[j + 1]; ++k) {
    dot += ds_.values[k] * x[ds_.col_index[k]];
  }
  const double coef = ds_.labels[j] * sigmoid(dot * ds_.labels[j]);
  Vector g = l2_ * x;
  for (std::int64_t k = ds_.row_offsets[j]; k < ds_.row_offsets[j + 1]; ++k) {
    g[ds_.col_index[k]] += coef * ds_.values[k];
  }
  return g;
}

Vector ProblemInstance::stochastic_grad(int i, const Vector& x,
                                        const StochasticGradSpec& spec,
                                        Rng& rng) const {
  check_worker(*this, i);
  const int l = inner_count(i);
  if (spec.batch_size < 0) throw std::invalid_argument("negative batch size");
  if (spec.batch_size > l) {
    throw std::invalid_argument("stochastic_grad: batch_size " +
                                std::to_string(spec.batch_size) + " exceeds the " +
                                std::to_string(l) + " components of worker " +
                                std::to_string(i));
  }
  if (spec.batch_size == 0 || spec.batch_size == l) {
    return grad_full(i, x);  // degenerate batch: exact, consumes no draws
  }
  Vector g = Vector::Zero(d_);
  for (int b = 0; b < spec.batch_size; ++b) {
    const int j = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(l)));
    g += grad_inner(i, j, x);
  }
  return g / spec.batch_size;
}

std::pair<Vector, double> solve_reference_from(const ProblemInstance& p,
                                               const Regularizer& reg,
                                               double tol, const Vector& x0,
                                               std::int64_t max_iters) {
  if (!(tol > 0)) throw std::invalid_argument("solve_reference: tol must be > 0");
  const double gamma = 1.0 / p.smoothness();
  Vector x = x0;
  double residual = 0;
  for (std::int64_t it = 0; it < max_iters; ++it) {
    Vector next = prox_apply(reg, gamma, x - gamma * p.grad(x));
    residual = (x - next).norm() / gamma;
    x = next;
    if (residual <= tol * std::max(1.0, x.norm())) {
      return {x, p.value(x) + reg_value(reg, x)};
    }
  }
  throw std::runtime_error(
      "solve_reference: no convergence within iteration cap; last residual = " +
      std::to_string(residual));
}

void ProblemInstance::solve_reference(double tol, const Regularizer& reg) {
  auto [x, f] = solve_reference_from(*this, reg, tol, Vector::Zero(d_));
  x_star_ = std::move(x);
  f_star_ = f;
}

const Matrix& ProblemInstance::quad_matrix(int i) const {
  check_worker(*this, i);
  if (kind_ != ProblemKind::quadratic) {
    throw std::logic_error("quad_matrix: not a quadratic problem");
  }
  return M_[i];
}

const Matrix& ProblemInstance::quad_mean_matrix() const {
  if (kind_ != ProblemKind::quadratic) {
    throw std::logic_error("quad_mean_matrix: not a quadratic problem");
  }
  return M_mean_;
}

const Vector& ProblemInstance::quad_shared_direction() const {
  if (kind_ != ProblemKind::quadratic) {
    throw std::logic_error("quad_shared_direction: not a quadratic problem");
  }
  return v_;
}

const SparseDataset& ProblemInstance::dataset() const {
  if (kind_ != ProblemKind::logistic) {
    throw std::logic_error("dataset: not a logistic problem");
  }
  return ds_;
}

const std::vector<std::vector<int>>& ProblemInstance::shards() const {
  if (kind_ != ProblemKind::logistic) {
    throw std::logic_error("shards: not a logistic problem");
  }
  return shards_;
}

SparseDataset synth_sparse_dataset(int n_rows, int d, std::uint64_t seed,
                                   int min_nnz, int max_nnz) {
  if (n_rows < 2 || d < 2 || min_nnz < 1 || max_nnz < min_nnz || max_nnz > d) {
    throw std::invalid_argument("synth_sparse_dataset: bad shape parameters");
  }
  Rng rng = Rng::stream(seed, 0, 0, StreamKind::problem);
  Vector plane(d);
  for (int c = 0; c < d; ++c) plane[c] = rng.normal();

  SparseDataset ds;
  ds.n_rows = n_rows;
  ds.d = d;
  ds.row_offsets.push_back(0);
  std::vector<int> cols;
  for (int r = 0; r < n_rows; ++r) {
    const int nnz = min_nnz + static_cast<int>(rng.uniform_below(
                                  static_cast<std::uint64_t>(max_nnz - min_nnz + 1)));
    cols.clear();
    while (static_cast<int>(cols.size()) < nnz) {
      const int c = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(d)));
      if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    }
    std::sort(cols.begin(), cols.end());
    double score = 0;
    for (int c : cols) {
      ds.col_index.push_back(c);
      ds.values.push_back(1.0);
      score += plane[c];
    }
    score += 0.8 * rng.normal();
    // The row loss is log(1+exp(+b*Ax)), so labels take the opposite sign of
    // the separating score to make the problem well-posed.
    ds.labels.push_back(score > 0 ? -1.0 : 1.0);
    ds.row_offsets.push_back(static_cast<std::int64_t>(ds.col_index.size()));
  }
  // Guarantee both classes appear.
  bool pos = false, neg = false;
  for (double b : ds.labels) (b > 0 ? pos : neg) = true;
  if (!pos) ds.labels[0] = 1.0;
  if (!neg) ds.labels[1] = -1.0;
  return normalize_rows(ds);
}

}  // namespace ibopt
