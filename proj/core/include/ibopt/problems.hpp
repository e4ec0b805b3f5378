#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ibopt/data_io.hpp"
#include "ibopt/prox.hpp"
#include "ibopt/rng.hpp"

namespace ibopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ProblemKind { quadratic, logistic };

// Minibatch-of-rows stochastic oracle. batch_size == 0 or >= the worker's
// component count means the exact gradient (and consumes no randomness).
struct StochasticGradSpec {
  int batch_size = 1;
  double sigma_sq_bound = 0.0;
};

// f(x) = (1/n) sum_i f_i(x), each worker objective itself an average of
// inner components f_ij. Immutable after construction; all randomness comes
// through caller-supplied streams.
class ProblemInstance {
 public:
  ProblemKind kind() const { return kind_; }
  int dim() const { return d_; }
  int n_workers() const { return n_; }
  double smoothness() const { return L_; }
  double strong_convexity() const { return mu_; }
  const Vector& x_star() const { return x_star_; }
  double f_star() const { return f_star_; }
  bool satisfies_zero_grads() const { return zero_grads_; }
  bool is_convex() const { return convex_; }

  double value(const Vector& x) const;
  Vector grad(const Vector& x) const;

  double value_component(int i, const Vector& x) const;
  Vector grad_full(int i, const Vector& x) const;

  int inner_count(int i) const;
  double value_inner(int i, int j, const Vector& x) const;
  Vector grad_inner(int i, int j, const Vector& x) const;

  // Shared-data view: f(x) = (1/N) sum_j psi_j(x) over all inner components.
  int global_count() const;
  Vector grad_global(int j, const Vector& x) const;

  Vector stochastic_grad(int i, const Vector& x, const StochasticGradSpec& spec,
                         Rng& rng) const;

  // Prox-gradient descent with step 1/L from x0 until the gradient-mapping
  // norm drops below tol * max(1, ||x||); updates the stored reference.
  void solve_reference(double tol = 1e-12,
                       const Regularizer& reg = Regularizer::none());

  // Quadratic internals for verification oracles.
  const Matrix& quad_matrix(int i) const;
  const Matrix& quad_mean_matrix() const;
  const Vector& quad_shared_direction() const;
  double component_shift() const { return shift_; }

  const SparseDataset& dataset() const;
  const std::vector<std::vector<int>>& shards() const;
  double l2_reg() const { return l2_; }

  friend ProblemInstance quadratic_synthesize(int d, int n, int o,
                                              std::uint64_t seed,
                                              double component_shift);
  friend ProblemInstance logreg_build(const SparseDataset& ds, double l2,
                                      const std::vector<std::vector<int>>& shards,
                                      double ref_tol);

 private:
  ProblemKind kind_ = ProblemKind::quadratic;
  int d_ = 0;
  int n_ = 0;
  double L_ = 0;
  double mu_ = 0;
  Vector x_star_;
  double f_star_ = 0;
  bool zero_grads_ = false;
  bool convex_ = true;

  // quadratic payload
  std::vector<Matrix> M_;        // worker matrices, d x d
  Matrix M_mean_;                // (1/n) sum M_i
  std::vector<Matrix> PB_;       // d x o columns p_j with M_i = vv' + sum p_j p_j'
  std::vector<Matrix> shifts_;   // d x o columns z_ij, sum_j z_ij = 0 exactly
  Vector v_;
  int o_ = 0;
  double shift_ = 0;

  // logistic payload
  SparseDataset ds_;
  std::vector<std::vector<int>> shards_;
  double l2_ = 0;
};

// Builds f_i(x) = x' M_i x / 2 with M_i = vv' + (I-vv') C_i (I-vv'),
// C_i = A_i A_i' / lmax(A_i A_i'), entries of v' and A_i standard normal.
// component_shift > 0 adds mean-zero per-inner-component linear terms (in
// exactly cancelling pairs) so minibatch noise does not vanish at x* = 0;
// f_i and the reference solution are unchanged.
ProblemInstance quadratic_synthesize(int d, int n, int o, std::uint64_t seed,
                                     double component_shift = 0.0);

// f(x) = (1/N) sum_j [log(1+exp(A_j x * b_j)) + (l2/2)||x||^2] on unit-norm
// rows; L = 1/4 + l2, mu = l2, reference solved to ref_tol. ref_tol <= 0
// skips the reference solve (x* stays at 0), for objectives without a finite
// minimizer.
ProblemInstance logreg_build(const SparseDataset& ds, double l2,
                             const std::vector<std::vector<int>>& shards = {},
                             double ref_tol = 1e-12);

// Reference solve without touching the instance; returns (x, objective).
std::pair<Vector, double> solve_reference_from(const ProblemInstance& p,
                                               const Regularizer& reg,
                                               double tol, const Vector& x0,
                                               std::int64_t max_iters = 2000000);

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_lmax(const Matrix& A, double rel_tol = 1e-9,
                            int max_iters = 100000);

// Deterministic synthetic LibSVM-style dataset (sparse 0/1 features, unit
// rows after normalization, both label classes present).
SparseDataset synth_sparse_dataset(int n_rows, int d, std::uint64_t seed,
                                   int min_nnz = 8, int max_nnz = 18);

}  // namespace ibopt
