#pragma once

#include <Eigen/Core>

namespace ibopt {

enum class RegKind { zero, l1, squared_l2 };

// Closed convex regularizer R with a computable proximal operator.
struct Regularizer {
  RegKind kind = RegKind::zero;
  double weight = 0.0;

  static Regularizer none() { return {}; }
  static Regularizer l1(double w);
  static Regularizer squared_l2(double w);

  bool is_zero() const { return kind == RegKind::zero || weight == 0.0; }
};

double reg_value(const Regularizer& r, const Eigen::VectorXd& x);

// argmin_y R(y) + ||y - x||^2 / (2 gamma), coordinatewise closed forms.
Eigen::VectorXd prox_apply(const Regularizer& r, double gamma,
                           const Eigen::VectorXd& x);

}  // namespace ibopt
