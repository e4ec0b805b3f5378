#include "ibopt/prox.hpp"

#include <cmath>
#include <stdexcept>

namespace ibopt {

Regularizer Regularizer::l1(double w) {
  if (w < 0) throw std::invalid_argument("l1 weight must be >= 0");
  return {RegKind::l1, w};
}

Regularizer Regularizer::squared_l2(double w) {
  if (w < 0) throw std::invalid_argument("squared_l2 weight must be >= 0");
  return {RegKind::squared_l2, w};
}

double reg_value(const Regularizer& r, const Eigen::VectorXd& x) {
  switch (r.kind) {
    case RegKind::zero:
      return 0.0;
    case RegKind::l1:
      return r.weight * x.lpNorm<1>();
    case RegKind::squared_l2:
      return 0.5 * r.weight * x.squaredNorm();
  }
  return 0.0;
}

Eigen::VectorXd prox_apply(const Regularizer& r, double gamma,
                           const Eigen::VectorXd& x) {
  if (!(gamma > 0)) throw std::invalid_argument("prox_apply: gamma must be > 0");
  switch (r.kind) {
    case RegKind::zero:
      return x;
    case RegKind::l1: {
      const double t = gamma * r.weight;
      Eigen::VectorXd y(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double v = x[i];
        y[i] = (v > t) ? v - t : (v < -t ? v + t : 0.0);
      }
      return y;
    }
    case RegKind::squared_l2:
      return x / (1.0 + gamma * r.weight);
  }
  return x;
}

}  // namespace ibopt
