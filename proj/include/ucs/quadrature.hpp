#pragma once

#include "ucs/model.hpp"

#include <functional>

namespace ucs {

/// Gauss–Hermite rule re-expressed against the standard normal weight:
/// integral f(n) phi(n) dn  ≈  sum_i w[i] * f(x[i]).
struct NormalQuadrature {
  Vector x;
  Vector w;

  static NormalQuadrature make(int nodes);

  double integrate(const std::function<double(double)>& f) const;
};

/// Evaluates with `nodes` and with 2*nodes+1 points; throws
/// QuadratureNotConverged if the two disagree by more than tol.
double integrate_normal_checked(const std::function<double(double)>& f,
                                int nodes, double tol);

}  // namespace ucs
