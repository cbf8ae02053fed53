#include "ucs/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace ucs {

NormalQuadrature NormalQuadrature::make(int nodes) {
  if (nodes < 1)
    throw Error(ErrorCode::ConfigError, "quadrature needs >= 1 node");
  // Golub–Welsch nodes from the probabilists' Hermite Jacobi matrix
  // (normal weight): off-diagonals sqrt(k).
  Matrix J = Matrix::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(J);
  NormalQuadrature q;
  q.x.resize(nodes);
  q.w.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    const double x = es.eigenvalues()(i);
    q.x(i) = x;
    // w_i = 1 / sum_k p_k(x_i)^2 over the orthonormal polynomials. Computing
    // this by recurrence (with rescaling, tracking the log of the scale) keeps
    // the far-tail weights accurate down to underflow, where the eigenvector
    // first components are pure roundoff noise.
    double p_prev = 0.0, p_cur = 1.0, sum = 1.0, log_scale = 0.0;
    for (int k = 1; k < nodes; ++k) {
      const double p_next =
          (x * p_cur - std::sqrt(static_cast<double>(k - 1)) * p_prev) /
          std::sqrt(static_cast<double>(k));
      p_prev = p_cur;
      p_cur = p_next;
      sum += p_cur * p_cur;
      if (std::abs(p_cur) > 1e100) {
        const double f = std::abs(p_cur);
        p_prev /= f;
        p_cur /= f;
        sum /= f * f;
        log_scale += std::log(f);
      }
    }
    const double log_w = -2.0 * log_scale - std::log(sum);
    q.w(i) = log_w < -745.0 ? 0.0 : std::exp(log_w);
  }
  return q;
}

double NormalQuadrature::integrate(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += w(i) * f(x(i));
  return s;
}

double integrate_normal_checked(const std::function<double(double)>& f,
                                int nodes, double tol) {
  static thread_local int cached_nodes = -1;
  static thread_local NormalQuadrature coarse, fine;
  if (cached_nodes != nodes) {
    coarse = NormalQuadrature::make(nodes);
    fine = NormalQuadrature::make(2 * nodes + 1);
    cached_nodes = nodes;
  }
  const double a = coarse.integrate(f);
  const double b = fine.integrate(f);
  const double scale = std::max(1.0, std::abs(b));
  if (std::abs(a - b) > tol * scale)
    throw Error(ErrorCode::QuadratureNotConverged,
                "quadrature refinement check failed");
  return b;
}

}  // namespace ucs
