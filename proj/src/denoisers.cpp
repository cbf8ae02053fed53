#include "ucs/denoisers.hpp"

#include <cmath>

namespace ucs {

LlrMatrix LlrMatrix::constant(int n, double v, double clamp) {
  LlrMatrix out;
  out.values = Matrix::Constant(n, n, clamp_llr(v, clamp));
  return out;
}

void LlrMatrix::clamp_to(double clamp) {
  values = values.cwiseMax(-clamp).cwiseMin(clamp);
}

void gx_bernoulli_gaussian(double r, double v, const SignalPrior& prior,
                           double& mean, double& var) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw Error(ErrorCode::NonPositiveVariance, "channel variance must be positive");
  const double s2 = prior.sigma_x2;
  const double rho = prior.rho;
  if (rho >= 1.0) {
    mean = 0.0;
    var = 0.0;
    return;
  }
  // Slab posterior moments under the conjugate Gaussian.
  const double vs = s2 * v / (s2 + v);
  const double ms = r * s2 / (s2 + v);
  if (rho <= 0.0) {
    mean = ms;
    var = vs;
    return;
  }
  // Spike/slab responsibility in log domain.
  // log evidence(slab) = logN(r; 0, s2+v), log evidence(spike) = logN(r; 0, v)
  const double log_slab = -0.5 * std::log(s2 + v) - 0.5 * r * r / (s2 + v);
  const double log_spike = -0.5 * std::log(v) - 0.5 * r * r / v;
  const double t = std::log((1.0 - rho) / rho) + log_slab - log_spike;
  const double p_slab = 1.0 / (1.0 + std::exp(-t));
  mean = p_slab * ms;
  const double ex2 = p_slab * (ms * ms + vs);
  var = ex2 - mean * mean;
  if (var < 0.0) var = 0.0;
}

void posterior_x(const GaussianBelief& X_e, const SignalPrior& prior,
                 double precision_floor, Matrix& X_p, double& gamma_p) {
  const double gamma_e = X_e.precision;
  const double v = 1.0 / gamma_e;
  X_p.resizeLike(X_e.mean);
  double var_sum = 0.0;
  for (Eigen::Index j = 0; j < X_e.mean.cols(); ++j) {
    for (Eigen::Index i = 0; i < X_e.mean.rows(); ++i) {
      double m, vr;
      gx_bernoulli_gaussian(X_e.mean(i, j), v, prior, m, vr);
      X_p(i, j) = m;
      var_sum += vr;
    }
  }
  const double avg_var = var_sum / static_cast<double>(X_e.mean.size());
  if (!(avg_var >= 0.0) || !std::isfinite(avg_var))
    throw Error(ErrorCode::DegenerateDerivative, "mean denoiser derivative <= 0");
  // <g'> = gamma_e * avg posterior variance; gamma_p = gamma_e / <g'> = 1/avg_var.
  // Never report less than the incoming precision, and cap relative to it so
  // the cap cannot undercut gamma_e when gamma_e itself exceeds 1/floor.
  const double cap = std::max(1.0 / precision_floor, 2.0 * gamma_e);
  gamma_p = std::min(std::max(1.0 / std::max(avg_var, 1e-300), gamma_e), cap);
}

void ep_extrinsic(const Matrix& mean_p, double gamma_p, const Matrix& mean_in,
                  double gamma_in, double precision_floor, Matrix& mean_out,
                  double& gamma_out) {
  gamma_out = gamma_p - gamma_in;
  if (gamma_out < precision_floor) gamma_out = precision_floor;
  mean_out = (gamma_p * mean_p - gamma_in * mean_in) / gamma_out;
}

void row_permutation_denoise(const RowMessage& msg, const Vector& llr_minus_e_row,
                             Vector& mean, Vector& var) {
  const Eigen::Index n = msg.b.size();
  Vector s = msg.b - 0.5 * msg.lambda_diag + llr_minus_e_row;
  const double smax = s.maxCoeff();
  mean = (s.array() - smax).exp();
  mean /= mean.sum();
  var = mean.array() * (1.0 - mean.array());
  (void)n;
}

Matrix column_posterior(const LlrMatrix& llr_plus_e) {
  const Eigen::Index n = llr_plus_e.values.rows();
  Matrix out(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    Vector col = llr_plus_e.values.col(k);
    const double cmax = col.maxCoeff();
    Vector e = (col.array() - cmax).exp();
    out.col(k) = e / e.sum();
  }
  return out;
}

double llr_from_mean(double m, double clamp) {
  const double eps = std::exp(-clamp) / (1.0 + std::exp(-clamp));
  if (m < eps) m = eps;
  if (m > 1.0 - eps) m = 1.0 - eps;
  return clamp_llr(std::log(m / (1.0 - m)), clamp);
}

double mean_from_llr(double l, double clamp) {
  l = clamp_llr(l, clamp);
  return 1.0 / (1.0 + std::exp(-l));
}

LlrMatrix bp_extrinsic(const LlrMatrix& llr_p, const LlrMatrix& llr_e_in,
                       double clamp) {
  if (llr_p.values.rows() != llr_e_in.values.rows() ||
      llr_p.values.cols() != llr_e_in.values.cols())
    throw Error(ErrorCode::ShapeMismatch, "LLR matrices must have equal shapes");
  LlrMatrix out;
  out.values = llr_p.values - llr_e_in.values;
  out.clamp_to(clamp);
  return out;
}

}  // namespace ucs
