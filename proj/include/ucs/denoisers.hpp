#pragma once

#include "ucs/model.hpp"

namespace ucs {

/// Gaussian belief with one scalar precision shared by all entries.
struct GaussianBelief {
  Matrix mean;
  double precision = 1.0;
};

/// N x N log-likelihood-ratio matrix, entries clamped to [-clamp, clamp].
struct LlrMatrix {
  Matrix values;

  static LlrMatrix constant(int n, double v, double clamp);
  void clamp_to(double clamp);
};

/// Gaussian message into one row of U: mean parameter b and diag(Lambda_U).
struct RowMessage {
  Vector b;
  Vector lambda_diag;
};

inline double clamp_llr(double l, double clamp) {
  return l > clamp ? clamp : (l < -clamp ? -clamp : l);
}

/// Scalar MMSE denoiser for the spike/slab prior rho*delta + (1-rho)*N(0,s2),
/// observed through r = x + N(0, v).
void gx_bernoulli_gaussian(double r, double v, const SignalPrior& prior,
                           double& mean, double& var);

/// Entrywise MMSE denoising of X_e under the prior; gamma_p from the
/// averaged denoiser derivative <g'> via gamma_p = gamma_e / <g'>.
void posterior_x(const GaussianBelief& X_e, const SignalPrior& prior,
                 double precision_floor, Matrix& X_p, double& gamma_p);

/// EP extrinsic subtraction: gamma_out = gamma_p - gamma_in (floored),
/// mean_out = (gamma_p*mean_p - gamma_in*mean_in)/gamma_out.
void ep_extrinsic(const Matrix& mean_p, double gamma_p, const Matrix& mean_in,
                  double gamma_in, double precision_floor, Matrix& mean_out,
                  double& gamma_out);

/// Row-wise assignment posterior: mean = softmax(b - lambda/2 + llr),
/// var = m.*(1-m).
void row_permutation_denoise(const RowMessage& msg, const Vector& llr_minus_e_row,
                             Vector& mean, Vector& var);

/// Column-wise assignment posterior: softmax of llr_plus_e over rows,
/// independently per column.
Matrix column_posterior(const LlrMatrix& llr_plus_e);

double llr_from_mean(double m, double clamp);
double mean_from_llr(double l, double clamp);

/// ext-BP subtraction LLR_out = LLR_p - LLR_e_in, entrywise, clamped.
LlrMatrix bp_extrinsic(const LlrMatrix& llr_p, const LlrMatrix& llr_e_in,
                       double clamp);

}  // namespace ucs
