#pragma once

#include "ucs/model.hpp"

#include <optional>
#include <vector>

namespace ucs {

struct SEParams {
  int N = 0, M = 0, R = 0;
  double beta_u = 0.0;   // R/N
  double beta_x = 0.0;   // R/M
  double gamma_w = 1.0;  // scaled convention: sqrt(M*N) * physical precision
  double sigma_u2 = 0.0;
  double sigma_A2 = 0.0;
  double sigma_x2 = 1.0;  // per-entry second moment of X
  SignalPrior prior;
  std::optional<Matrix> A;  // only for the direct-trace validation path
  int quad_nodes = 201;
  double quad_tol = 1e-9;
  double precision_floor = 1e-11;

  static SEParams from_dims(int N, int M, int R, double gamma_w_physical,
                            const SignalPrior& prior,
                            double sigma_A2 = -1.0 /* default 1/N */);
};

struct SEState {
  double gamma_X_e_minus = 0.0;
  double gamma_X_p_minus = 0.0;
  double gamma_X_e_plus = 0.0;
  double gamma_X_p_plus = 0.0;
  double gamma_U_p_minus = 0.0;
  double gamma_tilde_U = 0.0;
  double gamma_tilde_X = 0.0;
  double llr_diag_minus = 0.0;
  double llr_offdiag_minus = 0.0;
  double llr_diag_plus = 0.0;
  double llr_offdiag_plus = 0.0;
  double E_u_minus = 0.0;
  double E_x_minus = 0.0;
  double E_x_plus = 0.0;
  double predicted_nrmse = 1.0;
  int t = 0;
};

/// F(x,z) = (sqrt(x(1+sqrt z)^2 + 1) - sqrt(x(1-sqrt z)^2 + 1))^2.
double f_tulino(double x, double z);

/// Bilinear-core MSE of X from the F-function closed form.
double se_ex_minus(double gamma_X_e_minus, double alpha_x, double beta_u);

/// alpha_x from the concentrated quantities (clamped at the floor).
double se_alpha_x(const SEParams& p, double gamma_X_e_minus, double E_u_minus,
                  double gamma_tilde_X);

/// Prior-side MSE of X: averaged posterior variance over the scalar channel.
double se_ex_plus(double gamma_X_e_plus, const SignalPrior& prior,
                  int quad_nodes, double quad_tol);

void se_llr_minus(double llr_diag_plus, double llr_offdiag_plus, int N,
                  double& llr_diag_minus, double& llr_offdiag_minus);

void se_llr_plus(double llr_diag_minus, double llr_offdiag_minus,
                 double gamma_tilde_U, int N, int quad_nodes, double quad_tol,
                 double& llr_diag_plus, double& llr_offdiag_plus);

double se_eu_minus(double llr_diag_minus, double llr_offdiag_minus,
                   double gamma_tilde_U, int N, int quad_nodes, double quad_tol);

std::vector<SEState> se_run(const SEParams& params, int t_max = 200,
                            double xi = 1e-8);

}  // namespace ucs
