#pragma once

#include "ucs/denoisers.hpp"
#include "ucs/model.hpp"

#include <optional>

namespace ucs {

struct SolverState {
  GaussianBelief X_e_minus;  // extrinsic into the bilinear core
  GaussianBelief X_e_plus;   // extrinsic out of the bilinear core
  Matrix X_p_minus;          // core-side posterior mean of X
  double gamma_X_p_minus = 1.0;
  Matrix X_p_plus;           // prior-side posterior mean of X
  double gamma_X_p_plus = 1.0;
  Matrix U_p_minus;          // row-denoiser posterior mean
  Matrix U_var_minus;        // per-entry variances of U_p_minus
  Matrix V_hat;              // M x N, (A * X_p_minus)^T
  Matrix V_hat_prev;
  Matrix U_prev;             // previous-iteration U posterior, for Onsager
  Matrix X_hat_prev;         // previous-iteration X_p_minus, for Onsager
  LlrMatrix llr_minus_e;
  LlrMatrix llr_plus_e;
  Matrix B_U;
  Vector Lambda_U_diag;
  Matrix Lambda_X;
  Matrix b_X;
  Matrix Sigma_X;       // R x R average per-column posterior covariance of X
  double gamma0 = 1.0;  // effective likelihood precision
  int t = 0;
};

struct TracePoint {
  int t = 0;
  double dx = 0.0;  // relative Frobenius change of X_p_minus
  double du = 0.0;  // ||dU||_F / N
  double nrmse_x = -1.0;  // -1 when no ground truth was supplied
};

struct Solution {
  Matrix U_soft;
  Permutation U_hard;
  Matrix X_hat;
  int iterations = 0;
  bool converged = false;
  std::vector<TracePoint> trace;
};

SolverState init_state(const ProblemInstance& inst, const SignalPrior& prior,
                       const SolverConfig& config);

/// Bilinear LMMSE pass toward X: fills Lambda_X, b_X and the core posterior.
void bilmmse_x(SolverState& state, const ProblemInstance& inst,
               const SolverConfig& config);

/// Bilinear LMMSE pass toward U: fills B_U and Lambda_U_diag.
void bilmmse_u(SolverState& state, const ProblemInstance& inst,
               const SolverConfig& config);

/// One full round of the message schedule (U side, X side, bookkeeping).
void iterate(SolverState& state, const ProblemInstance& inst,
             const SignalPrior& prior, const SolverConfig& config);

Solution solve(const ProblemInstance& inst, const SignalPrior& prior,
               const SolverConfig& config,
               const GroundTruth* ground_truth = nullptr);

/// Maximum-likelihood assignment rounding: maximizes sum_i log U_soft[i,pi(i)]
/// with lexicographically smallest tie-break.
Permutation round_permutation(const Matrix& U_soft);

}  // namespace ucs
