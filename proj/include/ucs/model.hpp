#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ucs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Hard input/numerical failures carry one of these codes.
enum class ErrorCode {
  ShapeMismatch,
  NonFinite,
  NonSquarePermutationTarget,
  NonPositivePrecision,
  ZeroSignal,
  ZeroReference,
  NotAPermutation,
  NonPositiveVariance,
  DegenerateDerivative,
  SingularSystem,
  BlockSizeMismatch,
  QuadratureNotConverged,
  ConfigError,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

const char* error_code_name(ErrorCode code);

/// A permutation stored as a row-to-column index map: row i has its 1 in
/// column perm[i].
struct Permutation {
  std::vector<int> map;

  int size() const { return static_cast<int>(map.size()); }
  Matrix to_matrix() const;
  static Permutation identity(int n);
};

/// Observation model Y = U A X + W with per-entry noise precision gamma_w.
struct ProblemInstance {
  Matrix Y;        // N x M
  Matrix A;        // N x R
  int N = 0;
  int M = 0;
  int R = 0;
  double gamma_w = 1.0;  // per-entry noise precision of W
};

struct GroundTruth {
  Permutation U;
  Matrix X;  // R x M
  Matrix Z;  // N x M noiseless signal, Z = U A X (kept for SNR calibration)
};

/// Entrywise prior on X: rho * delta(x) + (1-rho) * N(0, sigma_x2).
/// rho = 0 is the plain Gaussian prior.
struct SignalPrior {
  double sigma_x2 = 1.0;
  double rho = 0.0;

  /// Per-entry second moment (1-rho)*sigma_x2.
  double second_moment() const { return (1.0 - rho) * sigma_x2; }
  static SignalPrior gaussian(double sigma_x2 = 1.0) { return {sigma_x2, 0.0}; }
  static SignalPrior bernoulli_gaussian(double rho, double sigma_x2 = 1.0) {
    return {sigma_x2, rho};
  }
};

struct SolverConfig {
  double xi = 1e-6;              // convergence tolerance
  int t_max = 500;               // iteration cap
  int restarts = 1;              // independent inits; best-fit solution kept
  double damping = 0.8;          // damping on means and LLRs; 1 = none
  double llr_clamp = 30.0;       // symmetric clamp on all LLRs
  double precision_floor = 1e-11;
  std::uint64_t seed = 0;
  bool onsager_mean = true;       // mean-side bilinear correction
  bool onsager_precision = true;  // precision-side <Y.Y> correction
};

void validate_prior(const SignalPrior& prior);
void validate_config(const SolverConfig& config);

/// Checks all shape/finiteness/positivity invariants; throws Error naming
/// the first violated one.
void validate_instance(const ProblemInstance& inst);

/// True iff every entry is exactly 0 or 1 and every row and column sums to 1.
bool is_permutation(const Matrix& U);

/// gamma_w such that per-entry noise variance = per-entry signal power of Z
/// divided by the linear SNR: gamma_w = 10^(snr_db/10) * N*M / ||Z||_F^2.
double noise_precision_for_snr(const Matrix& Z, double snr_db);

}  // namespace ucs
