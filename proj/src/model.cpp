#include "ucs/model.hpp"

#include <cmath>

namespace ucs {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NonSquarePermutationTarget: return "NonSquarePermutationTarget";
    case ErrorCode::NonPositivePrecision: return "NonPositivePrecision";
    case ErrorCode::ZeroSignal: return "ZeroSignal";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::NotAPermutation: return "NotAPermutation";
    case ErrorCode::NonPositiveVariance: return "NonPositiveVariance";
    case ErrorCode::DegenerateDerivative: return "DegenerateDerivative";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::BlockSizeMismatch: return "BlockSizeMismatch";
    case ErrorCode::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Matrix Permutation::to_matrix() const {
  const int n = size();
  Matrix U = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) U(i, map[i]) = 1.0;
  return U;
}

Permutation Permutation::identity(int n) {
  Permutation p;
  p.map.resize(n);
  for (int i = 0; i < n; ++i) p.map[i] = i;
  return p;
}

void validate_prior(const SignalPrior& prior) {
  if (!(prior.sigma_x2 > 0.0) || !std::isfinite(prior.sigma_x2))
    throw Error(ErrorCode::NonPositiveVariance, "prior sigma_x2 must be positive");
  if (!(prior.rho >= 0.0 && prior.rho <= 1.0))
    throw Error(ErrorCode::ConfigError, "prior rho must lie in [0,1]");
}

void validate_config(const SolverConfig& config) {
  if (!(config.xi > 0.0))
    throw Error(ErrorCode::ConfigError, "xi must be positive");
  if (config.t_max < 1)
    throw Error(ErrorCode::ConfigError, "t_max must be >= 1");
  if (config.restarts < 1)
    throw Error(ErrorCode::ConfigError, "restarts must be >= 1");
  if (!(config.damping > 0.0 && config.damping <= 1.0))
    throw Error(ErrorCode::ConfigError, "damping must lie in (0,1]");
  if (!(config.llr_clamp > 0.0))
    throw Error(ErrorCode::ConfigError, "llr_clamp must be positive");
  if (!(config.precision_floor > 0.0))
    throw Error(ErrorCode::ConfigError, "precision_floor must be positive");
}

void validate_instance(const ProblemInstance& inst) {
  if (inst.N <= 0 || inst.M <= 0 || inst.R <= 0)
    throw Error(ErrorCode::ShapeMismatch, "dimensions must be positive");
  if (inst.Y.rows() != inst.N || inst.Y.cols() != inst.M)
    throw Error(ErrorCode::ShapeMismatch, "Y must be N x M");
  if (inst.A.rows() != inst.N || inst.A.cols() != inst.R)
    throw Error(ErrorCode::ShapeMismatch, "A must be N x R");
  if (!inst.Y.allFinite() || !inst.A.allFinite())
    throw Error(ErrorCode::NonFinite, "Y and A entries must be finite");
  if (!(inst.gamma_w > 0.0) || !std::isfinite(inst.gamma_w))
    throw Error(ErrorCode::NonPositivePrecision, "gamma_w must be positive");
  if (inst.R > inst.N)
    throw Error(ErrorCode::NonSquarePermutationTarget,
                "A must not have more columns than rows (R <= N)");
}

bool is_permutation(const Matrix& U) {
  if (U.rows() != U.cols()) return false;
  const int n = static_cast<int>(U.rows());
  std::vector<int> col_count(n, 0);
  for (int i = 0; i < n; ++i) {
    int row_count = 0;
    for (int j = 0; j < n; ++j) {
      const double v = U(i, j);
      if (v == 1.0) {
        ++row_count;
        ++col_count[j];
      } else if (v != 0.0) {
        return false;
      }
    }
    if (row_count != 1) return false;
  }
  for (int j = 0; j < n; ++j)
    if (col_count[j] != 1) return false;
  return true;
}

double noise_precision_for_snr(const Matrix& Z, double snr_db) {
  const double z2 = Z.squaredNorm();
  if (z2 == 0.0)
    throw Error(ErrorCode::ZeroSignal, "Z must be nonzero for SNR calibration");
  const double snr_lin = std::pow(10.0, snr_db / 10.0);
  return snr_lin * static_cast<double>(Z.rows() * Z.cols()) / z2;
}

}  // namespace ucs
