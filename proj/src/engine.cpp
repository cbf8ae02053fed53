#include "ucs/engine.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>
#include <random>

namespace ucs {

namespace {

// Average row covariance of the assignment posterior, summarized by two
// scalars: diagonal d = mean per-entry variance, off-diagonal o = -d/(N-1)
// (each row of U sums to 1 exactly, so row covariances have zero row sums).
struct RowCovSummary {
  double d = 0.0;
  double o = 0.0;
};

RowCovSummary u_row_cov(const Matrix& U_var, int N) {
  RowCovSummary rc;
  rc.d = U_var.mean();
  rc.o = N > 1 ? -rc.d / (N - 1) : 0.0;
  return rc;
}

Matrix llr_of_posterior(const Matrix& P, double clamp) {
  Matrix out(P.rows(), P.cols());
  for (Eigen::Index j = 0; j < P.cols(); ++j)
    for (Eigen::Index i = 0; i < P.rows(); ++i)
      out(i, j) = llr_from_mean(P(i, j), clamp);
  return out;
}

}  // namespace

SolverState init_state(const ProblemInstance& inst, const SignalPrior& prior,
                       const SolverConfig& config) {
  SolverState s;
  const int N = inst.N, M = inst.M, R = inst.R;
  const double sx2 = std::max(prior.second_moment(), config.precision_floor);
  s.gamma0 = inst.gamma_w;
  // Random prior draw for the signal belief: a zero start leaves the message
  // to U rank-one (no assignment information), so the iteration cannot break
  // the permutation symmetry. The draw plays the role of the vanishing-overlap
  // start assumed by the state evolution.
  {
    std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ull);
    std::normal_distribution<double> nd(0.0, std::sqrt(prior.sigma_x2));
    std::uniform_real_distribution<double> ur;
    s.X_e_minus.mean.resize(R, M);
    for (Eigen::Index j = 0; j < M; ++j)
      for (Eigen::Index i = 0; i < R; ++i)
        s.X_e_minus.mean(i, j) = ur(rng) < prior.rho ? 0.0 : nd(rng);
  }
  s.X_e_minus.precision = 1.0 / sx2;
  s.X_e_plus.mean = Matrix::Zero(R, M);
  s.X_e_plus.precision = config.precision_floor;
  s.X_p_minus = s.X_e_minus.mean;
  s.gamma_X_p_minus = 1.0 / sx2;
  s.X_p_plus = Matrix::Zero(R, M);
  s.gamma_X_p_plus = 1.0 / sx2;
  s.U_p_minus = Matrix::Constant(N, N, 1.0 / N);
  s.U_var_minus = Matrix::Constant(N, N, (1.0 / N) * (1.0 - 1.0 / N));
  s.V_hat = (inst.A * s.X_p_minus).transpose();
  s.V_hat_prev = Matrix::Zero(M, N);
  s.U_prev = Matrix::Constant(N, N, 1.0 / N);
  s.X_hat_prev = Matrix::Zero(R, M);
  const double l0 = N > 1 ? -std::log(static_cast<double>(N - 1)) : 0.0;
  s.llr_minus_e = LlrMatrix::constant(N, l0, config.llr_clamp);
  s.llr_plus_e = LlrMatrix::constant(N, l0, config.llr_clamp);
  s.B_U = Matrix::Zero(N, N);
  s.Lambda_U_diag = Vector::Zero(N);
  s.Lambda_X = Matrix::Zero(R, R);
  s.b_X = Matrix::Zero(R, M);
  s.Sigma_X = sx2 * Matrix::Identity(R, R);
  s.t = 0;
  return s;
}

void bilmmse_u(SolverState& state, const ProblemInstance& inst,
               const SolverConfig& config) {
  const int N = inst.N, M = inst.M;
  const double g0 = state.gamma0;
  // Per-column error variance of V_hat: column k of V_hat is row k of
  // A X_hat, so its per-entry error variance is a_k^T Sigma_X a_k. The
  // observed residual power supplies a floor: the conditional covariance
  // understates the error whenever the assignment it was conditioned on is
  // wrong, while the residual drops to the noise level only once U and V
  // jointly explain the data.
  Vector r = (inst.A * state.Sigma_X).cwiseProduct(inst.A).rowwise().sum();
  const double res2 =
      (inst.Y - state.U_p_minus * state.V_hat.transpose()).squaredNorm() /
      (static_cast<double>(N) * M);
  const double r_floor = std::max(res2 - 1.0 / g0, 0.0);
  r = r.cwiseMax(r_floor).cwiseMax(0.0);

  // Effective per-entry variance of the pseudo-channel y_i = V u_i + w_i
  // under u_i = e_k: the error of v_k acts as extra noise. This resums the
  // (1 - gamma0 <Y.Y>) precision correction, whose first-order expanded form
  // overshoots at finite SNR and would zero out the message.
  Vector s = config.onsager_precision
                 ? Vector(r.array() + 1.0 / g0)
                 : Vector::Constant(N, 1.0 / g0);

  // Row score for u_i = e_k: -||y_i - v_k||^2 / (2 s_k) - (M/2) log(s_k),
  // split as B_U - Lambda/2 for the row denoiser. The log term and the
  // ||y_i||^2 term matter only when s varies across columns.
  const Vector y2_row = inst.Y.rowwise().squaredNorm();
  const Vector inv_s = s.cwiseInverse();
  state.B_U = inst.Y * state.V_hat * inv_s.asDiagonal();
  state.B_U.noalias() -= 0.5 * y2_row * inv_s.transpose();
  state.B_U.rowwise() -=
      (0.5 * M * (s.array() * g0).log()).matrix().transpose();
  if (config.onsager_mean)
    state.B_U -= M * state.U_prev * (r.cwiseProduct(inv_s)).asDiagonal();

  Vector vtv_diag = state.V_hat.colwise().squaredNorm().transpose();
  state.Lambda_U_diag =
      ((vtv_diag + M * r).cwiseProduct(inv_s)).cwiseMax(0.0);
}

void bilmmse_x(SolverState& state, const ProblemInstance& inst,
               const SolverConfig& config) {
  const int N = inst.N, M = inst.M, R = inst.R;
  const double g0 = state.gamma0;
  const RowCovSummary rc = u_row_cov(state.U_var_minus, N);

  // Effective per-entry precision of the pseudo-channel Y = U_hat V + noise:
  // the assignment uncertainty injects interference of power N * d * P_v per
  // entry (P_v estimated from the observed power). Resummed counterpart of
  // the (1 - gamma0 <Y.Y>) correction, which expanded to first order would
  // push the precision negative whenever the assignment is still uncertain.
  double g_eff = g0;
  if (config.onsager_precision) {
    const double y2 = inst.Y.squaredNorm() / (N * M);
    const double p_v = std::max(y2 - 1.0 / g0, 0.0);
    // The unexplained residual power is attributed to assignment uncertainty;
    // a U with exactly zero reported variance leaves only the N*d*p_v term.
    double interference = N * rc.d * p_v;
    if (rc.d > 0.0) {
      const double res2 =
          (inst.Y - state.U_p_minus * state.V_hat.transpose()).squaredNorm() /
          (static_cast<double>(N) * M);
      interference = std::max(interference, res2 - 1.0 / g0);
    }
    g_eff = 1.0 / (1.0 / g0 + interference);
  }

  // Lambda_V = g_eff (U^T U + N * R_U) with R_U = (d-o) I + o J.
  Matrix Lambda_V = state.U_p_minus.transpose() * state.U_p_minus;
  Lambda_V.diagonal().array() += N * (rc.d - rc.o);
  Lambda_V.array() += N * rc.o;
  Lambda_V *= g_eff;
  state.Lambda_X = inst.A.transpose() * Lambda_V * inst.A;

  // B_V = g_eff (U^T Y - N R_U V_prev^T) with V_prev^T = A X_prev.
  Matrix B_V = g_eff * (state.U_p_minus.transpose() * inst.Y);
  if (config.onsager_mean) {
    Matrix Vp = state.V_hat_prev.transpose();  // N x M
    Matrix RUVp = (rc.d - rc.o) * Vp;
    RUVp.rowwise() += rc.o * Vp.colwise().sum();
    B_V -= g_eff * N * RUVp;
  }
  state.b_X = inst.A.transpose() * B_V;

  // PSD floor on Lambda_X; the eigenbasis also gives the inverse and trace.
  Eigen::SelfAdjointEigenSolver<Matrix> es(state.Lambda_X);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::SingularSystem, "Lambda_X eigendecomposition failed");
  Vector ev = es.eigenvalues().cwiseMax(0.0);
  const double ge = state.X_e_minus.precision;
  Vector inv_diag = (ev.array() + ge).inverse();
  const double tr = inv_diag.sum();
  if (!(tr > 0.0) || !std::isfinite(tr))
    throw Error(ErrorCode::SingularSystem, "regularized system not positive definite");
  state.Lambda_X = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  // Directions with non-positive curvature carry no usable likelihood
  // information; dropping their b-component as well keeps the posterior mean
  // consistent with the floored precision (it reverts to the extrinsic mean
  // there) instead of dividing a large b by a floored precision.
  Vector keep = (es.eigenvalues().array() > 0.0).cast<double>();
  Matrix rhs = ge * state.X_e_minus.mean +
               es.eigenvectors() *
                   (keep.asDiagonal() *
                    (es.eigenvectors().transpose() * state.b_X));
  state.X_p_minus = es.eigenvectors() *
                    (inv_diag.asDiagonal() * (es.eigenvectors().transpose() * rhs));
  state.Sigma_X = es.eigenvectors() * inv_diag.asDiagonal() *
                  es.eigenvectors().transpose();
  state.gamma_X_p_minus = std::max(R / tr, config.precision_floor);
}

void iterate(SolverState& state, const ProblemInstance& inst,
             const SignalPrior& prior, const SolverConfig& config) {
  const int N = inst.N;
  const double d = config.damping;
  const double clamp = config.llr_clamp;

  // --- U side: bilinear message, row denoiser, BP exchange with columns.
  bilmmse_u(state, inst, config);
  Matrix U_new(N, N);
  RowMessage msg;
  msg.lambda_diag = state.Lambda_U_diag;
  Vector mean(N), var(N);
  for (int i = 0; i < N; ++i) {
    msg.b = state.B_U.row(i).transpose();
    row_permutation_denoise(msg, state.llr_minus_e.values.row(i).transpose(),
                            mean, var);
    U_new.row(i) = mean.transpose();
  }
  state.U_p_minus = d * U_new + (1.0 - d) * state.U_p_minus;
  // Renormalize rows (damping preserves row sums, this guards drift).
  state.U_p_minus.array().colwise() /=
      state.U_p_minus.rowwise().sum().array();
  state.U_var_minus = state.U_p_minus.array() * (1.0 - state.U_p_minus.array());

  LlrMatrix llr_p_minus;
  llr_p_minus.values = llr_of_posterior(state.U_p_minus, clamp);
  LlrMatrix plus_new = bp_extrinsic(llr_p_minus, state.llr_minus_e, clamp);
  state.llr_plus_e.values =
      d * plus_new.values + (1.0 - d) * state.llr_plus_e.values;
  state.llr_plus_e.clamp_to(clamp);

  Matrix U_plus_post = column_posterior(state.llr_plus_e);
  LlrMatrix llr_p_plus;
  llr_p_plus.values = llr_of_posterior(U_plus_post, clamp);
  LlrMatrix minus_new = bp_extrinsic(llr_p_plus, state.llr_plus_e, clamp);
  state.llr_minus_e.values =
      d * minus_new.values + (1.0 - d) * state.llr_minus_e.values;
  state.llr_minus_e.clamp_to(clamp);

  // --- X side: bilinear posterior, EP exchange with the prior module.
  bilmmse_x(state, inst, config);
  ep_extrinsic(state.X_p_minus, state.gamma_X_p_minus, state.X_e_minus.mean,
               state.X_e_minus.precision, config.precision_floor,
               state.X_e_plus.mean, state.X_e_plus.precision);
  posterior_x(state.X_e_plus, prior, config.precision_floor, state.X_p_plus,
              state.gamma_X_p_plus);
  Matrix e_minus_new;
  double gamma_e_minus_new;
  ep_extrinsic(state.X_p_plus, state.gamma_X_p_plus, state.X_e_plus.mean,
               state.X_e_plus.precision, config.precision_floor, e_minus_new,
               gamma_e_minus_new);
  state.X_e_minus.mean = d * e_minus_new + (1.0 - d) * state.X_e_minus.mean;
  state.X_e_minus.precision = gamma_e_minus_new;

  // --- Bookkeeping for the next round's Onsager terms.
  state.U_prev = state.U_p_minus;
  state.V_hat_prev = state.V_hat;
  state.X_hat_prev = state.X_p_minus;
  state.V_hat = (inst.A * state.X_p_minus).transpose();
  ++state.t;
}

namespace {

Solution solve_once(const ProblemInstance& inst, const SignalPrior& prior,
                    const SolverConfig& config,
                    const GroundTruth* ground_truth) {
  SolverState state = init_state(inst, prior, config);
  Solution sol;
  Matrix X_last = state.X_p_minus;
  Matrix U_last = state.U_p_minus;
  bool converged = false;
  while (state.t < config.t_max) {
    iterate(state, inst, prior, config);
    const double xn = X_last.norm();
    const double dx =
        xn > 0.0 ? (state.X_p_minus - X_last).norm() / xn
                 : (state.X_p_minus - X_last).norm();
    const double du = (state.U_p_minus - U_last).norm() / inst.N;
    TracePoint tp;
    tp.t = state.t;
    tp.dx = dx;
    tp.du = du;
    if (ground_truth) {
      const double gn = ground_truth->X.norm();
      tp.nrmse_x = gn > 0.0 ? (ground_truth->X - state.X_p_minus).norm() / gn
                            : -1.0;
    }
    sol.trace.push_back(tp);
    X_last = state.X_p_minus;
    U_last = state.U_p_minus;
    if (std::max(dx, du) < config.xi) {
      converged = true;
      break;
    }
  }
  sol.U_soft = state.U_p_minus;
  sol.U_hard = round_permutation(sol.U_soft);
  sol.X_hat = state.X_p_plus;
  sol.iterations = state.t;
  sol.converged = converged;
  return sol;
}

// Marginalized data misfit of a hard assignment: tr(Y^T C^-1 Y) with
// C = sx2 * (UA)(UA)^T + I/gamma_w. X is integrated out under its Gaussian
// moment match, so assignments that merely refit X are not rewarded. At the
// true assignment this statistic concentrates on N*M.
double assignment_misfit(const ProblemInstance& inst, const SignalPrior& prior,
                         const Permutation& perm) {
  const int N = inst.N;
  const double sx2 = prior.second_moment();
  Matrix UA(N, inst.R);
  for (int i = 0; i < N; ++i) UA.row(i) = inst.A.row(perm.map[i]);
  Matrix C = sx2 * UA * UA.transpose();
  C.diagonal().array() += 1.0 / inst.gamma_w;
  return inst.Y.cwiseProduct(C.ldlt().solve(inst.Y)).sum();
}

}  // namespace

Solution solve(const ProblemInstance& inst, const SignalPrior& prior,
               const SolverConfig& config, const GroundTruth* ground_truth) {
  validate_instance(inst);
  validate_prior(prior);
  validate_config(config);

  // Message passing on the bilinear graph has spurious fixed points (a wrong
  // assignment with X refit to it). The trajectory is driven far more by the
  // damping level than by the random initialization, so restarts cycle
  // through damping levels as well; the solution whose hard assignment best
  // explains the data in the marginalized sense wins.
  const double damp_options[] = {config.damping, 0.9, 0.6, 0.8, 0.5, 0.7};
  Solution best;
  double best_misfit = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < config.restarts; ++attempt) {
    SolverConfig cfg = config;
    cfg.damping = damp_options[attempt % 6];
    cfg.seed = config.seed + 0x9E3779B97F4A7C15ull * attempt;
    Solution sol = solve_once(inst, prior, cfg, ground_truth);
    const double misfit = assignment_misfit(inst, prior, sol.U_hard);
    if (misfit < best_misfit) {
      best_misfit = misfit;
      best = std::move(sol);
    }
  }
  return best;
}

namespace {

// Kuhn–Munkres on a square cost matrix; returns rowsol and the optimum.
double hungarian_min(const Matrix& cost, std::vector<int>& rowsol) {
  const int n = static_cast<int>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j)
        if (!used[j]) {
          double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
          if (cur < minv[j]) {
            minv[j] = cur;
            way[j] = j0;
          }
          if (minv[j] < delta) {
            delta = minv[j];
            j1 = j;
          }
        }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  rowsol.assign(n, -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j)
    if (p[j]) {
      rowsol[p[j] - 1] = j - 1;
      total += cost(p[j] - 1, j - 1);
    }
  return total;
}

}  // namespace

Permutation round_permutation(const Matrix& U_soft) {
  const int n = static_cast<int>(U_soft.rows());
  Matrix cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = -std::log(std::max(U_soft(i, j), 1e-300));

  std::vector<int> rowsol;
  const double best = hungarian_min(cost, rowsol);
  const double tol = 1e-9 * std::max(1.0, std::abs(best));

  // Lexicographically smallest optimum: fix rows one at a time, keeping the
  // smallest column that still admits an assignment within tolerance.
  Permutation out;
  out.map.assign(n, -1);
  std::vector<int> rows(n), cols(n);
  for (int i = 0; i < n; ++i) rows[i] = cols[i] = i;
  double fixed_cost = 0.0;
  for (int step = 0; step < n; ++step) {
    const int i = rows[0];
    const int m = static_cast<int>(rows.size());
    int chosen = -1;
    for (int cj = 0; cj < m; ++cj) {
      const int j = cols[cj];
      if (m == 1) {
        chosen = cj;
        break;
      }
      // Reduced problem over remaining rows/cols with (i, j) fixed.
      Matrix sub(m - 1, m - 1);
      for (int a = 1; a < m; ++a) {
        int bcol = 0;
        for (int b = 0; b < m; ++b) {
          if (b == cj) continue;
          sub(a - 1, bcol++) = cost(rows[a], cols[b]);
        }
      }
      std::vector<int> subsol;
      const double rest = hungarian_min(sub, subsol);
      if (fixed_cost + cost(i, j) + rest <= best + tol) {
        chosen = cj;
        break;
      }
    }
    if (chosen < 0) chosen = 0;  // numerical safety net
    out.map[i] = cols[chosen];
    fixed_cost += cost(i, cols[chosen]);
    rows.erase(rows.begin());
    cols.erase(cols.begin() + chosen);
  }
  return out;
}

}  // namespace ucs
