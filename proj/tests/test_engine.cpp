#include <doctest.h>

#include "ucs/engine.hpp"
#include "ucs/harness.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace ucs;

namespace {

SolverConfig quiet_config() {
  SolverConfig cfg;
  return cfg;
}

}  // namespace

TEST_CASE("bilinear X pass reduces to scalar fusion for exact identity model") {
  const int N = 5, M = 7;
  std::mt19937_64 rng(100);
  ProblemInstance inst;
  GroundTruth truth;
  gen_instance(N, M, N, SignalPrior::gaussian(), 35.0, -1.0, rng, inst, truth);
  inst.A = Matrix::Identity(N, N);
  Matrix U = truth.U.to_matrix();
  inst.Y = U * truth.X;  // noiseless, A = I

  SolverConfig cfg = quiet_config();
  SolverState st = init_state(inst, SignalPrior::gaussian(), cfg);
  st.U_p_minus = U;
  st.U_var_minus = Matrix::Zero(N, N);  // exact U, zero correlation error
  st.X_e_minus.mean = Matrix::Random(N, M);
  st.X_e_minus.precision = st.gamma0;

  bilmmse_x(st, inst, cfg);
  const double ge = st.X_e_minus.precision, g0 = st.gamma0;
  Matrix expected = (ge * st.X_e_minus.mean + g0 * (U.transpose() * inst.Y)) /
                    (ge + g0);
  CHECK((st.X_p_minus - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("bilinear X pass matches the closed-form LMMSE oracle") {
  const int N = 4, M = 50;
  std::mt19937_64 rng(200);
  ProblemInstance inst;
  GroundTruth truth;
  gen_instance(N, M, N, SignalPrior::gaussian(), 30.0, -1.0, rng, inst, truth);

  SolverConfig cfg = quiet_config();
  SignalPrior prior = SignalPrior::gaussian();
  SolverState st = init_state(inst, prior, cfg);
  Matrix U = truth.U.to_matrix();
  st.U_p_minus = U;
  st.U_var_minus = Matrix::Zero(N, N);
  st.X_e_minus.mean = Matrix::Zero(N, M);
  st.X_e_minus.precision = 1.0 / prior.sigma_x2;

  bilmmse_x(st, inst, cfg);

  const double g0 = st.gamma0;
  Matrix H = g0 * inst.A.transpose() * inst.A +
             (1.0 / prior.sigma_x2) * Matrix::Identity(N, N);
  Matrix oracle = H.ldlt().solve(g0 * inst.A.transpose() * U.transpose() *
                                 inst.Y);
  CHECK((st.X_p_minus - oracle).norm() / oracle.norm() < 1e-8);
}

TEST_CASE("precision message reduces to gamma0 * diag(V^T V) when R_V -> 0") {
  // R_V vanishes only when the reported signal precision is huge AND the
  // residual power is at the noise floor, i.e. the current (U, V) pair
  // actually explains the observations.
  const int N = 6, M = 9;
  std::mt19937_64 rng(300);
  ProblemInstance inst;
  GroundTruth truth;
  gen_instance(N, M, N, SignalPrior::gaussian(), 25.0, -1.0, rng, inst, truth);
  SolverConfig cfg = quiet_config();
  SolverState st = init_state(inst, SignalPrior::gaussian(), cfg);
  st.V_hat = Matrix::Random(M, N);
  st.U_p_minus = truth.U.to_matrix();
  inst.Y = st.U_p_minus * st.V_hat.transpose();  // zero residual
  inst.gamma_w = 1e12;
  st.gamma0 = inst.gamma_w;
  st.Sigma_X = 1e-30 * Matrix::Identity(N, N);  // conditional error ~0
  bilmmse_u(st, inst, cfg);
  Vector expect = st.gamma0 * st.V_hat.colwise().squaredNorm().transpose();
  CHECK((st.Lambda_U_diag - expect).cwiseAbs().maxCoeff() <
        1e-6 * expect.maxCoeff());
}

TEST_CASE("mean message to U identifies the true assignment at high SNR") {
  // The optimal assignment of B_U (not its per-row argmax: the Gram matrix of
  // the rows of A X need not be diagonally dominant) must match the truth.
  const int N = 8, M = 60;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    std::mt19937_64 rng(seed);
    ProblemInstance inst;
    GroundTruth truth;
    gen_instance(N, M, N, SignalPrior::gaussian(), 60.0, -1.0, rng, inst, truth);
    SolverConfig cfg = quiet_config();
    SolverState st = init_state(inst, SignalPrior::gaussian(), cfg);
    st.X_p_minus = truth.X;
    st.gamma_X_p_minus = 1e12;
    st.V_hat = (inst.A * truth.X).transpose();
    bilmmse_u(st, inst, cfg);
    // Row-wise softmax of B_U (tempered so nothing underflows; row shifts and
    // a global positive scale leave the optimal assignment unchanged), then
    // assignment rounding.
    const double temp =
        std::max(1.0, (st.B_U.maxCoeff() - st.B_U.minCoeff()) / 500.0);
    Matrix S(N, N);
    for (int i = 0; i < N; ++i) {
      Vector row = st.B_U.row(i).transpose() / temp;
      row.array() -= row.maxCoeff();
      S.row(i) = row.array().exp().transpose();
    }
    Permutation assigned = round_permutation(S);
    CHECK(assigned.map == truth.U.map);
  }
}

TEST_CASE("iterate increments t and keeps rows stochastic") {
  const int N = 10, M = 40;
  std::mt19937_64 rng(400);
  ProblemInstance inst;
  GroundTruth truth;
  gen_instance(N, M, N, SignalPrior::gaussian(), 30.0, -1.0, rng, inst, truth);
  SolverConfig cfg = quiet_config();
  SignalPrior prior = SignalPrior::gaussian();
  SolverState st = init_state(inst, prior, cfg);
  for (int k = 0; k < 5; ++k) {
    iterate(st, inst, prior, cfg);
    CHECK(st.t == k + 1);
    Vector sums = st.U_p_minus.rowwise().sum();
    CHECK((sums.array() - 1.0).abs().maxCoeff() < 1e-10);
    CHECK(st.X_e_minus.precision >= cfg.precision_floor);
  }
}

TEST_CASE("noise-free X-side loop with exact U recovers the signal") {
  const int N = 6, M = 30;
  std::mt19937_64 rng(500);
  ProblemInstance inst;
  GroundTruth truth;
  gen_instance(N, M, N, SignalPrior::gaussian(),
               std::numeric_limits<double>::infinity(), -1.0, rng, inst, truth);
  SolverConfig cfg = quiet_config();
  SignalPrior prior = SignalPrior::gaussian();
  SolverState st = init_state(inst, prior, cfg);
  st.U_p_minus = truth.U.to_matrix();
  st.U_var_minus = Matrix::Zero(N, N);
  // Run only the X-side EP loop, keeping the permutation fixed at the truth.
  for (int k = 0; k < 50; ++k) {
    bilmmse_x(st, inst, cfg);
    ep_extrinsic(st.X_p_minus, st.gamma_X_p_minus, st.X_e_minus.mean,
                 st.X_e_minus.precision, cfg.precision_floor,
                 st.X_e_plus.mean, st.X_e_plus.precision);
    posterior_x(st.X_e_plus, prior, cfg.precision_floor, st.X_p_plus,
                st.gamma_X_p_plus);
    ep_extrinsic(st.X_p_plus, st.gamma_X_p_plus, st.X_e_plus.mean,
                 st.X_e_plus.precision, cfg.precision_floor,
                 st.X_e_minus.mean, st.X_e_minus.precision);
  }
  CHECK(nrmse(truth.X, st.X_p_minus) < 1e-6);
}

TEST_CASE("round_permutation basics and brute-force agreement") {
  Matrix P = Matrix::Zero(4, 4);
  P(0, 2) = P(1, 0) = P(2, 3) = P(3, 1) = 1.0;
  Permutation out = round_permutation(P);
  CHECK(out.map == std::vector<int>({2, 0, 3, 1}));

  Permutation uni = round_permutation(Matrix::Constant(5, 5, 0.2));
  CHECK(uni.map == std::vector<int>({0, 1, 2, 3, 4}));

  std::mt19937_64 rng(600);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix S(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) S(i, j) = u(rng);
    // Sinkhorn-ish normalization toward doubly stochastic.
    for (int k = 0; k < 50; ++k) {
      S.array().colwise() /= S.rowwise().sum().array();
      S.array().rowwise() /= S.colwise().sum().array();
    }
    Permutation got = round_permutation(S);
    // Brute force over all 24 permutations.
    std::vector<int> perm{0, 1, 2, 3};
    double best = -1e300;
    std::vector<int> best_perm;
    do {
      double score = 0.0;
      for (int i = 0; i < 4; ++i) score += std::log(S(i, perm[i]));
      if (score > best + 1e-12) {
        best = score;
        best_perm = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    double got_score = 0.0;
    for (int i = 0; i < 4; ++i) got_score += std::log(S(i, got.map[i]));
    CHECK(got_score == doctest::Approx(best).epsilon(1e-10));
  }
}

TEST_CASE("solve handles an underdetermined instance gracefully") {
  const int N = 12, M = 1;
  std::mt19937_64 rng(700);
  ProblemInstance inst;
  GroundTruth truth;
  gen_instance(N, M, N, SignalPrior::gaussian(), 30.0, -1.0, rng, inst, truth);
  SolverConfig cfg = quiet_config();
  cfg.t_max = 30;
  Solution sol = solve(inst, SignalPrior::gaussian(), cfg, &truth);
  CHECK(sol.iterations <= cfg.t_max);
  CHECK(is_permutation(sol.U_hard.to_matrix()));
  CHECK(sol.X_hat.allFinite());
}

TEST_CASE("different damping levels reach the same fixed point") {
  const int N = 50, M = 100, R = 10;
  std::mt19937_64 rng(0);
  ProblemInstance inst;
  GroundTruth truth;
  gen_instance(N, M, R, SignalPrior::gaussian(), 30.0, -1.0, rng, inst, truth);
  SolverConfig a = quiet_config();
  a.damping = 0.9;
  SolverConfig b = quiet_config();
  b.damping = 0.8;
  Solution sa = solve(inst, SignalPrior::gaussian(), a, &truth);
  Solution sb = solve(inst, SignalPrior::gaussian(), b, &truth);
  CHECK(sa.U_hard.map == truth.U.map);
  CHECK(sb.U_hard.map == truth.U.map);
  const double na = nrmse(truth.X, sa.X_hat);
  const double nb = nrmse(truth.X, sb.X_hat);
  CHECK(std::abs(na - nb) < 1e-4);
}

TEST_CASE("row-permuting the observations conjugates the estimate") {
  const int N = 12, M = 80, R = 4;
  std::mt19937_64 rng(909);
  ProblemInstance inst;
  GroundTruth truth;
  gen_instance(N, M, R, SignalPrior::gaussian(), 40.0, -1.0, rng, inst, truth);
  SolverConfig cfg = quiet_config();
  SignalPrior prior = SignalPrior::gaussian();
  Solution base = solve(inst, prior, cfg, &truth);

  std::mt19937_64 rng2(901);
  Permutation pi = gen_permutation(N, rng2);
  Matrix Pi = pi.to_matrix();
  ProblemInstance permuted = inst;
  permuted.Y = Pi * inst.Y;
  Solution moved = solve(permuted, prior, cfg, nullptr);

  // Hard permutation conjugates exactly; X follows up to roundoff from the
  // reordered reductions.
  CHECK((moved.U_soft - Pi * base.U_soft).cwiseAbs().maxCoeff() < 1e-5);
  CHECK((Pi * base.U_hard.to_matrix() - moved.U_hard.to_matrix())
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK((moved.X_hat - base.X_hat).cwiseAbs().maxCoeff() < 1e-5);
}
