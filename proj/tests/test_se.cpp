#include <doctest.h>

#include "ucs/denoisers.hpp"
#include "ucs/state_evolution.hpp"

#include <cmath>
#include <random>

using namespace ucs;

TEST_CASE("F-function identities") {
  for (double x : {0.1, 1.0, 7.3}) CHECK(std::abs(f_tulino(x, 0.0)) < 1e-12);
  for (double z : {0.2, 1.0, 4.0}) CHECK(std::abs(f_tulino(0.0, z)) < 1e-12);
  for (double x : {0.5, 2.0, 10.0}) {
    const double expect = std::pow(std::sqrt(4.0 * x + 1.0) - 1.0, 2.0);
    CHECK(f_tulino(x, 1.0) == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(f_tulino(2.0, 1.0) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("bilinear-core MSE: perfect-measurement limit and monotonicity") {
  const double gamma = 2.5;
  // As alpha -> infinity the residual MSE vanishes (at beta_u = 1 it decays
  // like 1/sqrt(alpha)); alpha -> 0 recovers the prior-level MSE 1/gamma.
  CHECK(se_ex_minus(gamma, 1e12, 1.0) <= 2e-6 / gamma);
  CHECK(se_ex_minus(gamma, 1e-12, 1.0) ==
        doctest::Approx(1.0 / gamma).epsilon(1e-5));
  double prev = 1e300;
  for (double la = -6.0; la <= 12.0; la += 0.25) {
    const double e = se_ex_minus(gamma, std::pow(10.0, la), 0.7);
    CHECK(e <= prev + 1e-15);
    prev = e;
  }
}

TEST_CASE("bilinear-core MSE matches the direct trace oracle") {
  // (1/R) tr[(I + alpha A^T A)^-1] vs 1 - F(alpha, beta_u)/(4 beta_u alpha)
  // for A with i.i.d. N(0, 1/N) entries, beta_u = R/N.
  const int N = 400, R = 400;
  std::mt19937_64 rng(4242);
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(double(N)));
  Matrix A(N, R);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < R; ++j) A(i, j) = nd(rng);
  const double beta_u = double(R) / N;
  for (double alpha : {0.5, 2.0, 10.0}) {
    Matrix K = alpha * A.transpose() * A + Matrix::Identity(R, R);
    const double tr = K.inverse().trace() / R;
    const double closed = 1.0 - f_tulino(alpha, beta_u) / (4.0 * beta_u * alpha);
    CHECK(std::abs(tr - closed) / closed < 0.05);
  }
}

TEST_CASE("prior-side MSE: conjugate closed form and spike limit") {
  SignalPrior gauss = SignalPrior::gaussian(1.0);
  for (double g : {0.3, 1.0, 8.0}) {
    const double e = se_ex_plus(g, gauss, 201, 1e-9);
    CHECK(e == doctest::Approx(1.0 / (g + 1.0)).epsilon(1e-9));
  }
  CHECK(se_ex_plus(1.0, SignalPrior::bernoulli_gaussian(1.0), 201, 1e-9) == 0.0);
}

TEST_CASE("prior-side MSE matches Monte Carlo for the sparse prior") {
  SignalPrior prior = SignalPrior::bernoulli_gaussian(0.5, 1.0);
  const double gamma = 1.0;
  const double quad = se_ex_plus(gamma, prior, 201, 1e-9);

  std::mt19937_64 rng(777);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u;
  const int n = 2000000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = u(rng) < prior.rho ? 0.0 : nd(rng);
    const double r = x + nd(rng) / std::sqrt(gamma);
    double m, var;
    gx_bernoulli_gaussian(r, 1.0 / gamma, prior, m, var);
    const double se = (x - m) * (x - m);
    sum += se;
    sum2 += se * se;
  }
  const double mc = sum / n;
  const double stderr_mc =
      std::sqrt((sum2 / n - mc * mc) / n);
  CHECK(std::abs(quad - mc) < 3.0 * stderr_mc + 1e-6);
}

TEST_CASE("concentrated LLR recursions: closed-form spot checks") {
  double dm, om;
  se_llr_minus(0.7, 0.3, 2, dm, om);
  CHECK(dm == doctest::Approx(-0.3));
  CHECK(om == doctest::Approx(-0.7));

  se_llr_minus(0.0, 0.0, 3, dm, om);
  CHECK(om == doctest::Approx(-std::log(2.0)).epsilon(1e-12));

  const double c = 1.3;
  se_llr_minus(c, c, 9, dm, om);
  CHECK(dm == doctest::Approx(-c - std::log(8.0)).epsilon(1e-12));
  CHECK(om == doctest::Approx(dm).epsilon(1e-12));

  // gamma = 0 degenerates to the same log-sum-exp as the minus recursion.
  double dp, op;
  se_llr_plus(-0.4, -1.1, 0.0, 6, 201, 1e-9, dp, op);
  CHECK(dp == doctest::Approx(-std::log(5.0) + 1.1).epsilon(1e-12));
  CHECK(op ==
        doctest::Approx(-std::log(4.0 * std::exp(-1.1) + std::exp(-0.4)))
            .epsilon(1e-9));
}

TEST_CASE("off-diagonal LLR integral matches Monte Carlo") {
  const int N = 50;
  const double g = 1.0;
  const double dmin = -std::log(49.0), omin = -std::log(49.0);
  double dp, op;
  se_llr_plus(dmin, omin, g, N, 201, 1e-9, dp, op);

  std::mt19937_64 rng(31337);
  std::normal_distribution<double> nd;
  const int n = 2000000;
  double sum = 0.0, sum2 = 0.0;
  const double sg = std::sqrt(g);
  for (int i = 0; i < n; ++i) {
    const double nq = nd(rng);
    const double a = std::log(double(N - 2)) + sg * nq - 0.5 * g + omin;
    const double b = 0.5 * g + sg * nq + dmin;
    const double mx = std::max(a, b);
    const double v = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
    sum += v;
    sum2 += v * v;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  const double mc = -0.5 * g - mean;
  CHECK(std::abs(op - mc) < 3.0 * se + 1e-6);
}

TEST_CASE("assignment MSE: uniform and saturation limits") {
  const int N = 20;
  const double d0 = -std::log(double(N - 1));
  const double e0 = se_eu_minus(d0, d0, 0.0, N, 201, 1e-9);
  CHECK(e0 == doctest::Approx((1.0 / N) * (1.0 - 1.0 / N)).epsilon(1e-9));
  const double e_sat = se_eu_minus(d0, d0, 400.0, N, 401, 1e-7);
  CHECK(e_sat < 1e-6);
  CHECK(e0 <= 0.25);
  CHECK(e_sat >= 0.0);
}

TEST_CASE("assignment MSE matches the full-vector Monte Carlo oracle") {
  // Draw the full noise vector of one row (true index first) and evaluate the
  // per-component posterior weights of the concentrated score model: the true
  // index gets score gamma + sqrt(gamma) n + d, a wrong index sqrt(gamma) n + o,
  // against the off-support mass (N-1) exp(gamma/2 + o). Averaging m(1-m) over
  // the row gives an independent check of the 1-D quadrature.
  struct Point {
    int N;
    double g, d, o;
  };
  const Point points[] = {{50, 2.0, -std::log(49.0), -std::log(49.0)},
                          {30, 5.0, -1.0, -3.0},
                          {80, 0.5, -std::log(79.0), -std::log(79.0)}};
  std::mt19937_64 rng(90210);
  std::normal_distribution<double> nd;
  for (const auto& pt : points) {
    const double quad = se_eu_minus(pt.d, pt.o, pt.g, pt.N, 401, 1e-8);
    const int draws = 100000;
    double sum = 0.0, sum2 = 0.0;
    const double sg = std::sqrt(pt.g);
    const double off_mass = std::log(double(pt.N - 1)) + 0.5 * pt.g + pt.o;
    auto weight = [&](double num, double n1) {
      const double a = pt.g + sg * n1 + pt.d;
      const double mx = std::max(a, off_mass);
      const double den =
          mx + std::log(std::exp(a - mx) + std::exp(off_mass - mx));
      return std::exp(num - den);
    };
    for (int it = 0; it < draws; ++it) {
      double v = 0.0;
      for (int k = 0; k < pt.N; ++k) {
        const double n = nd(rng);
        const double m = k == 0 ? weight(pt.g + sg * n + pt.d, n)
                                : weight(sg * n + pt.o, n);
        v += m * (1.0 - m);
      }
      v /= pt.N;
      sum += v;
      sum2 += v * v;
    }
    const double mc = sum / draws;
    const double se = std::sqrt((sum2 / draws - mc * mc) / draws);
    CHECK(std::abs(quad - mc) < 3.0 * se + 2e-4);
  }
}

TEST_CASE("SE run: pure-noise input pins the prediction at one") {
  SEParams p = SEParams::from_dims(50, 100, 10, 1e-12, SignalPrior::gaussian());
  auto states = se_run(p, 100, 1e-8);
  REQUIRE(!states.empty());
  CHECK(states.back().predicted_nrmse == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("SE run: high-SNR anchor setup predicts accurate recovery") {
  // N=50, M=100, R=10, Gaussian prior, SNR 30 dB; physical precision
  // calibrated against per-entry power R*sigma_A2*sigma_x2 = R/N.
  const double gamma_phys = std::pow(10.0, 3.0) / (10.0 / 50.0);
  SEParams p = SEParams::from_dims(50, 100, 10, gamma_phys,
                                   SignalPrior::gaussian());
  auto states = se_run(p, 200, 1e-8);
  REQUIRE(!states.empty());
  CHECK(states.back().predicted_nrmse < 0.05);
  for (const auto& s : states) {
    CHECK(s.E_x_plus <= 1.0 + 1e-12);
    CHECK(s.E_u_minus >= 0.0);
    CHECK(s.E_u_minus <= 0.25);
  }
}

TEST_CASE("LLR pair recursion: fixed point at moderate gamma, certainty growth above") {
  const int N = 40;
  auto run = [&](double g, double& dm_out, double& change_out) {
    double dm = -std::log(double(N - 1)), om = dm;
    double change = 1e300;
    for (int k = 0; k < 200; ++k) {
      double dpn, opn, dmn, omn;
      se_llr_plus(dm, om, g, N, 201, 1e-9, dpn, opn);
      se_llr_minus(dpn, opn, N, dmn, omn);
      change = std::max(std::abs(dmn - dm), std::abs(omn - om));
      dm = 0.5 * dmn + 0.5 * dm;
      om = 0.5 * omn + 0.5 * om;
      if (change < 1e-10) break;
    }
    dm_out = dm;
    change_out = change;
  };
  // Weak coupling: the recursion settles to a finite fixed point.
  for (double g : {0.0, 0.5, 2.0}) {
    double dm, change;
    run(g, dm, change);
    CHECK(change < 1e-10);
  }
  // Strong coupling: certainty grows without bound (diagonal LLR keeps
  // increasing) and the assignment MSE at the reached LLRs is negligible.
  for (double g : {10.0, 50.0}) {
    double dm, change;
    run(g, dm, change);
    CHECK(dm > 10.0);
    const double e = se_eu_minus(dm, -dm, g, N, 201, 1e-7);
    CHECK(e < 1e-4);
  }
}
