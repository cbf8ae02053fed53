#pragma once

#include "ucs/engine.hpp"
#include "ucs/model.hpp"
#include "ucs/state_evolution.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace ucs {

enum class ExperimentKind { single, snr_sweep, nm_grid, sparsity_rank_grid, p_local };

const char* experiment_kind_name(ExperimentKind k);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::single;
  std::vector<int> N_list{20};
  std::vector<int> M_list{100};
  std::vector<int> R_list{20};
  std::vector<int> p_list;          // only for p_local
  std::vector<double> rho_list{0.0};
  std::vector<double> snr_db_list{30.0};
  double sigma_x2 = 1.0;
  int trials_per_cell = 1;
  std::uint64_t master_seed = 0;
  SolverConfig solver;
  bool se_enabled = false;
  double sensing_scale = -1.0;  // <= 0 means 1/sqrt(N)
  int threads = 0;              // 0 = hardware concurrency
};

struct CellCoords {
  int N = 0, M = 0, R = 0;
  int p = 0;          // 0 when not a p_local cell
  double rho = 0.0;
  double snr_db = 0.0;
};

struct TrialRecord {
  CellCoords cell;
  std::uint64_t seed = 0;
  int trial = 0;
  bool has_empirical = true;  // false for SE-only rows
  bool failed = false;
  std::string fail_msg;
  double nrmse_x = 0.0;
  double hd_u = 0.0;
  int iterations = 0;
  bool converged = false;
  double wall_ms = 0.0;
  bool has_se = false;
  double se_nrmse = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t child_seed(std::uint64_t master, std::uint64_t cell_index,
                         std::uint64_t trial_index);

Permutation gen_permutation(int N, std::mt19937_64& rng);
Permutation gen_p_local_permutation(int N, int p, std::mt19937_64& rng);

void gen_instance(int N, int M, int R, const SignalPrior& prior, double snr_db,
                  double sensing_scale, std::mt19937_64& rng,
                  ProblemInstance& inst, GroundTruth& truth);

double nrmse(const Matrix& P, const Matrix& P_hat);
double hamming_distortion(const Matrix& U, const Matrix& U_hat);

std::vector<CellCoords> enumerate_cells(const ExperimentSpec& spec);

/// Runs every cell x trial (parallel over a thread pool) and invokes emit in
/// deterministic (cell, trial) order.
void run_experiment(const ExperimentSpec& spec,
                    const std::function<void(const TrialRecord&)>& emit);

}  // namespace ucs
