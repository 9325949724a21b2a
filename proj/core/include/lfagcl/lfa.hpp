#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lfagcl/interactions.hpp"
#include "lfagcl/types.hpp"

namespace lfagcl {

struct LfaConfig {
  int f = 5;                  // latent dimension
  double lfa_lambda = 0.1;    // per-observation ridge coefficient
  int max_iters = 100;        // full alternations (ALS) or epochs (SGD)
  double rel_tol = 1e-6;      // stop when relative objective decrease falls below
  double init_scale = 0.01;   // uniform init in [-init_scale, init_scale]
  std::uint64_t seed = 1;

  enum class Solver { als, sgd };
  Solver solver = Solver::als;
  double sgd_learning_rate = 0.01;
};

// Factor pair defining the dense completion P * Q^T, which is never
// materialized: callers consume it row-by-row or in factored form.
struct LatentFactors {
  Matrix P;  // |U| x f
  Matrix Q;  // |I| x f
  double lfa_lambda = 0.0;

  int f() const { return static_cast<int>(P.cols()); }
  index_t n_users() const { return static_cast<index_t>(P.rows()); }
  index_t n_items() const { return static_cast<index_t>(Q.rows()); }
};

// Observed training entries grouped by row and by column for the alternating
// solves. Immutable once built.
struct ObservedEntries {
  index_t n_users = 0;
  index_t n_items = 0;
  // by_user: for each u, (item, rating) pairs; by_item: for each i, (user, rating).
  std::vector<std::uint64_t> user_ptr, item_ptr;
  std::vector<index_t> user_items, item_users;
  std::vector<double> user_ratings, item_ratings;
  std::uint64_t n_entries = 0;

  static ObservedEntries build(std::span<const Interaction> entries,
                               index_t n_users, index_t n_items);
};

// Sum over observed (u, i) of (r_ui - p_u . q_i)^2 + lambda (|p_u|^2 + |q_i|^2).
// The regularizer is counted once per observed entry.
double lfa_objective(const LatentFactors& factors, const ObservedEntries& observed);
double lfa_objective(const LatentFactors& factors,
                     std::span<const Interaction> entries);

enum class AlsSide { user, item };

// Exact block minimization of the objective over one side, the other held
// fixed: p_u <- (sum q_i q_i^T + lambda |obs_u| I)^-1 sum r_ui q_i, and
// symmetrically for items. Rows with no observations are left unchanged.
// A singular normal matrix (lambda = 0) is resolved with a 1e-10 diagonal
// jitter and a logged warning.
void als_half_step(LatentFactors& factors, const ObservedEntries& observed,
                   AlsSide side, int n_threads = 1);

struct LfaTrainResult {
  LatentFactors factors;
  std::vector<double> objective_per_iter;  // after each full alternation/epoch
  int iters_run = 0;
  bool converged = false;  // stopped on rel_tol before max_iters
};

LfaTrainResult train_lfa(std::span<const Interaction> train_entries,
                         index_t n_users, index_t n_items,
                         const LfaConfig& config, int n_threads = 1);

double predict_entry(const LatentFactors& factors, index_t u, index_t i);

// Factor checkpoint: magic "LFAF", version u32, |U| u64, |I| u64, f u64,
// lambda f64, P row-major f64, Q row-major f64, then an optional "CFG0"
// trailer carrying the effective-config echo.
void save_factors(const std::string& path, const LatentFactors& factors,
                  const std::string& config_echo = "");

struct LoadedFactors {
  LatentFactors factors;
  std::string config_echo;
};

LoadedFactors load_factors(const std::string& path);

}  // namespace lfagcl
