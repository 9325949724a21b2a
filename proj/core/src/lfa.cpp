#include "lfagcl/lfa.hpp"

#include <Eigen/Cholesky>

#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lfagcl/errors.hpp"
#include "lfagcl/io_util.hpp"
#include "lfagcl/rng.hpp"
#include "lfagcl/util.hpp"

namespace lfagcl {

ObservedEntries ObservedEntries::build(std::span<const Interaction> entries,
                                       index_t n_users, index_t n_items) {
  ObservedEntries obs;
  obs.n_users = n_users;
  obs.n_items = n_items;
  obs.n_entries = entries.size();
  obs.user_ptr.assign(static_cast<std::size_t>(n_users) + 1, 0);
  obs.item_ptr.assign(static_cast<std::size_t>(n_items) + 1, 0);
  for (const Interaction& e : entries) {
    ++obs.user_ptr[e.user + 1];
    ++obs.item_ptr[e.item + 1];
  }
  for (std::size_t k = 1; k < obs.user_ptr.size(); ++k) obs.user_ptr[k] += obs.user_ptr[k - 1];
  for (std::size_t k = 1; k < obs.item_ptr.size(); ++k) obs.item_ptr[k] += obs.item_ptr[k - 1];
  obs.user_items.resize(entries.size());
  obs.user_ratings.resize(entries.size());
  obs.item_users.resize(entries.size());
  obs.item_ratings.resize(entries.size());
  std::vector<std::uint64_t> ucur(obs.user_ptr.begin(), obs.user_ptr.end() - 1);
  std::vector<std::uint64_t> icur(obs.item_ptr.begin(), obs.item_ptr.end() - 1);
  for (const Interaction& e : entries) {
    const std::uint64_t uk = ucur[e.user]++;
    obs.user_items[uk] = e.item;
    obs.user_ratings[uk] = e.rating;
    const std::uint64_t ik = icur[e.item]++;
    obs.item_users[ik] = e.user;
    obs.item_ratings[ik] = e.rating;
  }
  return obs;
}

double lfa_objective(const LatentFactors& factors, const ObservedEntries& observed) {
  const double lambda = factors.lfa_lambda;
  double total = 0.0;
  for (index_t u = 0; u < observed.n_users; ++u) {
    const double pnorm2 = factors.P.row(u).squaredNorm();
    for (std::uint64_t k = observed.user_ptr[u]; k < observed.user_ptr[u + 1]; ++k) {
      const index_t i = observed.user_items[k];
      const double resid = observed.user_ratings[k] - factors.P.row(u).dot(factors.Q.row(i));
      total += resid * resid + lambda * (pnorm2 + factors.Q.row(i).squaredNorm());
    }
  }
  return total;
}

double lfa_objective(const LatentFactors& factors,
                     std::span<const Interaction> entries) {
  const double lambda = factors.lfa_lambda;
  double total = 0.0;
  for (const Interaction& e : entries) {
    const double resid = e.rating - factors.P.row(e.user).dot(factors.Q.row(e.item));
    total += resid * resid +
             lambda * (factors.P.row(e.user).squaredNorm() +
                       factors.Q.row(e.item).squaredNorm());
  }
  return total;
}

namespace {

// Solves (sum q q^T + lambda n I) x = rhs for one row. Falls back to a
// jittered diagonal when the normal matrix is singular.
void solve_rows(Matrix& target, const Matrix& fixed,
                const std::vector<std::uint64_t>& ptr,
                const std::vector<index_t>& cols,
                const std::vector<double>& ratings, double lambda,
                int n_threads, std::atomic<std::uint64_t>& jitter_count) {
  const int f = static_cast<int>(target.cols());
  parallel_for(target.rows(), n_threads, [&](std::size_t begin, std::size_t end) {
    Eigen::MatrixXd normal(f, f);
    Eigen::VectorXd rhs(f);
    for (std::size_t r = begin; r < end; ++r) {
      const std::uint64_t k0 = ptr[r], k1 = ptr[r + 1];
      if (k0 == k1) continue;  // no observations: row unchanged
      normal.setZero();
      rhs.setZero();
      for (std::uint64_t k = k0; k < k1; ++k) {
        const auto q = fixed.row(cols[k]);
        normal.noalias() += q.transpose() * q;
        rhs.noalias() += ratings[k] * q.transpose();
      }
      const double ridge = lambda * static_cast<double>(k1 - k0);
      normal.diagonal().array() += ridge;
      Eigen::LLT<Eigen::MatrixXd> llt(normal);
      Eigen::VectorXd x;
      if (llt.info() == Eigen::Success) x = llt.solve(rhs);
      if (llt.info() != Eigen::Success || !x.allFinite()) {
        normal.diagonal().array() += 1e-10;
        x = Eigen::LLT<Eigen::MatrixXd>(normal).solve(rhs);
        ++jitter_count;
      }
      target.row(r) = x.transpose();
    }
  });
}

}  // namespace

void als_half_step(LatentFactors& factors, const ObservedEntries& observed,
                   AlsSide side, int n_threads) {
  std::atomic<std::uint64_t> jitter_count{0};
  if (side == AlsSide::user) {
    solve_rows(factors.P, factors.Q, observed.user_ptr, observed.user_items,
               observed.user_ratings, factors.lfa_lambda, n_threads, jitter_count);
  } else {
    solve_rows(factors.Q, factors.P, observed.item_ptr, observed.item_users,
               observed.item_ratings, factors.lfa_lambda, n_threads, jitter_count);
  }
  if (jitter_count > 0)
    log_warn("als_half_step: singular normal matrix on " +
             std::to_string(jitter_count.load()) +
             " row(s); applied 1e-10 ridge jitter");
}

namespace {

void init_uniform(Matrix& m, double scale, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rng.uniform(-scale, scale);
}

void check_finite(double objective, int iter, const char* phase) {
  if (!std::isfinite(objective)) {
    std::ostringstream os;
    os << "factorization objective became non-finite (" << objective
       << ") at iteration " << iter << " after " << phase;
    throw NumericError(os.str());
  }
}

LfaTrainResult train_sgd(const ObservedEntries& observed,
                         std::span<const Interaction> entries,
                         const LfaConfig& config, LatentFactors factors) {
  LfaTrainResult result;
  Rng rng(splitmix64(config.seed ^ 0x5fd1e3u));
  std::vector<std::uint32_t> order(entries.size());
  std::iota(order.begin(), order.end(), 0u);
  const double lr = config.sgd_learning_rate;
  const double lambda = config.lfa_lambda;
  double prev = lfa_objective(factors, observed);
  const int f = config.f;
  Eigen::VectorXd p_old(f);
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    rng.shuffle(order);
    for (const std::uint32_t k : order) {
      const Interaction& e = entries[k];
      auto p = factors.P.row(e.user);
      auto q = factors.Q.row(e.item);
      const double err = e.rating - p.dot(q);
      p_old = p.transpose();
      p += lr * (err * q - lambda * p);
      q += lr * (err * p_old.transpose() - lambda * q);
    }
    const double objective = lfa_objective(factors, observed);
    check_finite(objective, iter, "sgd epoch");
    result.objective_per_iter.push_back(objective);
    result.iters_run = iter;
    if (prev > 0 && (prev - objective) / prev < config.rel_tol && objective <= prev) {
      result.converged = true;
      break;
    }
    prev = objective;
  }
  result.factors = std::move(factors);
  return result;
}

}  // namespace

LfaTrainResult train_lfa(std::span<const Interaction> train_entries,
                         index_t n_users, index_t n_items,
                         const LfaConfig& config, int n_threads) {
  if (train_entries.empty()) throw FormatError("no training entries for factorization");
  if (config.f < 1 || config.max_iters < 1 || config.rel_tol <= 0)
    throw ConfigError("invalid factorization config");
  if (config.f >= static_cast<int>(std::min(n_users, n_items)))
    throw ConfigError("latent dimension f must be below min(|U|, |I|)");
  if (config.f > static_cast<int>(std::min(n_users, n_items)) / 2)
    log_warn("latent dimension f is above min(|U|, |I|)/2; factorization may overfit");

  LatentFactors factors;
  factors.lfa_lambda = config.lfa_lambda;
  factors.P.resize(n_users, config.f);
  factors.Q.resize(n_items, config.f);
  Rng rng(config.seed);
  init_uniform(factors.P, config.init_scale, rng);
  init_uniform(factors.Q, config.init_scale, rng);

  const ObservedEntries observed =
      ObservedEntries::build(train_entries, n_users, n_items);

  if (config.solver == LfaConfig::Solver::sgd)
    return train_sgd(observed, train_entries, config, std::move(factors));

  LfaTrainResult result;
  double prev = lfa_objective(factors, observed);
  check_finite(prev, 0, "initialization");
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    als_half_step(factors, observed, AlsSide::user, n_threads);
    als_half_step(factors, observed, AlsSide::item, n_threads);
    const double objective = lfa_objective(factors, observed);
    check_finite(objective, iter, "item half-step");
    result.objective_per_iter.push_back(objective);
    result.iters_run = iter;
    if (prev > 0 && (prev - objective) / prev < config.rel_tol) {
      result.converged = true;
      break;
    }
    prev = objective;
  }
  result.factors = std::move(factors);
  return result;
}

double predict_entry(const LatentFactors& factors, index_t u, index_t i) {
  return factors.P.row(u).dot(factors.Q.row(i));
}

namespace {
constexpr std::uint32_t kFactorsVersion = 1;
}

void save_factors(const std::string& path, const LatentFactors& factors,
                  const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  BinaryWriter w(out);
  w.tag("LFAF");
  w.u32(kFactorsVersion);
  w.u64(factors.n_users());
  w.u64(factors.n_items());
  w.u64(static_cast<std::uint64_t>(factors.f()));
  w.f64(factors.lfa_lambda);
  w.matrix(factors.P);
  w.matrix(factors.Q);
  w.tag("CFG0");
  w.str(config_echo);
}

LoadedFactors load_factors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open factor checkpoint '" + path + "'");
  BinaryReader r(in, path);
  r.expect_tag("LFAF");
  const std::uint32_t version = r.u32();
  if (version != kFactorsVersion)
    throw IoError("unsupported factor checkpoint version " + std::to_string(version));
  const auto n_users = static_cast<Eigen::Index>(r.u64());
  const auto n_items = static_cast<Eigen::Index>(r.u64());
  const auto f = static_cast<Eigen::Index>(r.u64());
  LoadedFactors loaded;
  loaded.factors.lfa_lambda = r.f64();
  r.section("P");
  loaded.factors.P = r.matrix(n_users, f);
  r.section("Q");
  loaded.factors.Q = r.matrix(n_items, f);
  if (!r.at_eof()) {
    r.section("config echo");
    r.expect_tag("CFG0");
    loaded.config_echo = r.str();
  }
  return loaded;
}

}  // namespace lfagcl
