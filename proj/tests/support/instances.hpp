#pragma once

// Random model instances and the finite-difference gradient checker shared
// by the unit and acceptance suites.

#include <algorithm>
#include <cmath>

#include "lfagcl/objectives.hpp"
#include "support/synthetic.hpp"

namespace lfagcl::testing {

inline EmbeddingTables random_tables(index_t n_users, index_t n_items, int d,
                                     Rng& rng, double scale = 0.6) {
  EmbeddingTables emb;
  emb.user_base.resize(n_users, d);
  emb.item_base.resize(n_items, d);
  for (Eigen::Index r = 0; r < emb.user_base.rows(); ++r)
    for (int c = 0; c < d; ++c) emb.user_base(r, c) = rng.uniform(-scale, scale);
  for (Eigen::Index r = 0; r < emb.item_base.rows(); ++r)
    for (int c = 0; c < d; ++c) emb.item_base(r, c) = rng.uniform(-scale, scale);
  return emb;
}

inline LatentFactors random_factor_pair(index_t n_users, index_t n_items, int f,
                                        Rng& rng) {
  LatentFactors factors;
  factors.P.resize(n_users, f);
  factors.Q.resize(n_items, f);
  for (Eigen::Index r = 0; r < factors.P.rows(); ++r)
    for (int c = 0; c < f; ++c) factors.P(r, c) = rng.uniform(-1, 1);
  for (Eigen::Index r = 0; r < factors.Q.rows(); ++r)
    for (int c = 0; c < f; ++c) factors.Q(r, c) = rng.uniform(-1, 1);
  return factors;
}

// A valid batch for a graph: positives are train edges, negatives are not.
inline Minibatch make_batch(const InteractionGraph& g, int n, Rng& rng) {
  Minibatch batch;
  for (int t = 0; t < n; ++t) {
    const std::uint64_t k = rng.below(g.n_train_edges());
    const index_t u = g.user_of_edge(k);
    const index_t pos = g.adjacency.col_idx[k];
    index_t neg;
    do {
      neg = static_cast<index_t>(rng.below(g.n_items));
    } while (g.has_train_edge(u, neg));
    batch.triplets.push_back({u, pos, neg});
    batch.users.push_back(u);
    batch.items.push_back(pos);
    batch.items.push_back(neg);
  }
  const auto dedup = [](std::vector<index_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedup(batch.users);
  dedup(batch.items);
  return batch;
}

struct Instance {
  InteractionGraph graph;
  LatentFactors factors;
  EmbeddingTables emb;
  Minibatch batch;
};

inline Instance make_instance(std::uint64_t seed, index_t n_users = 12,
                              index_t n_items = 15, int d = 4, int f = 2,
                              int batch = 6) {
  Rng rng(seed);
  const auto edges = random_edges(n_users, n_items, 2, 5, rng);
  Instance inst;
  inst.graph = build_graph(split_from_train(edges, n_users, n_items));
  inst.factors = random_factor_pair(n_users, n_items, f, rng);
  inst.emb = random_tables(n_users, n_items, d, rng);
  inst.batch = make_batch(inst.graph, batch, rng);
  return inst;
}

// Max relative error between the analytic gradient and central differences
// (step 1e-5) over every entry of both tables.
inline double gradcheck(Instance& inst, const ObjectiveConfig& cfg) {
  const JointLossResult analytic =
      joint_loss_and_gradients(inst.graph, inst.factors, inst.emb, inst.batch, cfg);
  const double h = 1e-5;
  double worst = 0.0;
  const auto probe = [&](Matrix& table, const Matrix& grad) {
    for (Eigen::Index r = 0; r < table.rows(); ++r)
      for (Eigen::Index c = 0; c < table.cols(); ++c) {
        const double orig = table(r, c);
        table(r, c) = orig + h;
        const double up =
            joint_loss(inst.graph, inst.factors, inst.emb, inst.batch, cfg).total;
        table(r, c) = orig - h;
        const double down =
            joint_loss(inst.graph, inst.factors, inst.emb, inst.batch, cfg).total;
        table(r, c) = orig;
        const double fd = (up - down) / (2 * h);
        const double a = grad(r, c);
        const double rel =
            std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
        worst = std::max(worst, rel);
      }
  };
  probe(inst.emb.user_base, analytic.grads.user);
  probe(inst.emb.item_base, analytic.grads.item);
  return worst;
}

}  // namespace lfagcl::testing
