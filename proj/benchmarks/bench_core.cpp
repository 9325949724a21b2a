#include <benchmark/benchmark.h>

#include <set>
#include <utility>
#include <vector>

#include "lfagcl/channels.hpp"
#include "lfagcl/evaluation.hpp"
#include "lfagcl/objectives.hpp"
#include "lfagcl/trainer.hpp"

namespace {

using namespace lfagcl;

InteractionGraph make_graph(index_t n_users, index_t n_items, int deg, Rng& rng) {
  DatasetSplit split;
  split.n_users = n_users;
  split.n_items = n_items;
  for (index_t u = 0; u < n_users; ++u) {
    std::set<index_t> items;
    while (items.size() < static_cast<std::size_t>(deg))
      items.insert(static_cast<index_t>(rng.below(n_items)));
    for (const index_t i : items) split.train.push_back({u, i, 1.0});
  }
  std::sort(split.train.begin(), split.train.end());
  return build_graph(split);
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1, 1);
  return m;
}

void BM_SparsePropagation(benchmark::State& state) {
  const auto n = static_cast<index_t>(state.range(0));
  Rng rng(1);
  const InteractionGraph g = make_graph(n, n + n / 2, 8, rng);
  const Matrix dense = random_matrix(g.n_items, 32, rng);
  for (auto _ : state) benchmark::DoNotOptimize(g.normalized.multiply(dense));
}
BENCHMARK(BM_SparsePropagation)->Arg(200)->Arg(2000);

void BM_FactoredAugmented(benchmark::State& state) {
  const auto n = static_cast<index_t>(state.range(0));
  Rng rng(2);
  const InteractionGraph g = make_graph(n, n + n / 2, 8, rng);
  EmbeddingTables emb{random_matrix(g.n_users, 32, rng), random_matrix(g.n_items, 32, rng)};
  LatentFactors factors;
  factors.P = random_matrix(g.n_users, 5, rng);
  factors.Q = random_matrix(g.n_items, 5, rng);
  const ForwardResult fwd = main_channel_forward(g, emb, 2, 0.0, Mode::eval);
  for (auto _ : state)
    benchmark::DoNotOptimize(augmented_channel_forward(factors, fwd.states));
}
BENCHMARK(BM_FactoredAugmented)->Arg(200)->Arg(2000);

// The materialized alternative the factored path avoids.
void BM_DenseAugmented(benchmark::State& state) {
  const auto n = static_cast<index_t>(state.range(0));
  Rng rng(2);
  const InteractionGraph g = make_graph(n, n + n / 2, 8, rng);
  EmbeddingTables emb{random_matrix(g.n_users, 32, rng), random_matrix(g.n_items, 32, rng)};
  LatentFactors factors;
  factors.P = random_matrix(g.n_users, 5, rng);
  factors.Q = random_matrix(g.n_items, 5, rng);
  const ForwardResult fwd = main_channel_forward(g, emb, 2, 0.0, Mode::eval);
  for (auto _ : state) {
    const Matrix completion = factors.P * factors.Q.transpose();
    Matrix user_aug = Matrix::Zero(g.n_users, 32);
    Matrix item_aug = Matrix::Zero(g.n_items, 32);
    for (int l = 0; l <= fwd.states.layers(); ++l) {
      user_aug.noalias() += completion * fwd.states.item_layers[l];
      item_aug.noalias() += completion.transpose() * fwd.states.user_layers[l];
    }
    benchmark::DoNotOptimize(user_aug);
    benchmark::DoNotOptimize(item_aug);
  }
}
BENCHMARK(BM_DenseAugmented)->Arg(200)->Arg(2000);

void BM_AlsHalfStep(benchmark::State& state) {
  const auto n = static_cast<index_t>(state.range(0));
  Rng rng(3);
  const InteractionGraph g = make_graph(n, n + n / 2, 8, rng);
  std::vector<Interaction> entries;
  for (index_t u = 0; u < g.n_users; ++u)
    for (std::uint64_t k = g.adjacency.row_ptr[u]; k < g.adjacency.row_ptr[u + 1]; ++k)
      entries.push_back({u, g.adjacency.col_idx[k], 1.0});
  const ObservedEntries obs = ObservedEntries::build(entries, g.n_users, g.n_items);
  LatentFactors factors;
  factors.lfa_lambda = 0.1;
  factors.P = random_matrix(g.n_users, 5, rng);
  factors.Q = random_matrix(g.n_items, 5, rng);
  for (auto _ : state) als_half_step(factors, obs, AlsSide::user);
}
BENCHMARK(BM_AlsHalfStep)->Arg(200)->Arg(2000);

void BM_JointLossAndGradients(benchmark::State& state) {
  const auto n = static_cast<index_t>(state.range(0));
  Rng rng(4);
  const InteractionGraph g = make_graph(n, n + n / 2, 8, rng);
  EmbeddingTables emb{random_matrix(g.n_users, 32, rng), random_matrix(g.n_items, 32, rng)};
  LatentFactors factors;
  factors.P = random_matrix(g.n_users, 5, rng);
  factors.Q = random_matrix(g.n_items, 5, rng);
  Rng sampler(5);
  const Minibatch batch = sample_minibatch(g, 2048, sampler);
  ObjectiveConfig cfg;
  for (auto _ : state)
    benchmark::DoNotOptimize(joint_loss_and_gradients(g, factors, emb, batch, cfg));
}
BENCHMARK(BM_JointLossAndGradients)->Arg(200)->Arg(1000);

void BM_RankAllItems(benchmark::State& state) {
  const auto n = static_cast<index_t>(state.range(0));
  Rng rng(6);
  const InteractionGraph g = make_graph(n, n + n / 2, 8, rng);
  const Matrix user_final = random_matrix(g.n_users, 32, rng);
  const Matrix item_final = random_matrix(g.n_items, 32, rng);
  index_t user = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(rank_all_items(user_final, item_final, g, user, 20));
    user = (user + 1) % g.n_users;
  }
}
BENCHMARK(BM_RankAllItems)->Arg(200)->Arg(2000);

}  // namespace

BENCHMARK_MAIN();
