#include <doctest.h>

#include <cmath>

#include "lfagcl/channels.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace lfagcl;

namespace {

EmbeddingTables random_tables(index_t n_users, index_t n_items, int d, Rng& rng) {
  EmbeddingTables emb;
  emb.user_base.resize(n_users, d);
  emb.item_base.resize(n_items, d);
  for (Eigen::Index r = 0; r < emb.user_base.rows(); ++r)
    for (int c = 0; c < d; ++c) emb.user_base(r, c) = rng.uniform(-1, 1);
  for (Eigen::Index r = 0; r < emb.item_base.rows(); ++r)
    for (int c = 0; c < d; ++c) emb.item_base(r, c) = rng.uniform(-1, 1);
  return emb;
}

LatentFactors random_factors(index_t n_users, index_t n_items, int f, Rng& rng) {
  LatentFactors factors;
  factors.P.resize(n_users, f);
  factors.Q.resize(n_items, f);
  for (Eigen::Index r = 0; r < factors.P.rows(); ++r)
    for (int c = 0; c < f; ++c) factors.P(r, c) = rng.uniform(-1, 1);
  for (Eigen::Index r = 0; r < factors.Q.rows(); ++r)
    for (int c = 0; c < f; ++c) factors.Q(r, c) = rng.uniform(-1, 1);
  return factors;
}

}  // namespace

TEST_CASE("edge_dropout at rate 0 is the identity") {
  Rng graph_rng(83);
  const auto edges = testing::random_edges(10, 10, 2, 5, graph_rng);
  const InteractionGraph g =
      build_graph(testing::split_from_train(edges, 10, 10));
  Rng rng(1);
  const CsrMatrix out = edge_dropout(g.normalized, 0.0, rng);
  CHECK(out.row_ptr == g.normalized.row_ptr);
  CHECK(out.col_idx == g.normalized.col_idx);
  CHECK(out.values == g.normalized.values);
}

TEST_CASE("edge_dropout keeps about 1-rate of the mass, exactly rescaled") {
  // One wide row gives 1e5 nonzeros.
  CsrMatrix m;
  m.n_rows = 1;
  m.n_cols = 100000;
  m.row_ptr = {0, 100000};
  m.col_idx.resize(100000);
  m.values.assign(100000, 0.125);
  for (index_t i = 0; i < 100000; ++i) m.col_idx[i] = i;

  Rng rng(91);
  const CsrMatrix dropped = edge_dropout(m, 0.5, rng);
  const double kept = static_cast<double>(dropped.nnz()) / 100000.0;
  CHECK(kept > 0.49);
  CHECK(kept < 0.51);
  for (const double v : dropped.values) CHECK(v == 0.25);  // 0.125 / (1 - 0.5)
}

TEST_CASE("main channel: single edge sums the two endpoints") {
  const InteractionGraph g =
      build_graph(testing::split_from_train({{0, 0}}, 1, 1));
  Rng rng(97);
  const EmbeddingTables emb = random_tables(1, 1, 3, rng);
  const ForwardResult fwd = main_channel_forward(g, emb, 1, 0.0, Mode::eval);
  CHECK(testing::max_rel_diff(
            testing::to_dense(fwd.user_final),
            testing::to_dense(emb.user_base) + testing::to_dense(emb.item_base)) <=
        1e-15);
}

TEST_CASE("main channel: zero-degree user keeps only its base row") {
  const InteractionGraph g =
      build_graph(testing::split_from_train({{0, 0}}, 2, 1));
  Rng rng(101);
  const EmbeddingTables emb = random_tables(2, 1, 4, rng);
  const ForwardResult fwd = main_channel_forward(g, emb, 2, 0.0, Mode::eval);
  CHECK(fwd.states.user_layers[1].row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fwd.states.user_layers[2].row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fwd.user_final.row(1) == emb.user_base.row(1));
}

TEST_CASE("main channel matches the dense propagation oracle") {
  Rng rng(103);
  const auto edges = testing::random_edges(20, 30, 2, 7, rng);
  const DatasetSplit split = testing::split_from_train(edges, 20, 30);
  const InteractionGraph g = build_graph(split);
  const EmbeddingTables emb = random_tables(20, 30, 8, rng);

  const ForwardResult fwd = main_channel_forward(g, emb, 2, 0.0, Mode::eval);
  const Eigen::MatrixXd dense = testing::dense_normalized(split.train, 20, 30);
  const testing::DenseForward want = testing::dense_forward(
      dense, testing::to_dense(emb.user_base), testing::to_dense(emb.item_base), 2);
  for (int l = 0; l <= 2; ++l) {
    CHECK(testing::max_rel_diff(testing::to_dense(fwd.states.user_layers[l]),
                                want.user_layers[l]) <= 1e-10);
    CHECK(testing::max_rel_diff(testing::to_dense(fwd.states.item_layers[l]),
                                want.item_layers[l]) <= 1e-10);
  }
  CHECK(testing::max_rel_diff(testing::to_dense(fwd.user_final), want.user_final) <= 1e-10);
  CHECK(testing::max_rel_diff(testing::to_dense(fwd.item_final), want.item_final) <= 1e-10);
}

TEST_CASE("predict scores: pairs and full rows agree") {
  Matrix user_final(1, 2), item_final(3, 2);
  user_final << 1, 0;
  item_final << 0, 1, 1, 0, 0.5, 0.5;
  CHECK(predict_score(user_final, item_final, 0, 0) == 0.0);
  CHECK(predict_score(user_final, item_final, 0, 1) == 1.0);

  Rng rng(107);
  Matrix uf(4, 6), itf(100, 6);
  for (Eigen::Index r = 0; r < uf.rows(); ++r)
    for (Eigen::Index c = 0; c < 6; ++c) uf(r, c) = rng.uniform(-1, 1);
  for (Eigen::Index r = 0; r < itf.rows(); ++r)
    for (Eigen::Index c = 0; c < 6; ++c) itf(r, c) = rng.uniform(-1, 1);
  const Vector row = predict_scores_for_user(uf, itf, 2);
  for (index_t i = 0; i < 100; ++i)
    CHECK(std::abs(row[i] - predict_score(uf, itf, 2, i)) <= 1e-12);
}

TEST_CASE("augmented channel: identity factors reproduce the layer sums") {
  Rng rng(109);
  const auto edges = testing::random_edges(6, 6, 1, 4, rng);
  const InteractionGraph g = build_graph(testing::split_from_train(edges, 6, 6));
  const EmbeddingTables emb = random_tables(6, 6, 5, rng);
  const ForwardResult fwd = main_channel_forward(g, emb, 2, 0.0, Mode::eval);

  LatentFactors eye;
  eye.P = Matrix::Identity(6, 6);
  eye.Q = Matrix::Identity(6, 6);
  const AugmentedStates aug = augmented_channel_forward(eye, fwd.states);
  Matrix item_sum = Matrix::Zero(6, 5), user_sum = Matrix::Zero(6, 5);
  for (int l = 0; l <= 2; ++l) {
    item_sum += fwd.states.item_layers[l];
    user_sum += fwd.states.user_layers[l];
  }
  CHECK(testing::max_rel_diff(testing::to_dense(aug.user_aug),
                              testing::to_dense(item_sum)) <= 1e-12);
  CHECK(testing::max_rel_diff(testing::to_dense(aug.item_aug),
                              testing::to_dense(user_sum)) <= 1e-12);
}

TEST_CASE("augmented channel: zero factors annihilate") {
  Rng rng(113);
  const auto edges = testing::random_edges(5, 7, 1, 3, rng);
  const InteractionGraph g = build_graph(testing::split_from_train(edges, 5, 7));
  const EmbeddingTables emb = random_tables(5, 7, 3, rng);
  const ForwardResult fwd = main_channel_forward(g, emb, 1, 0.0, Mode::eval);
  LatentFactors zero;
  zero.P = Matrix::Zero(5, 2);
  zero.Q = Matrix::Zero(7, 2);
  const AugmentedStates aug = augmented_channel_forward(zero, fwd.states);
  CHECK(aug.user_aug.cwiseAbs().maxCoeff() == 0.0);
  CHECK(aug.item_aug.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("augmented channel equals the materialized completion") {
  Rng rng(127);
  const auto edges = testing::random_edges(40, 50, 2, 8, rng);
  const InteractionGraph g = build_graph(testing::split_from_train(edges, 40, 50));
  const EmbeddingTables emb = random_tables(40, 50, 8, rng);
  const LatentFactors factors = random_factors(40, 50, 5, rng);
  const ForwardResult fwd = main_channel_forward(g, emb, 2, 0.0, Mode::eval);
  const AugmentedStates aug = augmented_channel_forward(factors, fwd.states);

  std::vector<Eigen::MatrixXd> ul, il;
  for (const auto& m : fwd.states.user_layers) ul.push_back(testing::to_dense(m));
  for (const auto& m : fwd.states.item_layers) il.push_back(testing::to_dense(m));
  const auto [want_user, want_item] = testing::dense_augmented(
      testing::to_dense(factors.P), testing::to_dense(factors.Q), ul, il);
  CHECK(testing::max_rel_diff(testing::to_dense(aug.user_aug), want_user) <= 1e-10);
  CHECK(testing::max_rel_diff(testing::to_dense(aug.item_aug), want_item) <= 1e-10);
}

TEST_CASE("factored and dense augmented forwards agree over random shapes") {
  Rng rng(131);
  for (int trial = 0; trial < 20; ++trial) {
    const index_t n_users = 4 + static_cast<index_t>(rng.below(61));
    const index_t n_items = 4 + static_cast<index_t>(rng.below(61));
    const int f = 1 + static_cast<int>(rng.below(8));
    const int d = 1 + static_cast<int>(rng.below(16));
    const int layers = 1 + static_cast<int>(rng.below(3));
    const auto edges = testing::random_edges(n_users, n_items, 1, 4, rng);
    const InteractionGraph g =
        build_graph(testing::split_from_train(edges, n_users, n_items));
    const EmbeddingTables emb = random_tables(n_users, n_items, d, rng);
    const LatentFactors factors = random_factors(n_users, n_items, f, rng);
    const ForwardResult fwd = main_channel_forward(g, emb, layers, 0.0, Mode::eval);
    const AugmentedStates aug = augmented_channel_forward(factors, fwd.states);

    std::vector<Eigen::MatrixXd> ul, il;
    for (const auto& m : fwd.states.user_layers) ul.push_back(testing::to_dense(m));
    for (const auto& m : fwd.states.item_layers) il.push_back(testing::to_dense(m));
    const auto [want_user, want_item] = testing::dense_augmented(
        testing::to_dense(factors.P), testing::to_dense(factors.Q), ul, il);
    CHECK(testing::max_rel_diff(testing::to_dense(aug.user_aug), want_user) <= 1e-10);
    CHECK(testing::max_rel_diff(testing::to_dense(aug.item_aug), want_item) <= 1e-10);
  }
}

TEST_CASE("eval-mode forwards are bit-identical") {
  Rng rng(137);
  const auto edges = testing::random_edges(15, 12, 1, 5, rng);
  const InteractionGraph g = build_graph(testing::split_from_train(edges, 15, 12));
  const EmbeddingTables emb = random_tables(15, 12, 6, rng);
  const ForwardResult a = main_channel_forward(g, emb, 2, 0.4, Mode::eval);
  const ForwardResult b = main_channel_forward(g, emb, 2, 0.4, Mode::eval);
  CHECK(a.user_final == b.user_final);
  CHECK(a.item_final == b.item_final);
  CHECK(!a.states.dropped.has_value());  // eval bypasses dropout entirely
}

TEST_CASE("train-mode dropout shares one mask across directions and layers") {
  Rng rng(139);
  const auto edges = testing::random_edges(10, 10, 2, 5, rng);
  const InteractionGraph g = build_graph(testing::split_from_train(edges, 10, 10));
  const EmbeddingTables emb = random_tables(10, 10, 4, rng);
  Rng mask_rng(5);
  const ForwardResult fwd = main_channel_forward(g, emb, 2, 0.5, Mode::train, &mask_rng);
  REQUIRE(fwd.states.dropped.has_value());
  const CsrMatrix& dropped = *fwd.states.dropped;
  // Recompute every layer from the recorded mask.
  Matrix u1 = dropped.multiply(emb.item_base);
  Matrix v1 = fwd.states.dropped_t->multiply(emb.user_base);
  CHECK(fwd.states.user_layers[1] == u1);
  CHECK(fwd.states.item_layers[1] == v1);
  CHECK(fwd.states.user_layers[2] == dropped.multiply(v1));
  CHECK(fwd.states.item_layers[2] == fwd.states.dropped_t->multiply(u1));
}

TEST_CASE("dropout is unbiased for the first-layer states") {
  Rng rng(149);
  const auto edges = testing::random_edges(8, 10, 2, 6, rng);
  const InteractionGraph g = build_graph(testing::split_from_train(edges, 8, 10));
  const EmbeddingTables emb = random_tables(8, 10, 4, rng);
  const ForwardResult clean = main_channel_forward(g, emb, 1, 0.0, Mode::eval);

  const int n_trials = 1000;
  // 20 sampled (user, dim) entries over users with at least one edge.
  std::vector<std::pair<index_t, int>> entries;
  while (entries.size() < 20) {
    const index_t u = static_cast<index_t>(rng.below(8));
    if (g.user_degrees[u] == 0) continue;
    entries.emplace_back(u, static_cast<int>(rng.below(4)));
  }
  std::vector<std::vector<double>> samples(entries.size());
  Rng mask_rng(20240817);
  for (int t = 0; t < n_trials; ++t) {
    const ForwardResult fwd = main_channel_forward(g, emb, 1, 0.3, Mode::train, &mask_rng);
    for (std::size_t e = 0; e < entries.size(); ++e)
      samples[e].push_back(fwd.states.user_layers[1](entries[e].first, entries[e].second));
  }
  for (std::size_t e = 0; e < entries.size(); ++e) {
    double mean = 0;
    for (const double v : samples[e]) mean += v;
    mean /= n_trials;
    double var = 0;
    for (const double v : samples[e]) var += (v - mean) * (v - mean);
    var /= (n_trials - 1);
    const double se = std::sqrt(var / n_trials);
    const double want = clean.states.user_layers[1](entries[e].first, entries[e].second);
    CHECK(std::abs(mean - want) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("the dual-channel forward is linear in the base tables") {
  Rng rng(151);
  const auto edges = testing::random_edges(9, 11, 1, 4, rng);
  const InteractionGraph g = build_graph(testing::split_from_train(edges, 9, 11));
  EmbeddingTables emb = random_tables(9, 11, 5, rng);
  const LatentFactors factors = random_factors(9, 11, 3, rng);

  const ForwardResult base = main_channel_forward(g, emb, 2, 0.0, Mode::eval);
  const AugmentedStates base_aug = augmented_channel_forward(factors, base.states);

  emb.user_base *= 2.0;
  emb.item_base *= 2.0;
  const ForwardResult scaled = main_channel_forward(g, emb, 2, 0.0, Mode::eval);
  const AugmentedStates scaled_aug = augmented_channel_forward(factors, scaled.states);

  CHECK(testing::max_rel_diff(testing::to_dense(scaled.user_final),
                              2.0 * testing::to_dense(base.user_final)) <= 1e-12);
  CHECK(testing::max_rel_diff(testing::to_dense(scaled.item_final),
                              2.0 * testing::to_dense(base.item_final)) <= 1e-12);
  CHECK(testing::max_rel_diff(testing::to_dense(scaled_aug.user_aug),
                              2.0 * testing::to_dense(base_aug.user_aug)) <= 1e-12);
  CHECK(testing::max_rel_diff(testing::to_dense(scaled_aug.item_aug),
                              2.0 * testing::to_dense(base_aug.item_aug)) <= 1e-12);
}
