#pragma once

#include <optional>
#include <vector>

#include "lfagcl/graph.hpp"
#include "lfagcl/lfa.hpp"
#include "lfagcl/rng.hpp"
#include "lfagcl/types.hpp"

namespace lfagcl {

// Trainable layer-0 embeddings.
struct EmbeddingTables {
  Matrix user_base;  // |U| x d
  Matrix item_base;  // |I| x d

  int d() const { return static_cast<int>(user_base.cols()); }
};

// Per-layer propagated states from one forward pass. Layer 0 is the base
// table. When edge dropout was applied, the realized mask is kept as the
// dropped matrices so a backward pass sees the same edges.
struct LayerStates {
  std::vector<Matrix> user_layers;  // L+1 entries
  std::vector<Matrix> item_layers;
  std::optional<CsrMatrix> dropped;    // dropped normalized adjacency
  std::optional<CsrMatrix> dropped_t;  // its transpose (same mask)

  int layers() const { return static_cast<int>(user_layers.size()) - 1; }
};

struct AugmentedStates {
  Matrix user_aug;  // |U| x d
  Matrix item_aug;  // |I| x d
};

enum class Mode { train, eval };

// Keeps each nonzero independently with probability 1 - rate and rescales
// kept values by 1/(1 - rate), so the propagation is unbiased in
// expectation. rate = 0 returns the input unchanged.
CsrMatrix edge_dropout(const CsrMatrix& normalized, double rate, Rng& rng);

struct ForwardResult {
  LayerStates states;
  Matrix user_final;  // sum of user layers 0..L
  Matrix item_final;
};

// L rounds of bipartite convolution over the normalized adjacency, followed
// by the unweighted layer sum. In train mode with rate > 0 a single dropout
// realization is drawn from *rng and shared by both directions and all
// layers; eval mode always bypasses dropout.
ForwardResult main_channel_forward(const InteractionGraph& graph,
                                   const EmbeddingTables& emb, int layers,
                                   double dropout_rate, Mode mode,
                                   Rng* rng = nullptr);

double predict_score(const Matrix& user_final, const Matrix& item_final,
                     index_t user, index_t item);

// Scores of every item for one user.
Vector predict_scores_for_user(const Matrix& user_final,
                               const Matrix& item_final, index_t user);

// One-hop propagation of each main-channel layer through the factored dense
// completion, summed over layers:
//   user_aug = sum_l P (Q^T item_layer_l),  item_aug = sum_l Q (P^T user_layer_l).
// Evaluated strictly in the factored order; the |U| x |I| product is never
// formed, so the cost is O((|U| + |I|) f d) per layer.
AugmentedStates augmented_channel_forward(const LatentFactors& factors,
                                          const LayerStates& states);

}  // namespace lfagcl
