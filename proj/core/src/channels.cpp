#include "lfagcl/channels.hpp"

#include <cassert>

namespace lfagcl {

CsrMatrix edge_dropout(const CsrMatrix& normalized, double rate, Rng& rng) {
  assert(rate >= 0.0 && rate < 1.0);
  if (rate == 0.0) return normalized;

  CsrMatrix dropped;
  dropped.n_rows = normalized.n_rows;
  dropped.n_cols = normalized.n_cols;
  dropped.row_ptr.assign(normalized.row_ptr.size(), 0);
  dropped.col_idx.reserve(normalized.nnz());
  dropped.values.reserve(normalized.nnz());
  const double scale = 1.0 / (1.0 - rate);
  for (index_t r = 0; r < normalized.n_rows; ++r) {
    for (std::uint64_t k = normalized.row_ptr[r]; k < normalized.row_ptr[r + 1]; ++k) {
      if (rng.next_double() < rate) continue;
      dropped.col_idx.push_back(normalized.col_idx[k]);
      dropped.values.push_back(normalized.values[k] * scale);
    }
    dropped.row_ptr[r + 1] = dropped.col_idx.size();
  }
  return dropped;
}

ForwardResult main_channel_forward(const InteractionGraph& graph,
                                   const EmbeddingTables& emb, int layers,
                                   double dropout_rate, Mode mode, Rng* rng) {
  assert(layers >= 1);
  ForwardResult fwd;
  LayerStates& states = fwd.states;

  const CsrMatrix* prop = &graph.normalized;
  const CsrMatrix* prop_t = &graph.normalized_t;
  if (mode == Mode::train && dropout_rate > 0.0) {
    assert(rng != nullptr);
    states.dropped = edge_dropout(graph.normalized, dropout_rate, *rng);
    states.dropped_t = states.dropped->transposed();
    prop = &*states.dropped;
    prop_t = &*states.dropped_t;
  }

  states.user_layers.reserve(layers + 1);
  states.item_layers.reserve(layers + 1);
  states.user_layers.push_back(emb.user_base);
  states.item_layers.push_back(emb.item_base);
  for (int l = 1; l <= layers; ++l) {
    states.user_layers.push_back(prop->multiply(states.item_layers[l - 1]));
    states.item_layers.push_back(prop_t->multiply(states.user_layers[l - 1]));
  }

  fwd.user_final = states.user_layers[0];
  fwd.item_final = states.item_layers[0];
  for (int l = 1; l <= layers; ++l) {
    fwd.user_final += states.user_layers[l];
    fwd.item_final += states.item_layers[l];
  }
  return fwd;
}

double predict_score(const Matrix& user_final, const Matrix& item_final,
                     index_t user, index_t item) {
  return user_final.row(user).dot(item_final.row(item));
}

Vector predict_scores_for_user(const Matrix& user_final,
                               const Matrix& item_final, index_t user) {
  return item_final * user_final.row(user).transpose();
}

AugmentedStates augmented_channel_forward(const LatentFactors& factors,
                                          const LayerStates& states) {
  const auto d = states.user_layers[0].cols();
  AugmentedStates aug;
  aug.user_aug = Matrix::Zero(factors.P.rows(), d);
  aug.item_aug = Matrix::Zero(factors.Q.rows(), d);
  for (int l = 0; l <= states.layers(); ++l) {
    // Explicit f x d temporaries pin the factored evaluation order.
    const Matrix item_proj = factors.Q.transpose() * states.item_layers[l];
    aug.user_aug.noalias() += factors.P * item_proj;
    const Matrix user_proj = factors.P.transpose() * states.user_layers[l];
    aug.item_aug.noalias() += factors.Q * user_proj;
  }
  return aug;
}

}  // namespace lfagcl
