#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lfagcl/channels.hpp"
#include "lfagcl/graph.hpp"
#include "lfagcl/lfa.hpp"
#include "lfagcl/types.hpp"

namespace lfagcl {

// One training batch: BPR triplets plus the deduplicated node sets that act
// as the in-batch contrastive pools.
struct Minibatch {
  struct Triplet {
    index_t user;
    index_t pos_item;
    index_t neg_item;
  };
  std::vector<Triplet> triplets;
  std::vector<index_t> users;  // deduplicated, ascending
  std::vector<index_t> items;  // deduplicated positives and negatives, ascending
  std::uint32_t skipped_triplets = 0;
};

struct LossBreakdown {
  double bpr = 0;
  double cl_user = 0;
  double cl_item = 0;
  double l2 = 0;
  double total = 0;
  double lambda1 = 0;
  double lambda2 = 0;
  double tau = 0;
};

// Mean over triplets of -log sigmoid(score_pos - score_neg), evaluated in
// softplus form so large gaps neither overflow nor hit log(0).
double bpr_loss(std::span<const std::pair<double, double>> triplet_scores);

// In-batch InfoNCE with cosine similarity: row k of `anchors` is the main
// view of a node and row k of `positives` its augmented view; every other
// row of `positives` serves as a negative. The denominator includes the
// positive term. Zero-norm vectors contribute cosine 0 (warned once).
double infonce_loss(const Matrix& anchors, const Matrix& positives, double tau);

// Sum of squared entries of the trainable embedding tables (the frozen
// factor pair is excluded).
double l2_penalty(const EmbeddingTables& emb);

struct ObjectiveConfig {
  double lambda1 = 0.01;
  double lambda2 = 1e-6;
  double tau = 0.5;
  double dropout_rate = 0.0;
  int layers = 2;

  enum class ClNegatives { batch, full };
  ClNegatives cl_negatives = ClNegatives::batch;
};

struct GradientTables {
  Matrix user;  // same shape as user_base
  Matrix item;
};

struct JointLossResult {
  LossBreakdown loss;
  GradientTables grads;
};

// Runs the dual-channel forward once (one shared dropout mask when
// dropout_rate > 0 in train mode), evaluates every loss term on the batch,
// and reverse-accumulates exact gradients of the total loss through the
// layer sums, both propagations, and the loss heads. Deterministic given
// the realized mask.
JointLossResult joint_loss_and_gradients(const InteractionGraph& graph,
                                         const LatentFactors& factors,
                                         const EmbeddingTables& emb,
                                         const Minibatch& batch,
                                         const ObjectiveConfig& config,
                                         Rng* dropout_rng = nullptr);

// Loss terms only, same forward path; used where gradients are not needed.
LossBreakdown joint_loss(const InteractionGraph& graph,
                         const LatentFactors& factors,
                         const EmbeddingTables& emb, const Minibatch& batch,
                         const ObjectiveConfig& config,
                         Rng* dropout_rng = nullptr);

}  // namespace lfagcl
