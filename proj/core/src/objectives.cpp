#include "lfagcl/objectives.hpp"

#include <atomic>
#include <cmath>
#include <string>

#include "lfagcl/errors.hpp"
#include "lfagcl/util.hpp"

namespace lfagcl {

namespace {

constexpr double kNormEps = 1e-12;

double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

void warn_zero_norm_once() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true))
    log_warn("cosine similarity saw a zero-norm vector; treating it as 0");
}

// Shared InfoNCE core. Anchors are gathered batch rows; the pool holds the
// candidate positives/negatives (pool row pos_index[k] is anchor k's
// positive). When grad_* are non-null, d(grad_scale * mean loss) is
// accumulated into them (grad_pool aligned with pool rows).
double cl_term(const Matrix& anchors, const Matrix& pool,
               std::span<const index_t> pos_index, double tau,
               double grad_scale, Matrix* grad_anchors, Matrix* grad_pool) {
  const Eigen::Index n_anchors = anchors.rows();
  const Eigen::Index n_pool = pool.rows();
  if (n_anchors == 0) return 0.0;

  Vector pool_norms(n_pool);
  for (Eigen::Index j = 0; j < n_pool; ++j) pool_norms[j] = pool.row(j).norm();

  Vector sims(n_pool), weights(n_pool);
  double total = 0.0;
  for (Eigen::Index k = 0; k < n_anchors; ++k) {
    const auto anchor = anchors.row(k);
    const double anchor_norm = anchor.norm();
    for (Eigen::Index j = 0; j < n_pool; ++j) {
      if (anchor_norm < kNormEps || pool_norms[j] < kNormEps) {
        warn_zero_norm_once();
        sims[j] = 0.0;
      } else {
        sims[j] = anchor.dot(pool.row(j)) / (anchor_norm * pool_norms[j]);
      }
    }
    const double max_logit = sims.maxCoeff() / tau;
    double sum_exp = 0.0;
    for (Eigen::Index j = 0; j < n_pool; ++j) {
      weights[j] = std::exp(sims[j] / tau - max_logit);
      sum_exp += weights[j];
    }
    const double lse = max_logit + std::log(sum_exp);
    total += lse - sims[pos_index[k]] / tau;

    if (grad_anchors != nullptr && grad_pool != nullptr) {
      const double inv_na = anchor_norm < kNormEps ? 0.0 : 1.0 / anchor_norm;
      for (Eigen::Index j = 0; j < n_pool; ++j) {
        const double w = weights[j] / sum_exp;
        const double coef = grad_scale * (w - (j == pos_index[k] ? 1.0 : 0.0)) /
                            (tau * static_cast<double>(n_anchors));
        if (coef == 0.0) continue;
        const double inv_nj = pool_norms[j] < kNormEps ? 0.0 : 1.0 / pool_norms[j];
        if (inv_na == 0.0 || inv_nj == 0.0) continue;  // cosine held at 0
        const double inv_cross = inv_na * inv_nj;
        grad_anchors->row(k) +=
            coef * (pool.row(j) * inv_cross - sims[j] * inv_na * inv_na * anchor);
        grad_pool->row(j) +=
            coef * (anchor * inv_cross - sims[j] * inv_nj * inv_nj * pool.row(j));
      }
    }
  }
  return total / static_cast<double>(n_anchors);
}

Matrix gather_rows(const Matrix& src, std::span<const index_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = src.row(rows[k]);
  return out;
}

void check_term_finite(double v, const char* term) {
  if (!std::isfinite(v))
    throw NumericError(std::string("non-finite loss term: ") + term);
}

struct JointWork {
  LossBreakdown loss;
  GradientTables grads;
};

JointWork joint_eval(const InteractionGraph& graph, const LatentFactors& factors,
                     const EmbeddingTables& emb, const Minibatch& batch,
                     const ObjectiveConfig& config, Rng* dropout_rng,
                     bool with_grads) {
  const ForwardResult fwd = main_channel_forward(
      graph, emb, config.layers, config.dropout_rate, Mode::train, dropout_rng);
  const AugmentedStates aug = augmented_channel_forward(factors, fwd.states);

  const Eigen::Index d = emb.user_base.cols();
  Matrix grad_e_user, grad_e_item, grad_h_user, grad_h_item;
  if (with_grads) {
    grad_e_user = Matrix::Zero(graph.n_users, d);
    grad_e_item = Matrix::Zero(graph.n_items, d);
    grad_h_user = Matrix::Zero(graph.n_users, d);
    grad_h_item = Matrix::Zero(graph.n_items, d);
  }

  JointWork work;
  LossBreakdown& loss = work.loss;
  loss.lambda1 = config.lambda1;
  loss.lambda2 = config.lambda2;
  loss.tau = config.tau;

  // Ranking term.
  if (!batch.triplets.empty()) {
    const double inv_t = 1.0 / static_cast<double>(batch.triplets.size());
    for (const auto& t : batch.triplets) {
      const auto e_u = fwd.user_final.row(t.user);
      const auto e_p = fwd.item_final.row(t.pos_item);
      const auto e_n = fwd.item_final.row(t.neg_item);
      const double margin = e_u.dot(e_p) - e_u.dot(e_n);
      loss.bpr += softplus(-margin) * inv_t;
      if (with_grads) {
        const double g = (sigmoid(margin) - 1.0) * inv_t;
        grad_e_user.row(t.user) += g * (e_p - e_n);
        grad_e_item.row(t.pos_item) += g * e_u;
        grad_e_item.row(t.neg_item) -= g * e_u;
      }
    }
  }
  check_term_finite(loss.bpr, "bpr");

  // Contrastive terms, one per node type.
  const bool full_pool = config.cl_negatives == ObjectiveConfig::ClNegatives::full;
  const auto run_cl = [&](std::span<const index_t> nodes, const Matrix& e_final,
                          const Matrix& h_final, Matrix& grad_e, Matrix& grad_h,
                          const char* name) {
    if (nodes.empty()) return 0.0;
    const Matrix anchors = gather_rows(e_final, nodes);
    Matrix grad_anchors;
    if (with_grads) grad_anchors = Matrix::Zero(anchors.rows(), d);
    double value = 0.0;
    if (full_pool) {
      Matrix* gp = with_grads ? &grad_h : nullptr;
      value = cl_term(anchors, h_final, nodes, config.tau, config.lambda1,
                      with_grads ? &grad_anchors : nullptr, gp);
    } else {
      const Matrix pool = gather_rows(h_final, nodes);
      std::vector<index_t> identity(nodes.size());
      for (std::size_t k = 0; k < nodes.size(); ++k) identity[k] = static_cast<index_t>(k);
      Matrix grad_pool;
      if (with_grads) grad_pool = Matrix::Zero(pool.rows(), d);
      value = cl_term(anchors, pool, identity, config.tau, config.lambda1,
                      with_grads ? &grad_anchors : nullptr,
                      with_grads ? &grad_pool : nullptr);
      if (with_grads)
        for (std::size_t k = 0; k < nodes.size(); ++k)
          grad_h.row(nodes[k]) += grad_pool.row(static_cast<Eigen::Index>(k));
    }
    if (with_grads)
      for (std::size_t k = 0; k < nodes.size(); ++k)
        grad_e.row(nodes[k]) += grad_anchors.row(static_cast<Eigen::Index>(k));
    check_term_finite(value, name);
    return value;
  };
  loss.cl_user = run_cl(batch.users, fwd.user_final, aug.user_aug, grad_e_user,
                        grad_h_user, "cl_user");
  loss.cl_item = run_cl(batch.items, fwd.item_final, aug.item_aug, grad_e_item,
                        grad_h_item, "cl_item");

  loss.l2 = l2_penalty(emb);
  check_term_finite(loss.l2, "l2");
  loss.total = loss.bpr + config.lambda1 * (loss.cl_user + loss.cl_item) +
               config.lambda2 * loss.l2;
  check_term_finite(loss.total, "total");

  if (!with_grads) return work;

  // Reverse pass. Both channels are linear in the layer states, so the
  // per-layer direct contributions are identical across layers:
  //   d/dU_l gets grad_e_user plus P (Q^T grad_h_item),
  //   d/dV_l gets grad_e_item plus Q (P^T grad_h_user).
  Matrix direct_user = grad_e_user;
  {
    const Matrix proj = factors.Q.transpose() * grad_h_item;
    direct_user.noalias() += factors.P * proj;
  }
  Matrix direct_item = grad_e_item;
  {
    const Matrix proj = factors.P.transpose() * grad_h_user;
    direct_item.noalias() += factors.Q * proj;
  }

  const LayerStates& states = fwd.states;
  const CsrMatrix* prop = states.dropped ? &*states.dropped : &graph.normalized;
  const CsrMatrix* prop_t =
      states.dropped_t ? &*states.dropped_t : &graph.normalized_t;

  // Walk layers top down: grad(U_{l-1}) += A grad(V_l), grad(V_{l-1}) += A^T grad(U_l).
  Matrix acc_user = direct_user;
  Matrix acc_item = direct_item;
  for (int l = config.layers; l >= 1; --l) {
    Matrix next_user = direct_user + prop->multiply(acc_item);
    Matrix next_item = direct_item + prop_t->multiply(acc_user);
    acc_user = std::move(next_user);
    acc_item = std::move(next_item);
  }

  work.grads.user = acc_user + 2.0 * config.lambda2 * emb.user_base;
  work.grads.item = acc_item + 2.0 * config.lambda2 * emb.item_base;
  if (!work.grads.user.allFinite() || !work.grads.item.allFinite())
    throw NumericError("non-finite gradient");
  return work;
}

}  // namespace

double bpr_loss(std::span<const std::pair<double, double>> triplet_scores) {
  if (triplet_scores.empty()) return 0.0;
  double total = 0.0;
  for (const auto& [pos, neg] : triplet_scores) total += softplus(-(pos - neg));
  return total / static_cast<double>(triplet_scores.size());
}

double infonce_loss(const Matrix& anchors, const Matrix& positives, double tau) {
  std::vector<index_t> identity(static_cast<std::size_t>(anchors.rows()));
  for (std::size_t k = 0; k < identity.size(); ++k) identity[k] = static_cast<index_t>(k);
  return cl_term(anchors, positives, identity, tau, 0.0, nullptr, nullptr);
}

double l2_penalty(const EmbeddingTables& emb) {
  return emb.user_base.squaredNorm() + emb.item_base.squaredNorm();
}

JointLossResult joint_loss_and_gradients(const InteractionGraph& graph,
                                         const LatentFactors& factors,
                                         const EmbeddingTables& emb,
                                         const Minibatch& batch,
                                         const ObjectiveConfig& config,
                                         Rng* dropout_rng) {
  JointWork work =
      joint_eval(graph, factors, emb, batch, config, dropout_rng, true);
  return {work.loss, std::move(work.grads)};
}

LossBreakdown joint_loss(const InteractionGraph& graph,
                         const LatentFactors& factors,
                         const EmbeddingTables& emb, const Minibatch& batch,
                         const ObjectiveConfig& config, Rng* dropout_rng) {
  return joint_eval(graph, factors, emb, batch, config, dropout_rng, false).loss;
}

}  // namespace lfagcl
