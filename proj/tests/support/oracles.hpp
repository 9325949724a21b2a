#pragma once

// Independent dense reference implementations used to check the sparse and
// factored production paths. These deliberately avoid CsrMatrix and the
// channel code: everything is materialized with plain Eigen dense algebra.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "lfagcl/channels.hpp"
#include "lfagcl/interactions.hpp"
#include "lfagcl/types.hpp"

namespace lfagcl::testing {

// D_u^{-1/2} A D_i^{-1/2} materialized from the train edges.
inline Eigen::MatrixXd dense_normalized(const std::vector<Interaction>& train,
                                        index_t n_users, index_t n_items) {
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n_users, n_items);
  for (const Interaction& e : train) adj(e.user, e.item) = 1.0;
  Eigen::VectorXd du = adj.rowwise().sum();
  Eigen::VectorXd di = adj.colwise().sum();
  Eigen::MatrixXd out = adj;
  for (index_t u = 0; u < n_users; ++u)
    for (index_t i = 0; i < n_items; ++i)
      if (adj(u, i) != 0.0) out(u, i) = 1.0 / std::sqrt(du[u] * di[i]);
  return out;
}

struct DenseForward {
  std::vector<Eigen::MatrixXd> user_layers;
  std::vector<Eigen::MatrixXd> item_layers;
  Eigen::MatrixXd user_final;
  Eigen::MatrixXd item_final;
};

// Reference bipartite convolution with an arbitrary dense propagation matrix.
inline DenseForward dense_forward(const Eigen::MatrixXd& prop,
                                  const Eigen::MatrixXd& user_base,
                                  const Eigen::MatrixXd& item_base, int layers) {
  DenseForward fwd;
  fwd.user_layers.push_back(user_base);
  fwd.item_layers.push_back(item_base);
  for (int l = 1; l <= layers; ++l) {
    fwd.user_layers.push_back(prop * fwd.item_layers[l - 1]);
    fwd.item_layers.push_back(prop.transpose() * fwd.user_layers[l - 1]);
  }
  fwd.user_final = fwd.user_layers[0];
  fwd.item_final = fwd.item_layers[0];
  for (int l = 1; l <= layers; ++l) {
    fwd.user_final += fwd.user_layers[l];
    fwd.item_final += fwd.item_layers[l];
  }
  return fwd;
}

// Augmented channel with the dense completion explicitly materialized.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> dense_augmented(
    const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q,
    const std::vector<Eigen::MatrixXd>& user_layers,
    const std::vector<Eigen::MatrixXd>& item_layers) {
  const Eigen::MatrixXd completion = P * Q.transpose();
  Eigen::MatrixXd user_aug =
      Eigen::MatrixXd::Zero(P.rows(), user_layers[0].cols());
  Eigen::MatrixXd item_aug =
      Eigen::MatrixXd::Zero(Q.rows(), item_layers[0].cols());
  for (std::size_t l = 0; l < user_layers.size(); ++l) {
    user_aug += completion * item_layers[l];
    item_aug += completion.transpose() * user_layers[l];
  }
  return {user_aug, item_aug};
}

inline Eigen::MatrixXd to_dense(const Matrix& m) {
  return Eigen::MatrixXd(m);
}

inline double max_rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = 1.0 + b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / denom;
}

}  // namespace lfagcl::testing
