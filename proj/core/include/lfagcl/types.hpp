#pragma once

#include <Eigen/Core>
#include <cstdint>

namespace lfagcl {

// Embedding and factor tables are row-centric (one row per user/item), so
// row-major storage keeps rows contiguous for propagation and serialization.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

using index_t = std::uint32_t;

}  // namespace lfagcl
