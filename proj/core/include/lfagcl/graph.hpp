#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lfagcl/interactions.hpp"
#include "lfagcl/types.hpp"

namespace lfagcl {

// Compressed sparse row matrix; column indices are sorted within each row.
struct CsrMatrix {
  index_t n_rows = 0;
  index_t n_cols = 0;
  std::vector<std::uint64_t> row_ptr;  // n_rows + 1
  std::vector<index_t> col_idx;        // nnz
  std::vector<double> values;          // nnz

  std::uint64_t nnz() const { return col_idx.size(); }

  bool has_entry(index_t row, index_t col) const;
  double entry(index_t row, index_t col) const;  // 0 when absent

  // Dense product: out[r, :] = sum_k values[k] * dense[col_idx[k], :].
  Matrix multiply(const Matrix& dense) const;

  CsrMatrix transposed() const;
};

// Bipartite training graph: binary adjacency A over train edges and its
// symmetric normalization with entries 1/sqrt(deg(u) * deg(i)). The transpose
// of the normalized matrix is kept for item-side propagation.
struct InteractionGraph {
  index_t n_users = 0;
  index_t n_items = 0;
  CsrMatrix adjacency;
  CsrMatrix normalized;
  CsrMatrix normalized_t;
  std::vector<std::uint32_t> user_degrees;
  std::vector<std::uint32_t> item_degrees;

  std::uint64_t n_train_edges() const { return adjacency.nnz(); }
  bool has_train_edge(index_t user, index_t item) const {
    return adjacency.has_entry(user, item);
  }
  // User owning train edge k in CSR storage order.
  index_t user_of_edge(std::uint64_t k) const;
};

InteractionGraph build_graph(const DatasetSplit& split);

// Users bucketed by training degree into contiguous near-equal-count groups
// (sorted by degree, ties broken by ascending user index; the remainder goes
// to the lowest buckets).
struct SparsityGroups {
  int n_groups = 0;
  std::vector<index_t> group_of_user;
  std::vector<std::uint32_t> group_user_count;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> degree_range;  // per group (lo, hi)
};

SparsityGroups group_users_by_degree(const InteractionGraph& graph, int n_groups = 5);

}  // namespace lfagcl
