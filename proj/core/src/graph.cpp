#include "lfagcl/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lfagcl/errors.hpp"

namespace lfagcl {

bool CsrMatrix::has_entry(index_t row, index_t col) const {
  if (row >= n_rows) return false;
  const auto begin = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[row]);
  const auto end = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[row + 1]);
  return std::binary_search(begin, end, col);
}

double CsrMatrix::entry(index_t row, index_t col) const {
  if (row >= n_rows) return 0.0;
  const auto begin = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[row]);
  const auto end = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[row + 1]);
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return values[static_cast<std::size_t>(it - col_idx.begin())];
}

Matrix CsrMatrix::multiply(const Matrix& dense) const {
  Matrix out = Matrix::Zero(n_rows, dense.cols());
  for (index_t r = 0; r < n_rows; ++r) {
    auto out_row = out.row(r);
    for (std::uint64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      out_row += values[k] * dense.row(col_idx[k]);
  }
  return out;
}

CsrMatrix CsrMatrix::transposed() const {
  CsrMatrix t;
  t.n_rows = n_cols;
  t.n_cols = n_rows;
  t.row_ptr.assign(static_cast<std::size_t>(n_cols) + 1, 0);
  for (const index_t c : col_idx) ++t.row_ptr[c + 1];
  for (std::size_t i = 1; i < t.row_ptr.size(); ++i) t.row_ptr[i] += t.row_ptr[i - 1];
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<std::uint64_t> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (index_t r = 0; r < n_rows; ++r) {
    for (std::uint64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      const std::uint64_t slot = cursor[col_idx[k]]++;
      t.col_idx[slot] = r;
      t.values[slot] = values[k];
    }
  }
  return t;
}

index_t InteractionGraph::user_of_edge(std::uint64_t k) const {
  const auto it = std::upper_bound(adjacency.row_ptr.begin(),
                                   adjacency.row_ptr.end(), k);
  return static_cast<index_t>(it - adjacency.row_ptr.begin() - 1);
}

InteractionGraph build_graph(const DatasetSplit& split) {
  if (split.train.empty()) throw FormatError("training split is empty");

  InteractionGraph g;
  g.n_users = split.n_users;
  g.n_items = split.n_items;
  g.user_degrees.assign(g.n_users, 0);
  g.item_degrees.assign(g.n_items, 0);
  for (const Interaction& e : split.train) {
    ++g.user_degrees[e.user];
    ++g.item_degrees[e.item];
  }

  // split.train is index-sorted, which is exactly CSR order.
  CsrMatrix& a = g.adjacency;
  a.n_rows = g.n_users;
  a.n_cols = g.n_items;
  a.row_ptr.assign(static_cast<std::size_t>(g.n_users) + 1, 0);
  a.col_idx.reserve(split.train.size());
  a.values.reserve(split.train.size());
  for (const Interaction& e : split.train) {
    ++a.row_ptr[e.user + 1];
    a.col_idx.push_back(e.item);
    a.values.push_back(1.0);
  }
  for (std::size_t i = 1; i < a.row_ptr.size(); ++i) a.row_ptr[i] += a.row_ptr[i - 1];

  g.normalized = a;
  for (index_t u = 0; u < g.n_users; ++u) {
    for (std::uint64_t k = a.row_ptr[u]; k < a.row_ptr[u + 1]; ++k) {
      const index_t i = a.col_idx[k];
      g.normalized.values[k] =
          1.0 / std::sqrt(static_cast<double>(g.user_degrees[u]) *
                          static_cast<double>(g.item_degrees[i]));
    }
  }
  g.normalized_t = g.normalized.transposed();
  return g;
}

SparsityGroups group_users_by_degree(const InteractionGraph& graph, int n_groups) {
  if (n_groups < 2) throw ConfigError("need at least 2 degree groups");
  const std::size_t n_users = graph.user_degrees.size();
  if (n_users < static_cast<std::size_t>(n_groups))
    throw FormatError("fewer users (" + std::to_string(n_users) +
                      ") than degree groups (" + std::to_string(n_groups) + ")");

  std::vector<index_t> order(n_users);
  std::iota(order.begin(), order.end(), index_t{0});
  std::sort(order.begin(), order.end(), [&](index_t a, index_t b) {
    if (graph.user_degrees[a] != graph.user_degrees[b])
      return graph.user_degrees[a] < graph.user_degrees[b];
    return a < b;
  });

  SparsityGroups groups;
  groups.n_groups = n_groups;
  groups.group_of_user.assign(n_users, 0);
  groups.group_user_count.assign(n_groups, 0);
  groups.degree_range.assign(n_groups, {0, 0});

  const std::size_t base = n_users / static_cast<std::size_t>(n_groups);
  const std::size_t remainder = n_users % static_cast<std::size_t>(n_groups);
  std::size_t pos = 0;
  for (int gidx = 0; gidx < n_groups; ++gidx) {
    const std::size_t size = base + (static_cast<std::size_t>(gidx) < remainder ? 1 : 0);
    std::uint32_t lo = 0, hi = 0;
    for (std::size_t k = 0; k < size; ++k, ++pos) {
      const index_t u = order[pos];
      groups.group_of_user[u] = static_cast<index_t>(gidx);
      const std::uint32_t deg = graph.user_degrees[u];
      if (k == 0) lo = deg;
      hi = deg;
    }
    groups.group_user_count[gidx] = static_cast<std::uint32_t>(size);
    groups.degree_range[gidx] = {lo, hi};
  }
  return groups;
}

}  // namespace lfagcl
