#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lfagcl/graph.hpp"
#include "lfagcl/types.hpp"

namespace lfagcl {

// Denominator convention for the position-discounted metric: `literal` uses
// the full sum over ranks 1..K; `truncated` caps it at the user's truth size
// (the convention of most external toolkits, kept behind a flag for
// cross-tool comparison).
enum class NdcgMode { literal, truncated };

struct RankingResult {
  index_t user = 0;
  std::vector<index_t> top_items;  // descending score, ascending index on ties
  std::vector<index_t> truth;      // held-out items, ascending
};

// Scores every item for `user` from the final eval-mode representations,
// masks the user's training positives (plus optional extra masks), and
// returns the top K with a deterministic tie-break.
RankingResult rank_all_items(const Matrix& user_final, const Matrix& item_final,
                             const InteractionGraph& graph, index_t user, int k,
                             std::span<const index_t> extra_mask = {},
                             std::span<const index_t> truth = {});

double recall_at_k(const RankingResult& result, int k);

// Single-user position-discounted gain at K; log base cancels between
// numerator and denominator, natural log is used.
double ndcg_at_k(const RankingResult& result, int k,
                 NdcgMode mode = NdcgMode::literal);

struct MetricPair {
  double recall = 0;
  double ndcg = 0;
};

struct GroupMetrics {
  std::uint32_t degree_lo = 0;
  std::uint32_t degree_hi = 0;
  std::uint64_t n_users_evaluated = 0;
  std::map<int, MetricPair> per_k;
};

struct MetricReport {
  std::string split;
  std::vector<int> ks;
  std::map<int, MetricPair> overall;
  std::vector<GroupMetrics> groups;  // empty when no grouping requested
  std::uint64_t n_users_evaluated = 0;
  std::uint64_t n_cold_start_users = 0;  // evaluated users with no train edges
  std::string ndcg_mode = "literal";

  std::string to_text() const;
  static MetricReport from_text(const std::string& text);
  // Flat table for plotting: group, degree range, users, then per-K columns.
  std::string to_flat_table() const;
};

struct EvalOptions {
  std::vector<int> ks = {20, 40};
  NdcgMode ndcg_mode = NdcgMode::literal;
  const SparsityGroups* groups = nullptr;
  // Additional edges to mask during ranking (e.g. validation positives when
  // evaluating the test split).
  std::span<const Interaction> extra_mask_edges = {};
  int n_threads = 1;
  std::string split_name = "test";
};

// All-ranking evaluation over every user with nonempty truth in
// `truth_edges`. Users without truth are skipped (not an error).
MetricReport evaluate(const Matrix& user_final, const Matrix& item_final,
                      const InteractionGraph& graph,
                      std::span<const Interaction> truth_edges,
                      const EvalOptions& options);

}  // namespace lfagcl
