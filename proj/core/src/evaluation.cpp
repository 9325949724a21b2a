#include "lfagcl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "lfagcl/errors.hpp"
#include "lfagcl/util.hpp"

namespace lfagcl {

RankingResult rank_all_items(const Matrix& user_final, const Matrix& item_final,
                             const InteractionGraph& graph, index_t user, int k,
                             std::span<const index_t> extra_mask,
                             std::span<const index_t> truth) {
  Vector scores = item_final * user_final.row(user).transpose();
  const auto& adj = graph.adjacency;
  for (std::uint64_t e = adj.row_ptr[user]; e < adj.row_ptr[user + 1]; ++e)
    scores[adj.col_idx[e]] = -std::numeric_limits<double>::infinity();
  for (const index_t i : extra_mask)
    scores[i] = -std::numeric_limits<double>::infinity();

  std::vector<index_t> order(graph.n_items);
  std::iota(order.begin(), order.end(), index_t{0});
  const auto better = [&scores](index_t a, index_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  const std::size_t take = std::min<std::size_t>(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                    order.end(), better);
  order.resize(take);
  // Fully masked items never belong in a top list, even when K exceeds the
  // number of scoreable items.
  while (!order.empty() && scores[order.back()] ==
                               -std::numeric_limits<double>::infinity())
    order.pop_back();

  RankingResult result;
  result.user = user;
  result.top_items = std::move(order);
  result.truth.assign(truth.begin(), truth.end());
  return result;
}

double recall_at_k(const RankingResult& result, int k) {
  if (result.truth.empty()) throw FormatError("recall undefined for empty truth");
  std::uint64_t hits = 0;
  const std::size_t depth = std::min<std::size_t>(k, result.top_items.size());
  for (std::size_t n = 0; n < depth; ++n)
    if (std::binary_search(result.truth.begin(), result.truth.end(),
                           result.top_items[n]))
      ++hits;
  return static_cast<double>(hits) / static_cast<double>(result.truth.size());
}

double ndcg_at_k(const RankingResult& result, int k, NdcgMode mode) {
  double gain = 0.0;
  const std::size_t depth = std::min<std::size_t>(k, result.top_items.size());
  for (std::size_t n = 0; n < depth; ++n) {
    if (std::binary_search(result.truth.begin(), result.truth.end(),
                           result.top_items[n]))
      gain += 1.0 / std::log(static_cast<double>(n) + 2.0);
  }
  const std::size_t ideal_depth =
      mode == NdcgMode::literal
          ? static_cast<std::size_t>(k)
          : std::min<std::size_t>(k, result.truth.size());
  double ideal = 0.0;
  for (std::size_t n = 0; n < ideal_depth; ++n)
    ideal += 1.0 / std::log(static_cast<double>(n) + 2.0);
  return ideal > 0 ? gain / ideal : 0.0;
}

MetricReport evaluate(const Matrix& user_final, const Matrix& item_final,
                      const InteractionGraph& graph,
                      std::span<const Interaction> truth_edges,
                      const EvalOptions& options) {
  if (truth_edges.empty()) throw FormatError("evaluation split is empty");

  // Per-user truth and extra-mask lists (inputs are index-sorted).
  std::vector<std::vector<index_t>> truth(graph.n_users);
  for (const Interaction& e : truth_edges) truth[e.user].push_back(e.item);
  std::vector<std::vector<index_t>> extra(graph.n_users);
  for (const Interaction& e : options.extra_mask_edges) extra[e.user].push_back(e.item);

  std::vector<index_t> eval_users;
  for (index_t u = 0; u < graph.n_users; ++u)
    if (!truth[u].empty()) eval_users.push_back(u);

  const int k_max = *std::max_element(options.ks.begin(), options.ks.end());

  // Per-user metric rows, written to disjoint slots so evaluation may run on
  // several threads with schedule-independent results.
  const std::size_t n_eval = eval_users.size();
  std::vector<std::vector<MetricPair>> per_user(n_eval);
  parallel_for(n_eval, options.n_threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t idx = begin; idx < end; ++idx) {
      const index_t u = eval_users[idx];
      const RankingResult ranked = rank_all_items(
          user_final, item_final, graph, u, k_max, extra[u], truth[u]);
      auto& row = per_user[idx];
      row.reserve(options.ks.size());
      for (const int k : options.ks)
        row.push_back({recall_at_k(ranked, k),
                       ndcg_at_k(ranked, k, options.ndcg_mode)});
    }
  });

  MetricReport report;
  report.split = options.split_name;
  report.ks = options.ks;
  report.n_users_evaluated = n_eval;
  report.ndcg_mode = options.ndcg_mode == NdcgMode::literal ? "literal" : "truncated";
  for (const index_t u : eval_users)
    if (graph.user_degrees[u] == 0) ++report.n_cold_start_users;

  for (std::size_t ki = 0; ki < options.ks.size(); ++ki) {
    MetricPair sum;
    for (std::size_t idx = 0; idx < n_eval; ++idx) {
      sum.recall += per_user[idx][ki].recall;
      sum.ndcg += per_user[idx][ki].ndcg;
    }
    report.overall[options.ks[ki]] = {sum.recall / static_cast<double>(n_eval),
                                      sum.ndcg / static_cast<double>(n_eval)};
  }

  if (options.groups != nullptr) {
    const SparsityGroups& groups = *options.groups;
    report.groups.resize(groups.n_groups);
    std::vector<std::uint64_t> counts(groups.n_groups, 0);
    std::vector<std::vector<MetricPair>> sums(
        groups.n_groups, std::vector<MetricPair>(options.ks.size()));
    for (std::size_t idx = 0; idx < n_eval; ++idx) {
      const index_t g = groups.group_of_user[eval_users[idx]];
      ++counts[g];
      for (std::size_t ki = 0; ki < options.ks.size(); ++ki) {
        sums[g][ki].recall += per_user[idx][ki].recall;
        sums[g][ki].ndcg += per_user[idx][ki].ndcg;
      }
    }
    for (int g = 0; g < groups.n_groups; ++g) {
      GroupMetrics& gm = report.groups[g];
      gm.degree_lo = groups.degree_range[g].first;
      gm.degree_hi = groups.degree_range[g].second;
      gm.n_users_evaluated = counts[g];
      for (std::size_t ki = 0; ki < options.ks.size(); ++ki) {
        const double denom = counts[g] > 0 ? static_cast<double>(counts[g]) : 1.0;
        gm.per_k[options.ks[ki]] = {sums[g][ki].recall / denom,
                                    sums[g][ki].ndcg / denom};
      }
    }
  }
  return report;
}

std::string MetricReport::to_text() const {
  std::ostringstream os;
  os << "split " << split << "\n";
  os << "ndcg_mode " << ndcg_mode << "\n";
  os << "users_evaluated " << n_users_evaluated << "\n";
  os << "cold_start_users " << n_cold_start_users << "\n";
  for (const int k : ks) {
    os << "k " << k << "\n";
    os << "recall " << fmt_num(overall.at(k).recall) << "\n";
    os << "ndcg " << fmt_num(overall.at(k).ndcg) << "\n";
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const GroupMetrics& gm = groups[g];
    os << "group " << g << " deg " << gm.degree_lo << " " << gm.degree_hi
       << " users " << gm.n_users_evaluated << "\n";
    for (const int k : ks) {
      os << "k " << k << "\n";
      os << "recall " << fmt_num(gm.per_k.at(k).recall) << "\n";
      os << "ndcg " << fmt_num(gm.per_k.at(k).ndcg) << "\n";
    }
  }
  return os.str();
}

MetricReport MetricReport::from_text(const std::string& text) {
  MetricReport report;
  std::istringstream in(text);
  std::string line;
  std::map<int, MetricPair>* current = &report.overall;
  int current_k = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "split") {
      ls >> report.split;
    } else if (key == "ndcg_mode") {
      ls >> report.ndcg_mode;
    } else if (key == "users_evaluated") {
      ls >> report.n_users_evaluated;
    } else if (key == "cold_start_users") {
      ls >> report.n_cold_start_users;
    } else if (key == "k") {
      ls >> current_k;
      if (current == &report.overall &&
          std::find(report.ks.begin(), report.ks.end(), current_k) == report.ks.end())
        report.ks.push_back(current_k);
    } else if (key == "recall") {
      ls >> (*current)[current_k].recall;
    } else if (key == "ndcg") {
      ls >> (*current)[current_k].ndcg;
    } else if (key == "group") {
      int g;
      std::string word;
      GroupMetrics gm;
      ls >> g >> word >> gm.degree_lo >> gm.degree_hi >> word >> gm.n_users_evaluated;
      report.groups.push_back(gm);
      current = &report.groups.back().per_k;
    } else {
      throw FormatError("unrecognized report line: " + line);
    }
  }
  return report;
}

std::string MetricReport::to_flat_table() const {
  std::ostringstream os;
  os << "group\tdeg_lo\tdeg_hi\tusers";
  for (const int k : ks) os << "\trecall@" << k << "\tndcg@" << k;
  os << "\n";
  os << "overall\t-\t-\t" << n_users_evaluated;
  for (const int k : ks)
    os << "\t" << fmt_num(overall.at(k).recall) << "\t" << fmt_num(overall.at(k).ndcg);
  os << "\n";
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const GroupMetrics& gm = groups[g];
    os << g << "\t" << gm.degree_lo << "\t" << gm.degree_hi << "\t"
       << gm.n_users_evaluated;
    for (const int k : ks)
      os << "\t" << fmt_num(gm.per_k.at(k).recall) << "\t" << fmt_num(gm.per_k.at(k).ndcg);
    os << "\n";
  }
  return os.str();
}

}  // namespace lfagcl
