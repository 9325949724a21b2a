#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lfagcl/bundle.hpp"
#include "lfagcl/errors.hpp"
#include "lfagcl/evaluation.hpp"
#include "lfagcl/io_util.hpp"
#include "lfagcl/trainer.hpp"
#include "lfagcl/util.hpp"

namespace lfagcl::cli {

namespace {

std::string require(const std::string& value, const char* what) {
  if (value.empty())
    throw ConfigError(std::string("missing required path: ") + what);
  return value;
}

void note_artifact(const RunConfig& cfg, const std::string& path) {
  if (cfg.verbose)
    std::cout << "wrote " << path << " (fnv1a64 " << std::hex
              << hash_file(path) << std::dec << ")\n";
  else
    std::cout << "wrote " << path << "\n";
}

std::string nan_or(double v) {
  return std::isnan(v) ? std::string("nan") : fmt_num(v);
}

std::string training_log_text(const RunConfig& cfg, const TrainResult& result) {
  std::ostringstream os;
  os << cfg.echo();
  os << "# epoch\tbpr\tcl_user\tcl_item\tl2\ttotal\tval_recall\tval_ndcg\telapsed_ms\n";
  for (const EpochLog& e : result.log) {
    os << e.epoch << "\t" << fmt_num(e.mean_loss.bpr) << "\t"
       << fmt_num(e.mean_loss.cl_user) << "\t" << fmt_num(e.mean_loss.cl_item)
       << "\t" << fmt_num(e.mean_loss.l2) << "\t" << fmt_num(e.mean_loss.total)
       << "\t" << nan_or(e.val_recall) << "\t" << nan_or(e.val_ndcg) << "\t"
       << e.elapsed_ms << "\n";
  }
  return os.str();
}

const char* stop_reason_name(StopReason reason) {
  switch (reason) {
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::early_stop: return "early_stop";
    case StopReason::diverged: return "diverged";
    case StopReason::no_epochs: return "no_epochs";
  }
  return "unknown";
}

LoadedCheckpoint load_model_checked(const RunConfig& cfg, const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  check_checkpoint_dims(ckpt, cfg.embed_dim, cfg.lfa_f);
  return ckpt;
}

MetricReport evaluate_checkpoint(const RunConfig& cfg, const LoadedCheckpoint& ckpt,
                                 const InteractionGraph& graph,
                                 const DatasetSplit& split,
                                 const SparsityGroups* groups,
                                 const std::vector<int>& ks) {
  const ForwardResult fwd = main_channel_forward(
      graph, ckpt.model.emb, cfg.layers, 0.0, Mode::eval, nullptr);
  EvalOptions options;
  options.ks = ks;
  options.ndcg_mode = cfg.ndcg();
  options.groups = groups;
  options.n_threads = cfg.threads;
  options.split_name = cfg.split;
  std::span<const Interaction> truth;
  if (cfg.split == "validation") {
    truth = split.validation;
  } else if (cfg.split == "test") {
    truth = split.test;
    if (cfg.mask_validation_at_test)
      options.extra_mask_edges = split.validation;
  } else {
    throw ConfigError("split must be 'validation' or 'test', got '" + cfg.split + "'");
  }
  return evaluate(fwd.user_final, fwd.item_final, graph, truth, options);
}

}  // namespace

int cmd_prepare(const RunConfig& cfg) {
  const RawInteractions raw = load_interactions(require(cfg.input, "input"),
                                                resolve_delimiter(cfg.delimiter));
  std::cout << "read " << raw.stats.lines_read << " lines, kept "
            << raw.records.size() << " interactions, dropped "
            << raw.stats.duplicates_dropped << " duplicates, skipped "
            << raw.stats.malformed_skipped << " malformed\n";
  const DatasetSplit split = split_dataset(raw, cfg.seed);
  build_graph(split);  // validates shape before anything is written

  const std::string bundle_path = require(cfg.bundle, "bundle");
  write_bundle(bundle_path, split, cfg.echo());
  const std::string stats = stats_summary(split);
  const std::string stats_path =
      cfg.stats.empty() ? bundle_path + ".stats.txt" : cfg.stats;
  write_text_file(stats_path, cfg.echo() + stats);
  std::cout << stats;
  note_artifact(cfg, bundle_path);
  note_artifact(cfg, stats_path);
  return 0;
}

int cmd_pretrain_lfa(const RunConfig& cfg) {
  const LoadedBundle bundle = read_bundle(require(cfg.bundle, "bundle"));
  const LfaTrainResult result =
      train_lfa(bundle.split.train, bundle.split.n_users, bundle.split.n_items,
                cfg.lfa_config(), cfg.threads);
  const std::string out = require(cfg.lfa_checkpoint, "lfa_checkpoint");
  save_factors(out, result.factors, cfg.echo());

  const auto& objective = result.objective_per_iter;
  std::cout << "factorization: " << result.iters_run << " iteration(s), "
            << (result.converged ? "converged" : "max iterations reached") << "\n";
  if (!objective.empty()) {
    std::cout << "objective first " << fmt_num(objective.front()) << " last "
              << fmt_num(objective.back()) << "\n";
  }
  note_artifact(cfg, out);
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const LoadedBundle bundle = read_bundle(require(cfg.bundle, "bundle"));
  const InteractionGraph graph = build_graph(bundle.split);

  LoadedFactors factors;
  try {
    factors = load_factors(require(cfg.lfa_checkpoint, "lfa_checkpoint"));
  } catch (const IoError& err) {
    throw IoError(std::string(err.what()) +
                  "; run the pretrain-lfa command first to produce the factor checkpoint");
  }
  if (factors.factors.f() != cfg.lfa_f)
    throw ConfigError("factor checkpoint has f=" +
                      std::to_string(factors.factors.f()) +
                      " but the run expects lfa_f=" + std::to_string(cfg.lfa_f));

  const TrainResult result = fit(bundle.split, graph, std::move(factors.factors),
                                 cfg.train_config(), cfg.threads);

  const std::string out = require(cfg.checkpoint, "checkpoint");
  save_checkpoint(out, result.model, result.adam, cfg.echo());
  if (!cfg.log.empty()) {
    write_text_file(cfg.log, training_log_text(cfg, result));
    note_artifact(cfg, cfg.log);
  }
  std::cout << "trained " << result.log.size() << " epoch(s), "
            << result.steps_run << " step(s), stop=" << stop_reason_name(result.reason);
  if (result.best_epoch >= 0)
    std::cout << ", best epoch " << result.best_epoch << " (val_recall "
              << fmt_num(result.best_metric) << ")";
  std::cout << "\n";
  note_artifact(cfg, out);
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  const LoadedBundle bundle = read_bundle(require(cfg.bundle, "bundle"));
  const InteractionGraph graph = build_graph(bundle.split);
  const LoadedCheckpoint ckpt = load_model_checked(cfg, require(cfg.checkpoint, "checkpoint"));
  const SparsityGroups groups = group_users_by_degree(graph, cfg.n_groups);
  const MetricReport report =
      evaluate_checkpoint(cfg, ckpt, graph, bundle.split, &groups, cfg.eval_k);

  const std::string report_text = report.to_text();
  std::cout << report_text;
  if (!cfg.report.empty()) {
    write_text_file(cfg.report, cfg.echo() + report_text);
    note_artifact(cfg, cfg.report);
  }
  if (!cfg.table.empty()) {
    write_text_file(cfg.table, cfg.echo() + report.to_flat_table());
    note_artifact(cfg, cfg.table);
  }
  return 0;
}

int cmd_group_analysis(const RunConfig& cfg) {
  const LoadedBundle bundle = read_bundle(require(cfg.bundle, "bundle"));
  const InteractionGraph graph = build_graph(bundle.split);
  const LoadedCheckpoint baseline =
      load_model_checked(cfg, require(cfg.baseline_checkpoint, "baseline_checkpoint"));
  const LoadedCheckpoint model = load_model_checked(cfg, require(cfg.checkpoint, "checkpoint"));
  const SparsityGroups groups = group_users_by_degree(graph, cfg.n_groups);

  const int k = cfg.eval_k.front();
  const MetricReport rep_base =
      evaluate_checkpoint(cfg, baseline, graph, bundle.split, &groups, {k});
  const MetricReport rep_model =
      evaluate_checkpoint(cfg, model, graph, bundle.split, &groups, {k});

  std::ostringstream os;
  os << "group\tdeg_lo\tdeg_hi\tusers\trecall@" << k << "_baseline\trecall@" << k
     << "_model\timprovement\n";
  for (std::size_t g = 0; g < rep_base.groups.size(); ++g) {
    const GroupMetrics& gb = rep_base.groups[g];
    const GroupMetrics& gm = rep_model.groups[g];
    os << g << "\t" << gb.degree_lo << "\t" << gb.degree_hi << "\t"
       << gb.n_users_evaluated << "\t" << fmt_num(gb.per_k.at(k).recall) << "\t"
       << fmt_num(gm.per_k.at(k).recall) << "\t"
       << fmt_num(gm.per_k.at(k).recall - gb.per_k.at(k).recall) << "\n";
  }
  os << "overall\t-\t-\t" << rep_base.n_users_evaluated << "\t"
     << fmt_num(rep_base.overall.at(k).recall) << "\t"
     << fmt_num(rep_model.overall.at(k).recall) << "\t"
     << fmt_num(rep_model.overall.at(k).recall - rep_base.overall.at(k).recall)
     << "\n";

  const std::string text = os.str();
  std::cout << text;
  if (!cfg.table.empty()) {
    write_text_file(cfg.table, cfg.echo() + text);
    note_artifact(cfg, cfg.table);
  }
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  const LoadedBundle bundle = read_bundle(require(cfg.bundle, "bundle"));
  const InteractionGraph graph = build_graph(bundle.split);
  LoadedFactors factors;
  try {
    factors = load_factors(require(cfg.lfa_checkpoint, "lfa_checkpoint"));
  } catch (const IoError& err) {
    throw IoError(std::string(err.what()) +
                  "; run the pretrain-lfa command first (sweep points share one factor checkpoint)");
  }

  std::vector<double> grid;
  if (cfg.axis == "lambda1")
    grid = cfg.lambda1_grid;
  else if (cfg.axis == "tau")
    grid = cfg.tau_grid;
  else if (cfg.axis == "dropout")
    grid = cfg.dropout_grid;
  else
    throw ConfigError("axis must be lambda1, tau, or dropout, got '" + cfg.axis + "'");
  std::sort(grid.begin(), grid.end());

  const std::string out = require(cfg.table, "table");
  std::ofstream table(out, std::ios::binary);
  if (!table) throw IoError("cannot open '" + out + "' for writing");
  table << cfg.echo();
  table << cfg.axis;
  for (const int k : cfg.eval_k) table << "\trecall@" << k << "\tndcg@" << k;
  table << "\n";
  table.flush();

  for (const double value : grid) {
    RunConfig point = cfg;
    point.split = "test";
    if (cfg.axis == "lambda1")
      point.lambda1 = value;
    else if (cfg.axis == "tau")
      point.tau = value;
    else
      point.dropout_rate = value;

    LatentFactors point_factors = factors.factors;  // shared pretraining
    const TrainResult result = fit(bundle.split, graph, std::move(point_factors),
                                   point.train_config(), point.threads);
    LoadedCheckpoint ckpt;
    ckpt.model = result.model;
    const MetricReport report =
        evaluate_checkpoint(point, ckpt, graph, bundle.split, nullptr, point.eval_k);

    table << format_double(value);
    for (const int k : point.eval_k)
      table << "\t" << fmt_num(report.overall.at(k).recall) << "\t"
            << fmt_num(report.overall.at(k).ndcg);
    table << "\n";
    table.flush();  // an interrupted sweep loses at most the current point
    std::cout << cfg.axis << " " << format_double(value) << " done\n";
  }
  note_artifact(cfg, out);
  return 0;
}

}  // namespace lfagcl::cli
