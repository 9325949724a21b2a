#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "commands.hpp"
#include "lfagcl/errors.hpp"

namespace {

using lfagcl::RunConfig;

// The config file must be applied before flag binding so that flags given on
// the command line override file values.
std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc - 1; ++i)
    if (std::string(argv[i]) == "--config") return argv[i + 1];
  return "";
}

void add_lfa_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--lfa-f", cfg.lfa_f, "latent dimension of the factor pair");
  cmd->add_option("--lfa-lambda", cfg.lfa_lambda, "ridge coefficient");
  cmd->add_option("--lfa-max-iters", cfg.lfa_max_iters);
  cmd->add_option("--lfa-rel-tol", cfg.lfa_rel_tol);
  cmd->add_option("--lfa-init-scale", cfg.lfa_init_scale);
  cmd->add_option("--lfa-seed", cfg.lfa_seed);
  cmd->add_option("--lfa-solver", cfg.lfa_solver, "als or sgd");
  cmd->add_option("--sgd-learning-rate", cfg.sgd_learning_rate);
}

void add_train_flags(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--learning-rate", cfg.learning_rate);
  cmd->add_option("--batch-size", cfg.batch_size);
  cmd->add_option("--epochs-max", cfg.epochs_max);
  cmd->add_option("--lambda1", cfg.lambda1, "contrastive loss weight");
  cmd->add_option("--lambda2", cfg.lambda2, "L2 regularization weight");
  cmd->add_option("--tau", cfg.tau, "softmax temperature");
  cmd->add_option("--dropout-rate", cfg.dropout_rate, "edge dropout rate");
  cmd->add_option("--layers", cfg.layers, "convolution layers");
  cmd->add_option("--embed-dim", cfg.embed_dim);
  cmd->add_option("--validate-every", cfg.validate_every);
  cmd->add_option("--patience", cfg.patience);
  cmd->add_option("--eval-k", cfg.eval_k, "ranking cutoffs")->delimiter(',');
  cmd->add_option("--cl-negatives", cfg.cl_negatives, "batch or full");
  add_lfa_flags(cmd, cfg);
}

int run(int argc, char** argv) {
  RunConfig cfg;
  const std::string config_path = find_config_arg(argc, argv);
  if (!config_path.empty()) cfg.apply_file(config_path);

  CLI::App app{"Latent-factor-augmented graph contrastive recommender"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may appear after the subcommand name
  std::string config_dummy;
  app.add_option("--config", config_dummy, "key=value config file (applied first)");
  app.add_option("--seed", cfg.seed, "global seed");
  app.add_option("--threads", cfg.threads, "worker threads for row-parallel stages");
  app.add_flag("--verbose", cfg.verbose, "print artifact hashes");

  CLI::App* prepare = app.add_subcommand(
      "prepare", "ingest raw interactions, split 7:1:2, write the dataset bundle");
  prepare->add_option("--input", cfg.input, "delimited interactions file");
  prepare->add_option("--output", cfg.bundle, "bundle output path");
  prepare->add_option("--stats", cfg.stats, "stats summary path (default <bundle>.stats.txt)");
  prepare->add_option("--delimiter", cfg.delimiter, "tab, comma, space, or a single character");

  CLI::App* pretrain = app.add_subcommand(
      "pretrain-lfa", "fit the factor pair on the training split");
  pretrain->add_option("--bundle", cfg.bundle);
  pretrain->add_option("--output", cfg.lfa_checkpoint, "factor checkpoint path");
  add_lfa_flags(pretrain, cfg);

  CLI::App* train = app.add_subcommand("train", "joint optimization with early stopping");
  train->add_option("--bundle", cfg.bundle);
  train->add_option("--lfa", cfg.lfa_checkpoint, "factor checkpoint from pretrain-lfa");
  train->add_option("--output", cfg.checkpoint, "model checkpoint path");
  train->add_option("--log", cfg.log, "per-epoch training log path");
  add_train_flags(train, cfg);

  CLI::App* evaluate = app.add_subcommand("evaluate", "all-ranking Top-K metrics");
  evaluate->add_option("--bundle", cfg.bundle);
  evaluate->add_option("--model", cfg.checkpoint, "model checkpoint");
  evaluate->add_option("--split", cfg.split, "validation or test");
  evaluate->add_option("--report", cfg.report, "structured report path");
  evaluate->add_option("--table", cfg.table, "flat table path");
  evaluate->add_option("--k", cfg.eval_k, "ranking cutoffs")->delimiter(',');
  evaluate->add_option("--ndcg-mode", cfg.ndcg_mode, "literal or truncated");
  evaluate->add_flag("--mask-validation-at-test", cfg.mask_validation_at_test);
  evaluate->add_option("--groups", cfg.n_groups, "degree group count");
  evaluate->add_option("--embed-dim", cfg.embed_dim);
  evaluate->add_option("--lfa-f", cfg.lfa_f);

  CLI::App* group = app.add_subcommand(
      "group-analysis", "per-degree-group recall for two checkpoints");
  group->add_option("--bundle", cfg.bundle);
  group->add_option("--baseline", cfg.baseline_checkpoint, "baseline checkpoint");
  group->add_option("--model", cfg.checkpoint, "comparison checkpoint");
  group->add_option("--output", cfg.table, "comparison table path");
  group->add_option("--k", cfg.eval_k, "ranking cutoff (first entry used)")->delimiter(',');
  group->add_option("--groups", cfg.n_groups, "degree group count");
  group->add_option("--split", cfg.split, "validation or test");
  group->add_option("--embed-dim", cfg.embed_dim);
  group->add_option("--lfa-f", cfg.lfa_f);

  CLI::App* sweep = app.add_subcommand(
      "sweep", "train one model per grid point and emit a metric table");
  sweep->add_option("--bundle", cfg.bundle);
  sweep->add_option("--lfa", cfg.lfa_checkpoint, "shared factor checkpoint");
  sweep->add_option("--axis", cfg.axis, "lambda1, tau, or dropout");
  sweep->add_option("--output", cfg.table, "sweep table path");
  sweep->add_option("--lambda1-grid", cfg.lambda1_grid)->delimiter(',');
  sweep->add_option("--tau-grid", cfg.tau_grid)->delimiter(',');
  sweep->add_option("--dropout-grid", cfg.dropout_grid)->delimiter(',');
  add_train_flags(sweep, cfg);

  CLI11_PARSE(app, argc, argv);

  if (prepare->parsed()) return lfagcl::cli::cmd_prepare(cfg);
  if (pretrain->parsed()) return lfagcl::cli::cmd_pretrain_lfa(cfg);
  if (train->parsed()) return lfagcl::cli::cmd_train(cfg);
  if (evaluate->parsed()) return lfagcl::cli::cmd_evaluate(cfg);
  if (group->parsed()) return lfagcl::cli::cmd_group_analysis(cfg);
  if (sweep->parsed()) return lfagcl::cli::cmd_sweep(cfg);
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}
