#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfagcl/lfa.hpp"
#include "lfagcl/trainer.hpp"

namespace lfagcl {

// Effective run configuration: flat key=value text on disk, flag overrides
// on top. Unknown keys are rejected. The canonical serialization is echoed
// into every output artifact and reparses to the same configuration.
struct RunConfig {
  // paths
  std::string input;
  std::string bundle;
  std::string lfa_checkpoint;
  std::string checkpoint;
  std::string baseline_checkpoint;
  std::string log;
  std::string report;
  std::string table;
  std::string stats;
  // general
  std::string delimiter = "tab";
  std::uint64_t seed = 1;
  int threads = 1;
  bool verbose = false;
  std::string split = "test";
  // factorization pretraining
  int lfa_f = 5;
  double lfa_lambda = 0.1;
  int lfa_max_iters = 100;
  double lfa_rel_tol = 1e-6;
  double lfa_init_scale = 0.01;
  std::uint64_t lfa_seed = 1;
  std::string lfa_solver = "als";
  double sgd_learning_rate = 0.01;
  // joint training
  double learning_rate = 1e-3;
  int batch_size = 2048;
  int epochs_max = 120;
  double lambda1 = 0.01;
  double lambda2 = 1e-6;
  double tau = 0.5;
  double dropout_rate = 0.1;
  int layers = 2;
  int embed_dim = 32;
  int validate_every = 2;
  int patience = 10;
  std::vector<int> eval_k = {20, 40};
  std::string cl_negatives = "batch";
  // evaluation
  std::string ndcg_mode = "literal";
  bool mask_validation_at_test = false;
  int n_groups = 5;
  // sweeps
  std::string axis = "lambda1";
  std::vector<double> lambda1_grid = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> tau_grid = {0.2, 0.5, 0.8, 1.0, 3.0};
  std::vector<double> dropout_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

  void set(const std::string& key, const std::string& value);
  std::string serialize() const;              // canonical key = value lines
  std::string echo() const;                   // serialize() with "# cfg " prefixes
  void apply_file(const std::string& path);   // throws ConfigError on unknown keys
  void apply_text(const std::string& text);
  void apply_echo(const std::string& echo_text);

  LfaConfig lfa_config() const;
  TrainConfig train_config() const;
  NdcgMode ndcg() const;
};

std::string format_double(double v);  // shortest exact representation
double parse_double(const std::string& s);

}  // namespace lfagcl
