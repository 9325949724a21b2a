#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "lfagcl/channels.hpp"
#include "lfagcl/evaluation.hpp"
#include "lfagcl/graph.hpp"
#include "lfagcl/lfa.hpp"
#include "lfagcl/objectives.hpp"

namespace lfagcl {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 2048;
  int epochs_max = 120;
  double lambda1 = 0.01;
  double lambda2 = 1e-6;
  double tau = 0.5;
  double dropout_rate = 0.1;
  int layers = 2;
  int embed_dim = 32;
  LfaConfig lfa;
  std::uint64_t seed = 1;
  int validate_every = 2;
  int patience = 10;
  std::vector<int> eval_k = {20, 40};
  ObjectiveConfig::ClNegatives cl_negatives = ObjectiveConfig::ClNegatives::batch;

  void validate() const;  // throws ConfigError on out-of-range values
  ObjectiveConfig objective() const;
};

struct AdamState {
  Matrix m_user, v_user, m_item, v_item;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState init(const EmbeddingTables& emb);
};

// Strict-improvement tracker: a validation value above the best resets the
// drop counter and snapshots the model; a value below the best counts one
// drop; an exact tie does neither.
struct EarlyStopState {
  double best_metric = -1.0;
  int best_validation = -1;  // index of the best validation event
  int last_validation = -1;  // index of the most recent validation event
  int consecutive_drops = 0;
  EmbeddingTables best_model;
  AdamState best_adam;

  // Returns true when training should stop (drops reached patience).
  bool observe(double metric, int patience, const EmbeddingTables& model,
               const AdamState& adam);
  bool has_snapshot() const { return best_validation >= 0; }
};

// Uniformly samples batch_size train edges as (user, positive); negatives
// are rejection-sampled from the non-interacted items of the same user
// (capped at 100 attempts, after which the triplet is skipped and counted).
Minibatch sample_minibatch(const InteractionGraph& graph, int batch_size, Rng& rng);

// Bias-corrected Adam step over both embedding tables; step_count advances
// by exactly one.
void adam_update(EmbeddingTables& emb, const GradientTables& grads,
                 AdamState& state, double learning_rate);

struct Model {
  EmbeddingTables emb;
  LatentFactors factors;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown mean_loss;
  double val_recall = std::numeric_limits<double>::quiet_NaN();
  double val_ndcg = std::numeric_limits<double>::quiet_NaN();
  std::int64_t elapsed_ms = 0;
};

enum class StopReason { max_epochs, early_stop, diverged, no_epochs };

struct TrainResult {
  Model model;  // best-validation snapshot when validation ran, else final
  AdamState adam;
  std::vector<EpochLog> log;
  StopReason reason = StopReason::max_epochs;
  int best_epoch = -1;
  double best_metric = -1.0;
  std::int64_t steps_run = 0;
  std::uint64_t skipped_triplets = 0;
};

// Test seam for the early-stopping protocol: when set, replaces the real
// validation metric (argument is the 0-based validation event index).
using ValidationOverride = std::function<double(int, const EmbeddingTables&)>;

// Joint optimization loop: per epoch ceil(|train| / batch_size) Adam steps,
// validation Recall@eval_k[0] every validate_every epochs, early stopping
// after `patience` strict drops, best-validation snapshot returned. A
// non-finite loss aborts with the last good parameters.
TrainResult fit(const DatasetSplit& split, const InteractionGraph& graph,
                LatentFactors factors, const TrainConfig& config,
                int n_threads = 1,
                const ValidationOverride& validation_override = nullptr);

// Convenience form that runs the factor pretraining from config.lfa first.
TrainResult fit(const DatasetSplit& split, const InteractionGraph& graph,
                const TrainConfig& config, int n_threads = 1);

// Model checkpoint: header (magic "LFGM", version, |U|, |I|, d, f, config
// hash), then tagged sections (config echo, embedding tables, factor pair,
// optimizer moments and step count), closed by an end marker. Round-trips
// bit-exactly.
void save_checkpoint(const std::string& path, const Model& model,
                     const AdamState& adam, const std::string& config_echo);

struct LoadedCheckpoint {
  Model model;
  AdamState adam;
  std::string config_echo;
  std::uint64_t config_hash = 0;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Rejects a checkpoint whose dimensions disagree with the run configuration.
void check_checkpoint_dims(const LoadedCheckpoint& ckpt, int embed_dim, int lfa_f);

}  // namespace lfagcl
