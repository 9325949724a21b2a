#include "lfagcl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "lfagcl/errors.hpp"
#include "lfagcl/io_util.hpp"
#include "lfagcl/util.hpp"

namespace lfagcl {

void TrainConfig::validate() const {
  if (learning_rate < 0 || lambda1 < 0 || lambda2 < 0 || dropout_rate < 0 ||
      dropout_rate >= 1)
    throw ConfigError("rates and coefficients must be nonnegative (dropout < 1)");
  if (tau <= 0) throw ConfigError("tau must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (layers < 1) throw ConfigError("layers must be at least 1");
  if (embed_dim < 1) throw ConfigError("embed_dim must be at least 1");
  if (validate_every < 1) throw ConfigError("validate_every must be at least 1");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (eval_k.empty()) throw ConfigError("eval_k must name at least one cutoff");
  for (const int k : eval_k)
    if (k < 1) throw ConfigError("eval_k entries must be positive");
}

ObjectiveConfig TrainConfig::objective() const {
  ObjectiveConfig cfg;
  cfg.lambda1 = lambda1;
  cfg.lambda2 = lambda2;
  cfg.tau = tau;
  cfg.dropout_rate = dropout_rate;
  cfg.layers = layers;
  cfg.cl_negatives = cl_negatives;
  return cfg;
}

AdamState AdamState::init(const EmbeddingTables& emb) {
  AdamState s;
  s.m_user = Matrix::Zero(emb.user_base.rows(), emb.user_base.cols());
  s.v_user = Matrix::Zero(emb.user_base.rows(), emb.user_base.cols());
  s.m_item = Matrix::Zero(emb.item_base.rows(), emb.item_base.cols());
  s.v_item = Matrix::Zero(emb.item_base.rows(), emb.item_base.cols());
  return s;
}

bool EarlyStopState::observe(double metric, int patience,
                             const EmbeddingTables& model, const AdamState& adam) {
  ++last_validation;
  if (metric > best_metric) {
    best_metric = metric;
    consecutive_drops = 0;
    best_model = model;
    best_adam = adam;
    best_validation = last_validation;
    return false;
  }
  if (metric < best_metric) {
    ++consecutive_drops;
    return consecutive_drops >= patience;
  }
  return false;  // exact tie: neither improves nor resets
}

Minibatch sample_minibatch(const InteractionGraph& graph, int batch_size, Rng& rng) {
  const std::uint64_t n_edges = graph.n_train_edges();
  Minibatch batch;
  batch.triplets.reserve(batch_size);
  for (int b = 0; b < batch_size; ++b) {
    const std::uint64_t k = rng.below(n_edges);
    const index_t user = graph.user_of_edge(k);
    const index_t pos = graph.adjacency.col_idx[k];
    bool found = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const index_t neg = static_cast<index_t>(rng.below(graph.n_items));
      if (!graph.has_train_edge(user, neg)) {
        batch.triplets.push_back({user, pos, neg});
        found = true;
        break;
      }
    }
    if (!found) ++batch.skipped_triplets;
  }
  if (batch.skipped_triplets > 0)
    log_warn("sample_minibatch: skipped " + std::to_string(batch.skipped_triplets) +
             " triplet(s) with no reachable negative");

  batch.users.reserve(batch.triplets.size());
  batch.items.reserve(batch.triplets.size() * 2);
  for (const auto& t : batch.triplets) {
    batch.users.push_back(t.user);
    batch.items.push_back(t.pos_item);
    batch.items.push_back(t.neg_item);
  }
  const auto dedup = [](std::vector<index_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedup(batch.users);
  dedup(batch.items);
  return batch;
}

void adam_update(EmbeddingTables& emb, const GradientTables& grads,
                 AdamState& state, double learning_rate) {
  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  const auto step = [&](Matrix& params, Matrix& m, Matrix& v, const Matrix& g) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    params.array() -=
        learning_rate * (m.array() / bc1) /
        ((v.array() / bc2).sqrt() + state.epsilon);
    if (!params.allFinite()) throw NumericError("non-finite optimizer update");
  };
  step(emb.user_base, state.m_user, state.v_user, grads.user);
  step(emb.item_base, state.m_item, state.v_item, grads.item);
}

namespace {

EmbeddingTables init_embeddings(index_t n_users, index_t n_items, int d, Rng& rng) {
  EmbeddingTables emb;
  emb.user_base.resize(n_users, d);
  emb.item_base.resize(n_items, d);
  const auto fill = [&](Matrix& m) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
  };
  fill(emb.user_base);
  fill(emb.item_base);
  return emb;
}

double validation_recall(const EmbeddingTables& emb, const InteractionGraph& graph,
                         const DatasetSplit& split, const TrainConfig& config,
                         int n_threads, double* ndcg_out) {
  const ForwardResult fwd = main_channel_forward(graph, emb, config.layers,
                                                 0.0, Mode::eval, nullptr);
  EvalOptions options;
  options.ks = {config.eval_k.front()};
  options.split_name = "validation";
  options.n_threads = n_threads;
  const MetricReport report =
      evaluate(fwd.user_final, fwd.item_final, graph, split.validation, options);
  const MetricPair& pair = report.overall.at(config.eval_k.front());
  if (ndcg_out != nullptr) *ndcg_out = pair.ndcg;
  return pair.recall;
}

}  // namespace

TrainResult fit(const DatasetSplit& split, const InteractionGraph& graph,
                LatentFactors factors, const TrainConfig& config, int n_threads,
                const ValidationOverride& validation_override) {
  config.validate();

  TrainResult result;
  Rng init_rng(splitmix64(config.seed));
  Rng sampler_rng(splitmix64(config.seed ^ 0x53414d50ULL));   // sampling stream
  Rng dropout_rng(splitmix64(config.seed ^ 0x44524f50ULL));   // dropout stream

  EmbeddingTables emb =
      init_embeddings(graph.n_users, graph.n_items, config.embed_dim, init_rng);
  AdamState adam = AdamState::init(emb);
  const ObjectiveConfig objective = config.objective();

  if (config.epochs_max <= 0) {
    result.model = {std::move(emb), std::move(factors)};
    result.adam = std::move(adam);
    result.reason = StopReason::no_epochs;
    return result;
  }

  const std::int64_t steps_per_epoch = static_cast<std::int64_t>(
      (split.train.size() + config.batch_size - 1) / config.batch_size);
  EarlyStopState stopper;
  EmbeddingTables last_good = emb;
  AdamState last_good_adam = adam;
  int validations = 0;
  bool diverged = false;

  for (int epoch = 1; epoch <= config.epochs_max && !diverged; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    LossBreakdown mean;
    mean.lambda1 = config.lambda1;
    mean.lambda2 = config.lambda2;
    mean.tau = config.tau;
    last_good = emb;
    last_good_adam = adam;

    for (std::int64_t s = 0; s < steps_per_epoch; ++s) {
      const Minibatch batch =
          sample_minibatch(graph, config.batch_size, sampler_rng);
      result.skipped_triplets += batch.skipped_triplets;
      JointLossResult step;
      try {
        step = joint_loss_and_gradients(graph, factors, emb, batch, objective,
                                        &dropout_rng);
        adam_update(emb, step.grads, adam, config.learning_rate);
      } catch (const NumericError& err) {
        log_warn(std::string("training diverged: ") + err.what());
        diverged = true;
        break;
      }
      ++result.steps_run;
      const double inv = 1.0 / static_cast<double>(steps_per_epoch);
      mean.bpr += step.loss.bpr * inv;
      mean.cl_user += step.loss.cl_user * inv;
      mean.cl_item += step.loss.cl_item * inv;
      mean.l2 += step.loss.l2 * inv;
      mean.total += step.loss.total * inv;
    }
    if (diverged) break;

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_loss = mean;

    bool stop = false;
    if (epoch % config.validate_every == 0) {
      double metric, ndcg = std::numeric_limits<double>::quiet_NaN();
      if (validation_override) {
        metric = validation_override(validations, emb);
      } else {
        metric = validation_recall(emb, graph, split, config, n_threads, &ndcg);
      }
      entry.val_recall = metric;
      entry.val_ndcg = ndcg;
      ++validations;
      if (metric > stopper.best_metric) result.best_epoch = epoch;
      stop = stopper.observe(metric, config.patience, emb, adam);
    }
    entry.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - epoch_start)
                           .count();
    result.log.push_back(entry);
    if (stop) {
      result.reason = StopReason::early_stop;
      break;
    }
  }

  if (diverged) {
    result.reason = StopReason::diverged;
    if (stopper.has_snapshot()) {
      emb = stopper.best_model;
      adam = stopper.best_adam;
    } else {
      emb = last_good;
      adam = last_good_adam;
    }
  } else if (stopper.has_snapshot()) {
    emb = stopper.best_model;
    adam = stopper.best_adam;
  }
  result.best_metric = stopper.best_metric;
  result.model = {std::move(emb), std::move(factors)};
  result.adam = std::move(adam);
  if (result.reason == StopReason::max_epochs && result.log.empty())
    result.reason = StopReason::no_epochs;
  return result;
}

TrainResult fit(const DatasetSplit& split, const InteractionGraph& graph,
                const TrainConfig& config, int n_threads) {
  LfaTrainResult pretrained = train_lfa(split.train, split.n_users,
                                        split.n_items, config.lfa, n_threads);
  return fit(split, graph, std::move(pretrained.factors), config, n_threads);
}

namespace {
constexpr std::uint32_t kCheckpointVersion = 1;
}

void save_checkpoint(const std::string& path, const Model& model,
                     const AdamState& adam, const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  BinaryWriter w(out);
  w.tag("LFGM");
  w.u32(kCheckpointVersion);
  w.u64(model.emb.user_base.rows());
  w.u64(model.emb.item_base.rows());
  w.u64(static_cast<std::uint64_t>(model.emb.d()));
  w.u64(static_cast<std::uint64_t>(model.factors.f()));
  w.u64(fnv1a64(config_echo));

  const auto section = [&](const char (&t)[5], const Matrix& m) {
    w.tag(t);
    w.u64(static_cast<std::uint64_t>(m.size()) * 8);
    w.matrix(m);
  };
  w.tag("CFGT");
  w.u64(config_echo.size());
  w.bytes(config_echo.data(), config_echo.size());
  section("EMBU", model.emb.user_base);
  section("EMBI", model.emb.item_base);
  section("LFAP", model.factors.P);
  section("LFAQ", model.factors.Q);
  w.tag("LFAL");
  w.u64(8);
  w.f64(model.factors.lfa_lambda);
  section("ADMU", adam.m_user);
  section("ADVU", adam.v_user);
  section("ADMI", adam.m_item);
  section("ADVI", adam.v_item);
  w.tag("ADST");
  w.u64(8 + 3 * 8);
  w.u64(static_cast<std::uint64_t>(adam.step_count));
  w.f64(adam.beta1);
  w.f64(adam.beta2);
  w.f64(adam.epsilon);
  w.tag("ENDC");
  w.u64(0);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  BinaryReader r(in, path);
  r.expect_tag("LFGM");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto n_users = static_cast<Eigen::Index>(r.u64());
  const auto n_items = static_cast<Eigen::Index>(r.u64());
  const auto d = static_cast<Eigen::Index>(r.u64());
  const auto f = static_cast<Eigen::Index>(r.u64());

  LoadedCheckpoint ckpt;
  ckpt.config_hash = r.u64();
  ckpt.model.factors.lfa_lambda = 0.0;

  bool done = false;
  while (!done) {
    r.section("section tag");
    const std::string tag = r.tag4();
    r.section(tag);
    const std::uint64_t len = r.u64();
    const auto expect_len = [&](std::uint64_t want) {
      if (len != want)
        throw IoError("section '" + tag + "' has length " + std::to_string(len) +
                      ", expected " + std::to_string(want) + " in '" + path + "'");
    };
    if (tag == "CFGT") {
      ckpt.config_echo.assign(len, '\0');
      if (len > 0) r.bytes(ckpt.config_echo.data(), len);
    } else if (tag == "EMBU") {
      expect_len(static_cast<std::uint64_t>(n_users) * d * 8);
      ckpt.model.emb.user_base = r.matrix(n_users, d);
    } else if (tag == "EMBI") {
      expect_len(static_cast<std::uint64_t>(n_items) * d * 8);
      ckpt.model.emb.item_base = r.matrix(n_items, d);
    } else if (tag == "LFAP") {
      expect_len(static_cast<std::uint64_t>(n_users) * f * 8);
      ckpt.model.factors.P = r.matrix(n_users, f);
    } else if (tag == "LFAQ") {
      expect_len(static_cast<std::uint64_t>(n_items) * f * 8);
      ckpt.model.factors.Q = r.matrix(n_items, f);
    } else if (tag == "LFAL") {
      expect_len(8);
      ckpt.model.factors.lfa_lambda = r.f64();
    } else if (tag == "ADMU") {
      ckpt.adam.m_user = r.matrix(n_users, d);
    } else if (tag == "ADVU") {
      ckpt.adam.v_user = r.matrix(n_users, d);
    } else if (tag == "ADMI") {
      ckpt.adam.m_item = r.matrix(n_items, d);
    } else if (tag == "ADVI") {
      ckpt.adam.v_item = r.matrix(n_items, d);
    } else if (tag == "ADST") {
      expect_len(32);
      ckpt.adam.step_count = static_cast<std::int64_t>(r.u64());
      ckpt.adam.beta1 = r.f64();
      ckpt.adam.beta2 = r.f64();
      ckpt.adam.epsilon = r.f64();
    } else if (tag == "ENDC") {
      done = true;
    } else {
      throw IoError("unknown checkpoint section '" + tag + "' in '" + path + "'");
    }
  }
  if (ckpt.model.emb.user_base.size() == 0 || ckpt.model.emb.item_base.size() == 0 ||
      ckpt.model.factors.P.size() == 0 || ckpt.model.factors.Q.size() == 0)
    throw IoError("checkpoint '" + path + "' is missing required sections");
  return ckpt;
}

void check_checkpoint_dims(const LoadedCheckpoint& ckpt, int embed_dim, int lfa_f) {
  if (ckpt.model.emb.d() != embed_dim)
    throw ConfigError("checkpoint embedding dimension " +
                      std::to_string(ckpt.model.emb.d()) +
                      " does not match configured embed_dim " +
                      std::to_string(embed_dim));
  if (ckpt.model.factors.f() != lfa_f)
    throw ConfigError("checkpoint latent dimension " +
                      std::to_string(ckpt.model.factors.f()) +
                      " does not match configured lfa_f " + std::to_string(lfa_f));
}

}  // namespace lfagcl
