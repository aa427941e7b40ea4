#pragma once

// SGD-with-momentum training loop: per-epoch seeded shuffling, a one-step
// learning-rate drop, validation-best checkpointing, and optional retention
// of every epoch checkpoint. The same loop drives regular finetuning and the
// ascent-based unlearning runs, so their mechanics match step for step.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "tul/common.hpp"
#include "tul/dataset.hpp"
#include "tul/model.hpp"
#include "tul/rng.hpp"

namespace tul {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int epochs = 100;
  int lr_drop_epoch = 80;     // epochs 1..lr_drop_epoch run at lr
  double lr_drop_factor = 0.1;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    // lr = 0 is allowed (useful as an exact no-op run) even though normal
    // training always uses a positive rate.
    if (!(lr >= 0.0) || !std::isfinite(lr))
      throw DomainError("TrainConfig.lr must be finite and >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw DomainError("TrainConfig.momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0))
      throw DomainError("TrainConfig.weight_decay must be >= 0");
    if (epochs < 1) throw DomainError("TrainConfig.epochs must be >= 1");
    if (lr_drop_epoch < 1 || lr_drop_epoch > epochs)
      throw DomainError("TrainConfig.lr_drop_epoch must lie in [1, epochs]");
    if (!(lr_drop_factor > 0.0 && lr_drop_factor <= 1.0))
      throw DomainError("TrainConfig.lr_drop_factor must lie in (0, 1]");
    if (batch_size < 1) throw DomainError("TrainConfig.batch_size must be >= 1");
  }
};

struct EpochStats {
  int epoch = 0;  // 1-indexed
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ModelParams best_params;
  double best_val_accuracy = 0.0;
  int best_epoch = 0;
  std::vector<EpochStats> history;
  std::vector<ModelParams> epoch_checkpoints;  // filled only when requested
  // Set when the run stopped early because the loss went non-finite and the
  // caller asked for checkpoints to be kept rather than an exception.
  int diverged_at_epoch = 0;
};

// Fraction of examples whose argmax logit matches the label; argmax ties
// break toward the lower class index.
inline double evaluate(const ModelParams& params,
                       const std::vector<Example>& set) {
  if (set.empty()) throw DomainError("evaluate: set must be non-empty");
  std::size_t correct = 0;
  for (const Example& e : set) {
    const ForwardResult r = forward(params, e.features);
    std::size_t best = 0;
    for (std::size_t i = 1; i < r.logits.size(); ++i)
      if (r.logits[i] > r.logits[best]) best = i;
    if (best == e.label) ++correct;
  }
  return double(correct) / double(set.size());
}

namespace detail {

enum class DivergencePolicy { raise, stop_and_keep };

inline bool params_all_finite(const ModelParams& p) {
  for (const DenseLayer& L : p.layers) {
    for (double v : L.weights)
      if (!std::isfinite(v)) return false;
    for (double v : L.bias)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

inline TrainResult run_sgd(const ModelParams& init,
                           const std::vector<Example>& train_set,
                           const std::vector<Example>* val_set,
                           const TrainConfig& cfg, double data_sign,
                           bool retain_epoch_checkpoints,
                           DivergencePolicy on_divergence) {
  cfg.validate();
  if (train_set.empty())
    throw DomainError("train: training set must be non-empty");

  ModelParams params = init;
  Gradients velocity = zero_gradients(params);

  TrainResult result;
  result.best_params = params;
  result.best_val_accuracy = -1.0;
  result.best_epoch = 0;

  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<Example> batch;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const double lr =
        epoch <= cfg.lr_drop_epoch ? cfg.lr : cfg.lr * cfg.lr_drop_factor;

    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(cfg.seed, seed_tag::shuffle, std::uint64_t(epoch)));
    rng.shuffle(order);

    double loss_sum = 0.0;
    int batch_index = 0;
    bool diverged = false;
    for (std::size_t start = 0; start < n;
         start += std::size_t(cfg.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(n, start + std::size_t(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(train_set[order[i]]);

      auto [loss, grads] =
          loss_and_grad_signed(params, batch, cfg.weight_decay, data_sign);
      if (!std::isfinite(loss)) {
        if (on_divergence == DivergencePolicy::raise)
          throw DivergedError(epoch, batch_index);
        result.diverged_at_epoch = epoch;
        diverged = true;
        break;
      }
      loss_sum += loss * double(batch.size());

      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        DenseLayer& P = params.layers[l];
        DenseLayer& V = velocity.layers[l];
        const DenseLayer& G = grads.layers[l];
        for (std::size_t i = 0; i < P.weights.size(); ++i) {
          V.weights[i] = cfg.momentum * V.weights[i] - lr * G.weights[i];
          P.weights[i] += V.weights[i];
        }
        for (std::size_t i = 0; i < P.bias.size(); ++i) {
          V.bias[i] = cfg.momentum * V.bias[i] - lr * G.bias[i];
          P.bias[i] += V.bias[i];
        }
      }
    }
    // A final-batch update can blow up the weights after the last finite
    // loss was observed; catch that before the checkpoint is retained.
    if (!diverged && !params_all_finite(params)) {
      if (on_divergence == DivergencePolicy::raise)
        throw DivergedError(epoch, batch_index - 1);
      result.diverged_at_epoch = epoch;
      diverged = true;
    }
    if (diverged) break;

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / double(n);
    stats.lr = lr;
    if (val_set != nullptr) {
      stats.val_accuracy = evaluate(params, *val_set);
      if (stats.val_accuracy > result.best_val_accuracy) {
        result.best_val_accuracy = stats.val_accuracy;
        result.best_epoch = epoch;
        result.best_params = params;
      }
    }
    result.history.push_back(stats);
    if (retain_epoch_checkpoints) result.epoch_checkpoints.push_back(params);
  }

  if (val_set == nullptr) {
    if (result.diverged_at_epoch > 0)
      result.best_params = result.epoch_checkpoints.empty()
                               ? init
                               : result.epoch_checkpoints.back();
    else
      result.best_params = params;
    result.best_val_accuracy = 0.0;
    result.best_epoch =
        result.history.empty() ? 0 : result.history.back().epoch;
  }
  return result;
}

}  // namespace detail

inline TrainResult train(const ModelParams& init,
                         const std::vector<Example>& train_set,
                         const std::vector<Example>& val_set,
                         const TrainConfig& cfg,
                         bool retain_epoch_checkpoints = false) {
  if (val_set.empty())
    throw DomainError("train: validation set must be non-empty");
  return detail::run_sgd(init, train_set, &val_set, cfg, 1.0,
                         retain_epoch_checkpoints,
                         detail::DivergencePolicy::raise);
}

// Trains a fresh model on the source task. A held-out validation split
// (10%, at least one example) drives checkpoint selection.
inline TrainResult pretrain_source(const MlpSpec& spec, const Dataset& source,
                                   const TrainConfig& cfg) {
  spec.validate();
  source.validate();
  if (spec.input_dim() != source.dim)
    throw DomainError("pretrain_source: spec input dim does not match source");
  if (spec.output_dim() != source.num_classes)
    throw DomainError("pretrain_source: spec output dim does not match source classes");
  if (source.size() < 2)
    throw DomainError("pretrain_source: need at least 2 source examples");

  std::vector<std::size_t> order(source.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(cfg.seed, seed_tag::source_val_split));
  rng.shuffle(order);
  const std::size_t n_val = std::max<std::size_t>(1, source.size() / 10);

  std::vector<Example> val_set, train_set;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val_set : train_set).push_back(source.examples[order[i]]);
  }

  const ModelParams init =
      init_params(spec, derive_seed(cfg.seed, seed_tag::pretrain));
  return train(init, train_set, val_set, cfg);
}

// One JSON object per epoch: {"epoch":..,"train_loss":..,"val_acc":..,"lr":..}
inline void write_history_jsonl(const std::vector<EpochStats>& history,
                                const std::string& path) {
  std::string out;
  for (const EpochStats& s : history) {
    out += "{\"epoch\":" + std::to_string(s.epoch) +
           ",\"train_loss\":" + fmt_g17(s.train_loss) +
           ",\"val_acc\":" + fmt_g17(s.val_accuracy) +
           ",\"lr\":" + fmt_g17(s.lr) + "}\n";
  }
  write_file(path, out);
}

}  // namespace tul
