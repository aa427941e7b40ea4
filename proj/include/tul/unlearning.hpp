#pragma once

// Unlearning routes.
//
// The amortized route trains only on static data plus selected auxiliary
// replacements, so its unlearner is the identity map and deletion requests
// are serviced for free; retraining with the frozen selection reproduces the
// same checkpoint byte for byte. NegGrad and FineTune are the approximate
// baselines, with checkpoint selection against a static-only reference point.
// A finite-distribution (eps, delta)-closeness checker makes the unlearning
// definition executable on small outcome spaces.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tul/common.hpp"
#include "tul/dataset.hpp"
#include "tul/model.hpp"
#include "tul/selection.hpp"
#include "tul/trainer.hpp"

namespace tul {

struct ForgetRequest {
  std::vector<std::uint64_t> ids;

  // Requests may only name non-static examples.
  void validate(const Partition& partition) const {
    for (std::uint64_t id : ids)
      if (!partition.is_nonstatic(id))
        throw DomainError("ForgetRequest: id " + std::to_string(id) +
                          " is not in the non-static set; deletion of static "
                          "data is a protocol violation");
  }
};

enum class UnlearnMethod { identity, retrain, static_only, neggrad, finetune };

inline const char* to_string(UnlearnMethod m) {
  switch (m) {
    case UnlearnMethod::identity: return "identity";
    case UnlearnMethod::retrain: return "retrain";
    case UnlearnMethod::static_only: return "static_only";
    case UnlearnMethod::neggrad: return "neggrad";
    case UnlearnMethod::finetune: return "finetune";
  }
  return "unknown";
}

struct UnlearnOutcome {
  ModelParams model;
  UnlearnMethod method = UnlearnMethod::identity;
  std::optional<int> selected_epoch;             // approximate methods only
  std::optional<double> nonstatic_accuracy;      // at the selected epoch
  std::vector<double> accuracy_trace;            // per-epoch, when available
};

struct TransferOutcome {
  ModelParams w_tg;
  SelectionResult selection;
  TrainResult train_result;
};

// ---------------------------------------------------------------------------
// Amortized route.

// Selects replacements for the non-static data, then finetunes a head-replaced
// copy of w_src on static + selected only. Non-static examples are used for
// selection and never for training.
inline TransferOutcome transfer_with_selection(
    const ModelParams& w_src, const std::vector<Example>& static_set,
    const std::vector<Example>& nonstatic, const Dataset& aux,
    std::uint32_t target_classes, const SelectionConfig& sel_cfg,
    const TrainConfig& train_cfg, const std::vector<Example>& val_set) {
  if (static_set.empty() && nonstatic.empty())
    throw DomainError(
        "transfer_with_selection: both static and non-static sets are empty");

  TransferOutcome out;
  std::vector<Example> train_set = static_set;
  if (!nonstatic.empty()) {
    out.selection = select_auxiliary(w_src, nonstatic, aux, sel_cfg);
    std::vector<Example> selected = materialize(out.selection, aux);
    train_set.insert(train_set.end(), selected.begin(), selected.end());
  } else {
    out.selection.config = sel_cfg;
  }
  if (train_set.empty())
    throw DomainError("transfer_with_selection: empty training set");

  const ModelParams init = replace_head(w_src, target_classes, train_cfg.seed);
  out.train_result = train(init, train_set, val_set, train_cfg);
  out.w_tg = out.train_result.best_params;
  return out;
}

// U(w, S') = w. Exact for the amortized route because training never touched
// the non-static data.
inline ModelParams identity_unlearn(const ModelParams& w_tg,
                                    const ForgetRequest& request,
                                    const Partition& partition) {
  request.validate(partition);
  return w_tg;
}

// Retraining with the selection frozen to the one computed on the full
// non-static set. The remaining non-static examples are accepted to mirror
// the retraining protocol but are not consumed: the training set is static +
// materialized frozen selection, which makes the result independent of the
// deleted subset by construction.
inline ModelParams exact_retrain(
    const ModelParams& w_src, const std::vector<Example>& static_set,
    [[maybe_unused]] const std::vector<Example>& remaining_nonstatic,
    const Dataset& aux, std::uint32_t target_classes,
    const TrainConfig& train_cfg, const std::vector<Example>& val_set,
    const SelectionResult& frozen_selection) {
  std::vector<Example> train_set = static_set;
  std::vector<Example> selected = materialize(frozen_selection, aux);
  train_set.insert(train_set.end(), selected.begin(), selected.end());
  if (train_set.empty())
    throw DomainError("exact_retrain: empty training set");
  const ModelParams init = replace_head(w_src, target_classes, train_cfg.seed);
  return train(init, train_set, val_set, train_cfg).best_params;
}

// ---------------------------------------------------------------------------
// Baselines.

// Finetunes a head-replaced copy of w_src on the static set only.
inline TrainResult static_only_baseline(const ModelParams& w_src,
                                        const std::vector<Example>& static_set,
                                        std::uint32_t target_classes,
                                        const std::vector<Example>& val_set,
                                        const TrainConfig& train_cfg) {
  if (static_set.empty())
    throw DomainError(
        "static_only_baseline: static set is empty (undefined at ratio 0)");
  const ModelParams init = replace_head(w_src, target_classes, train_cfg.seed);
  return train(init, static_set, val_set, train_cfg);
}

// Gradient ascent on the forget data (weight decay still descends). Returns
// every epoch checkpoint; if the loss diverges the run stops and the
// checkpoints collected so far are returned.
inline std::vector<ModelParams> unlearn_neggrad(
    const ModelParams& w_tg, const std::vector<Example>& nonstatic,
    const TrainConfig& cfg) {
  if (nonstatic.empty())
    throw DomainError("unlearn_neggrad: non-static set is empty");
  TrainResult r = detail::run_sgd(w_tg, nonstatic, nullptr, cfg, -1.0, true,
                                  detail::DivergencePolicy::stop_and_keep);
  return std::move(r.epoch_checkpoints);
}

// Plain descent on the static set, every epoch checkpoint retained. Shares
// the training loop, so it matches trainer.train step for step.
inline std::vector<ModelParams> unlearn_finetune(
    const ModelParams& w_tg, const std::vector<Example>& static_set,
    const TrainConfig& cfg) {
  if (static_set.empty())
    throw DomainError("unlearn_finetune: static set is empty");
  TrainResult r = detail::run_sgd(w_tg, static_set, nullptr, cfg, 1.0, true,
                                  detail::DivergencePolicy::raise);
  return std::move(r.epoch_checkpoints);
}

// Non-static accuracy of a model finetuned exclusively on the static set:
// the proxy for how much a well-unlearned model should still know about the
// forget data.
inline double reference_point(const ModelParams& w_src,
                              const std::vector<Example>& static_set,
                              std::uint32_t target_classes,
                              const std::vector<Example>& val_set,
                              const std::vector<Example>& nonstatic,
                              const TrainConfig& train_cfg) {
  const TrainResult r = static_only_baseline(w_src, static_set, target_classes,
                                             val_set, train_cfg);
  return evaluate(r.best_params, nonstatic);
}

// Index (0-based) of the accuracy closest to the reference; ties go to the
// earliest epoch.
inline std::size_t pick_closest_epoch(const std::vector<double>& accuracies,
                                      double reference) {
  if (accuracies.empty())
    throw DomainError("pick_closest_epoch: empty accuracy trace");
  std::size_t best = 0;
  double best_gap = std::abs(accuracies[0] - reference);
  for (std::size_t i = 1; i < accuracies.size(); ++i) {
    const double gap = std::abs(accuracies[i] - reference);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  return best;
}

inline UnlearnOutcome select_unlearn_checkpoint(
    const std::vector<ModelParams>& checkpoints,
    const std::vector<Example>& nonstatic, double reference,
    UnlearnMethod method) {
  if (checkpoints.empty())
    throw DomainError("select_unlearn_checkpoint: no checkpoints");
  UnlearnOutcome out;
  out.method = method;
  out.accuracy_trace.reserve(checkpoints.size());
  for (const ModelParams& ckpt : checkpoints)
    out.accuracy_trace.push_back(evaluate(ckpt, nonstatic));
  const std::size_t idx = pick_closest_epoch(out.accuracy_trace, reference);
  out.model = checkpoints[idx];
  out.selected_epoch = static_cast<int>(idx) + 1;  // epochs are 1-indexed
  out.nonstatic_accuracy = out.accuracy_trace[idx];
  return out;
}

inline nlohmann::json outcome_to_json(const UnlearnOutcome& outcome,
                                      const std::string& checkpoint_path) {
  nlohmann::json j;
  j["method"] = to_string(outcome.method);
  j["selected_epoch"] = outcome.selected_epoch
                            ? nlohmann::json(*outcome.selected_epoch)
                            : nlohmann::json(nullptr);
  j["nonstatic_accuracy"] = outcome.nonstatic_accuracy
                                ? nlohmann::json(*outcome.nonstatic_accuracy)
                                : nlohmann::json(nullptr);
  j["accuracy_trace"] = outcome.accuracy_trace;
  j["checkpoint"] = checkpoint_path;
  return j;
}

// ---------------------------------------------------------------------------
// (eps, delta)-closeness for finite distributions.

struct FiniteDistribution {
  std::vector<double> probabilities;

  void validate() const {
    if (probabilities.empty())
      throw DomainError("FiniteDistribution: no outcomes");
    double sum = 0.0;
    for (double p : probabilities) {
      if (!(p >= 0.0))
        throw DomainError("FiniteDistribution: negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw DomainError("FiniteDistribution: probabilities sum to " +
                        fmt_g17(sum) + ", not 1");
  }
};

// Smallest delta such that mu(B) <= e^eps nu(B) + delta and symmetrically for
// every event B. Over a finite space the worst event collects exactly the
// outcomes with positive gap, so the maximum is a sum of clipped pointwise
// gaps.
inline double eps_delta_closeness(const FiniteDistribution& mu,
                                  const FiniteDistribution& nu, double eps) {
  mu.validate();
  nu.validate();
  if (mu.probabilities.size() != nu.probabilities.size())
    throw DomainError("eps_delta_closeness: support sizes differ");
  if (!(eps >= 0.0))
    throw DomainError("eps_delta_closeness: eps must be >= 0");

  const double factor = std::exp(eps);
  double forward = 0.0, backward = 0.0;
  for (std::size_t i = 0; i < mu.probabilities.size(); ++i) {
    forward += std::max(mu.probabilities[i] - factor * nu.probabilities[i], 0.0);
    backward += std::max(nu.probabilities[i] - factor * mu.probabilities[i], 0.0);
  }
  return std::max(forward, backward);
}

}  // namespace tul
