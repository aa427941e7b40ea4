#pragma once

// Single-cell execution: builds the cell's partition, tunes hyperparameters
// on validation accuracy, runs the arm, and fills one ExperimentRecord.
// Included by harness.hpp.

#include "tul/harness.hpp"

namespace tul {
namespace harness_detail {

inline std::uint64_t product_seed(std::uint64_t cfg_hash,
                                  const std::string& key,
                                  std::uint64_t run_seed) {
  return derive_seed(cfg_hash, fnv1a64(key), run_seed);
}

inline std::vector<std::uint32_t> classes_present(
    const std::vector<Example>& examples) {
  std::set<std::uint32_t> s;
  for (const Example& e : examples) s.insert(e.label);
  return std::vector<std::uint32_t>(s.begin(), s.end());
}

inline std::uint32_t m_for_fraction(double fraction, std::size_t pool_size,
                                    std::uint32_t classes) {
  const double m =
      std::floor(fraction * double(pool_size) / double(classes) + 0.5);
  return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(m));
}

// Runs one training per (fraction, lr) candidate and keeps the best
// validation accuracy; ties resolve to the earliest candidate. The train-set
// builder receives the fraction index (or nullopt when the arm does not
// select), so selection work is shared across the lr grid.
struct TunedTraining {
  ModelParams model;
  double val_accuracy = -1.0;
  double lr = 0.0;
  std::optional<double> fraction;
  std::size_t train_size = 0;
  std::optional<std::size_t> selection_size;
};

inline TunedTraining tune_training(
    const ExperimentConfig& cfg, const Context& ctx,
    const std::vector<std::optional<double>>& fractions,
    std::uint64_t train_seed,
    const std::function<std::vector<Example>(std::optional<double>,
                                             std::optional<std::size_t>*)>&
        build_train_set) {
  TunedTraining best;
  for (const auto& fraction : fractions) {
    std::optional<std::size_t> selection_size;
    const std::vector<Example> train_set =
        build_train_set(fraction, &selection_size);
    if (train_set.empty())
      throw DomainError("harness: candidate training set is empty");
    for (double lr : cfg.lr_grid) {
      TrainConfig tc = cfg.train;
      tc.lr = lr;
      tc.seed = train_seed;
      const ModelParams init =
          replace_head(ctx.w_src, ctx.target_classes, tc.seed);
      TrainResult r = train(init, train_set, ctx.val_set, tc);
      if (r.best_val_accuracy > best.val_accuracy) {
        best.val_accuracy = r.best_val_accuracy;
        best.model = std::move(r.best_params);
        best.lr = lr;
        best.fraction = fraction;
        best.train_size = train_set.size();
        best.selection_size = selection_size;
      }
    }
  }
  return best;
}

inline CellResult run_cell_impl(const ExperimentConfig& cfg,
                                ContextCache& cache, const CellSpec& cell) {
  CellResult res;
  ExperimentRecord& rec = res.record;
  const std::uint64_t h = cache.config_hash();
  rec.config_hash = to_hex(h);
  rec.group = cell.group;
  rec.arm = cell.arm;
  rec.ratio = cell.ratio;
  rec.seed = cell.seed;
  rec.nonstatic_size = cell.nonstatic_size;

  const double knob =
      cfg.synthetic
          ? (cell.affinity_knob >= 0.0 ? cell.affinity_knob : cfg.spec.affinity)
          : -1.0;
  if (cfg.synthetic) rec.affinity_knob = knob;

  const auto t0 = std::chrono::steady_clock::now();
  const auto finish = [&]() {
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    return res;
  };

  try {
    const bool needs_static = cell.arm == Arm::static_only ||
                              cell.arm == Arm::neggrad ||
                              cell.arm == Arm::finetune_unlearn;
    if (needs_static && cell.ratio == 0.0) {
      rec.skip = std::string(to_string(cell.arm)) +
                 " requires a non-empty static set (ratio > 0)";
      return finish();
    }

    std::shared_ptr<Context> ctx = cache.get(knob, cell.seed);
    rec.domain_affinity = ctx->affinity_proxy;

    // Working target set. Q1 cells subsample the capped pool; M always
    // derives from the full pool size, so varying the non-static size or the
    // ratio never changes the selection size.
    Dataset target = ctx->target_pool;
    std::string size_tag = "full";
    if (cell.nonstatic_size) {
      const std::size_t want = *cell.nonstatic_size;
      if (want == 0 || want > target.size())
        throw DomainError("harness: nonstatic_size " + std::to_string(want) +
                          " not in [1, " + std::to_string(target.size()) + "]");
      std::vector<std::size_t> order(target.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(cell.seed, seed_tag::subset, want));
      rng.shuffle(order);
      order.resize(want);
      std::sort(order.begin(), order.end());
      std::vector<Example> kept;
      kept.reserve(want);
      for (std::size_t i : order) kept.push_back(target.examples[i]);
      target = redensify(std::move(kept), target.dim, target.num_classes,
                         "target_subset");
      size_tag = "sz" + std::to_string(want);
    }

    const Partition partition =
        partition_target(target, cell.ratio, cell.seed);
    const std::vector<Example> static_set = gather(target, partition.static_ids);
    const std::vector<Example> nonstatic = gather(target, partition.nonstatic_ids);

    if (nonstatic.empty() && (cell.arm == Arm::selected ||
                              cell.arm == Arm::random_control ||
                              cell.arm == Arm::neggrad)) {
      rec.skip = std::string(to_string(cell.arm)) +
                 " requires a non-empty non-static set (ratio < 1)";
      return finish();
    }

    const std::size_t pool_size = ctx->target_pool.size();
    std::vector<std::optional<double>> fractions;
    if (cell.m_override) {
      fractions.push_back(std::nullopt);
    } else {
      for (double f : cfg.selected_fraction) fractions.push_back(f);
    }
    const auto m_of = [&](std::optional<double> fraction) -> std::uint32_t {
      if (cell.m_override) return *cell.m_override;
      return m_for_fraction(*fraction, pool_size, ctx->target_classes);
    };

    std::shared_ptr<const ArmProduct> product;
    const std::string ratio_tag = "r=" + fmt_g17(cell.ratio);
    const std::string m_tag =
        cell.m_override ? "m=" + std::to_string(*cell.m_override) : "tuned";

    const auto tuned_product =
        [&](const std::string& key,
            const std::function<std::vector<Example>(
                std::optional<double>, std::optional<std::size_t>*)>& builder,
            bool selecting) {
          return ctx->product(key, [&]() {
            const std::vector<std::optional<double>> none = {std::nullopt};
            TunedTraining t =
                tune_training(cfg, *ctx, selecting ? fractions : none,
                              product_seed(h, key, cell.seed), builder);
            auto p = std::make_shared<ArmProduct>();
            p->model = std::move(t.model);
            p->val_accuracy = t.val_accuracy;
            p->lr = t.lr;
            p->fraction = t.fraction;
            if (selecting && t.fraction)
              p->m = m_of(t.fraction);
            else if (cell.m_override)
              p->m = *cell.m_override;
            p->train_size = t.train_size;
            p->selection_size = t.selection_size;
            return std::shared_ptr<const ArmProduct>(p);
          });
        };

    switch (cell.arm) {
      case Arm::upper_bound: {
        const std::string key = "upper|" + size_tag;
        product = tuned_product(
            key,
            [&](std::optional<double>, std::optional<std::size_t>*) {
              return target.examples;
            },
            false);
        break;
      }
      case Arm::static_only: {
        const std::string key = "static|" + size_tag + "|" + ratio_tag;
        product = tuned_product(
            key,
            [&](std::optional<double>, std::optional<std::size_t>*) {
              return static_set;
            },
            false);
        break;
      }
      case Arm::selected: {
        const std::string key =
            "selected|" + size_tag + "|" + ratio_tag + "|" + m_tag;
        product = tuned_product(
            key,
            [&](std::optional<double> fraction,
                std::optional<std::size_t>* selection_size) {
              SelectionConfig sc;
              sc.examples_per_class = m_of(fraction);
              const SelectionResult sel =
                  select_auxiliary(ctx->w_src, nonstatic, ctx->aux, sc);
              *selection_size = sel.total_selected();
              std::vector<Example> train_set = static_set;
              std::vector<Example> picked = materialize(sel, ctx->aux);
              train_set.insert(train_set.end(), picked.begin(), picked.end());
              return train_set;
            },
            true);
        break;
      }
      case Arm::random_control: {
        const std::string key =
            "random|" + size_tag + "|" + ratio_tag + "|" + m_tag;
        const std::uint64_t sel_seed = product_seed(h, key, cell.seed);
        product = tuned_product(
            key,
            [&](std::optional<double> fraction,
                std::optional<std::size_t>* selection_size) {
              const SelectionResult sel =
                  select_random(ctx->aux, classes_present(nonstatic),
                                m_of(fraction), sel_seed);
              *selection_size = sel.total_selected();
              std::vector<Example> train_set = static_set;
              std::vector<Example> picked = materialize(sel, ctx->aux);
              train_set.insert(train_set.end(), picked.begin(), picked.end());
              return train_set;
            },
            true);
        break;
      }
      case Arm::neggrad:
      case Arm::finetune_unlearn: {
        const bool is_neggrad = cell.arm == Arm::neggrad;
        const std::string key = (is_neggrad ? "neggrad|" : "finetune|") +
                                size_tag + "|" + ratio_tag;
        product = ctx->product(key, [&]() {
          auto upper = tuned_product(
              "upper|" + size_tag,
              [&](std::optional<double>, std::optional<std::size_t>*) {
                return target.examples;
              },
              false);
          auto statics = tuned_product(
              "static|" + size_tag + "|" + ratio_tag,
              [&](std::optional<double>, std::optional<std::size_t>*) {
                return static_set;
              },
              false);
          const double reference = evaluate(statics->model, nonstatic);

          TrainConfig uc = cfg.train;
          uc.epochs = is_neggrad ? cfg.neggrad_epochs : cfg.finetune_epochs;
          uc.lr_drop_epoch = uc.epochs;
          const double cfg_lr = is_neggrad ? cfg.neggrad_lr : cfg.finetune_lr;
          uc.lr = cfg_lr > 0.0 ? cfg_lr : upper->lr;
          uc.seed = product_seed(h, key, cell.seed);

          const std::vector<ModelParams> checkpoints =
              is_neggrad ? unlearn_neggrad(upper->model, nonstatic, uc)
                         : unlearn_finetune(upper->model, static_set, uc);
          const UnlearnOutcome outcome = select_unlearn_checkpoint(
              checkpoints, nonstatic, reference,
              is_neggrad ? UnlearnMethod::neggrad : UnlearnMethod::finetune);

          auto p = std::make_shared<ArmProduct>();
          p->model = outcome.model;
          p->val_accuracy = evaluate(outcome.model, ctx->val_set);
          p->lr = uc.lr;
          p->train_size =
              is_neggrad ? nonstatic.size() : static_set.size();
          p->selected_epoch = outcome.selected_epoch;
          return std::shared_ptr<const ArmProduct>(p);
        });
        break;
      }
    }

    rec.lr = product->lr;
    rec.fraction = product->fraction;
    rec.m = product->m;
    rec.train_size = product->train_size;
    rec.selection_size = product->selection_size;
    rec.test_accuracy = evaluate(product->model, ctx->test_set);
    try {
      rec.balanced_accuracy = balanced_accuracy(product->model, ctx->test_set);
    } catch (const DomainError&) {
      rec.balanced_accuracy = std::nullopt;  // a class is absent from test
    }

    if (cell.collect_per_class) {
      const ClassAccuracyReport report =
          per_class_accuracy(product->model, ctx->test_set, static_set);
      for (const auto& row : report.rows) {
        PerClassRow out;
        out.arm = cell.arm;
        out.ratio = cell.ratio;
        out.seed = cell.seed;
        out.cls = row.cls;
        out.static_count = row.static_count;
        out.recall = row.recall;
        res.per_class.push_back(out);
      }
    }
  } catch (const std::exception& e) {
    rec.skip = std::string("error: ") + e.what();
  }
  return finish();
}

}  // namespace harness_detail
}  // namespace tul
