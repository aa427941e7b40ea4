#pragma once

// Accuracy variants, per-class reporting, the frozen-embedding linear-probe
// domain-affinity proxy, and Pearson correlation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tul/common.hpp"
#include "tul/dataset.hpp"
#include "tul/model.hpp"
#include "tul/rng.hpp"
#include "tul/trainer.hpp"

namespace tul {

struct ClassAccuracyReport {
  struct Row {
    std::uint32_t cls = 0;
    std::size_t static_count = 0;
    std::size_t test_count = 0;
    std::optional<double> recall;  // absent when the class is missing from test
  };
  std::vector<Row> rows;
  double overall = 0.0;
};

namespace detail {

inline std::size_t argmax_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace detail

// Unweighted mean of per-class recalls. Every class of the model must appear
// in the evaluation set.
inline double balanced_accuracy(const ModelParams& params,
                                const std::vector<Example>& set) {
  if (set.empty()) throw DomainError("balanced_accuracy: set must be non-empty");
  const std::size_t c = params.num_classes();
  std::vector<std::size_t> total(c, 0), correct(c, 0);
  for (const Example& e : set) {
    const ForwardResult r = forward(params, e.features);
    ++total[e.label];
    if (detail::argmax_lowest(r.logits) == e.label) ++correct[e.label];
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    if (total[k] == 0)
      throw DomainError("balanced_accuracy: class " + std::to_string(k) +
                        " absent from the evaluation set");
    sum += double(correct[k]) / double(total[k]);
  }
  return sum / double(c);
}

// Per-class recall on the test set, paired with each class's count in the
// static set. Classes absent from the test set get a null recall.
inline ClassAccuracyReport per_class_accuracy(
    const ModelParams& params, const std::vector<Example>& test_set,
    const std::vector<Example>& static_set) {
  if (test_set.empty())
    throw DomainError("per_class_accuracy: test set must be non-empty");
  const std::size_t c = params.num_classes();
  std::vector<std::size_t> total(c, 0), correct(c, 0), in_static(c, 0);
  std::size_t overall_correct = 0;
  for (const Example& e : test_set) {
    const ForwardResult r = forward(params, e.features);
    ++total[e.label];
    if (detail::argmax_lowest(r.logits) == e.label) {
      ++correct[e.label];
      ++overall_correct;
    }
  }
  for (const Example& e : static_set)
    if (e.label < c) ++in_static[e.label];

  ClassAccuracyReport report;
  report.overall = double(overall_correct) / double(test_set.size());
  for (std::size_t k = 0; k < c; ++k) {
    ClassAccuracyReport::Row row;
    row.cls = static_cast<std::uint32_t>(k);
    row.static_count = in_static[k];
    row.test_count = total[k];
    if (total[k] > 0) row.recall = double(correct[k]) / double(total[k]);
    report.rows.push_back(row);
  }
  return report;
}

inline std::string report_to_csv(const ClassAccuracyReport& report) {
  std::string out = "class,static_count,recall\n";
  for (const auto& row : report.rows) {
    out += std::to_string(row.cls) + "," + std::to_string(row.static_count) +
           ",";
    if (row.recall) out += fmt_g17(*row.recall);
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Domain-affinity proxy: test accuracy of a linear softmax probe trained on
// the frozen embeddings of w_src. Training examples are canonicalized to id
// order first, so the score does not depend on input ordering.

namespace detail {

struct ProbeData {
  std::vector<std::vector<double>> features;
  std::vector<std::uint32_t> labels;
};

inline ProbeData embed_examples(const ModelParams& w_src,
                                std::vector<Example> examples) {
  std::sort(examples.begin(), examples.end(),
            [](const Example& a, const Example& b) { return a.id < b.id; });
  ProbeData d;
  d.features.reserve(examples.size());
  d.labels.reserve(examples.size());
  for (const Example& e : examples) {
    d.features.push_back(forward(w_src, e.features).embedding);
    d.labels.push_back(e.label);
  }
  return d;
}

}  // namespace detail

inline double domain_affinity(const ModelParams& w_src,
                              const std::vector<Example>& target_train,
                              const std::vector<Example>& target_test,
                              std::uint32_t target_classes,
                              const TrainConfig& probe_cfg) {
  probe_cfg.validate();
  if (target_train.empty() || target_test.empty())
    throw DomainError("domain_affinity: train and test sets must be non-empty");
  if (target_classes == 0)
    throw DomainError("domain_affinity: class count must be >= 1");

  const detail::ProbeData train = detail::embed_examples(w_src, target_train);
  const detail::ProbeData test = detail::embed_examples(w_src, target_test);
  const std::size_t k = w_src.embedding_dim();
  const std::size_t n = train.features.size();

  // Softmax regression, zero-initialized (the objective is convex), trained
  // with the same SGD conventions as the main loop.
  std::vector<double> w(target_classes * k, 0.0), b(target_classes, 0.0);
  std::vector<double> vw(w.size(), 0.0), vb(b.size(), 0.0);
  std::vector<double> logits(target_classes), probs(target_classes);
  std::vector<double> gw(w.size()), gb(b.size());
  std::vector<std::size_t> order(n);

  auto compute_logits = [&](const std::vector<double>& x) {
    for (std::size_t o = 0; o < target_classes; ++o) {
      double acc = b[o];
      const double* wrow = w.data() + o * k;
      for (std::size_t i = 0; i < k; ++i) acc += wrow[i] * x[i];
      logits[o] = acc;
    }
  };

  for (int epoch = 1; epoch <= probe_cfg.epochs; ++epoch) {
    const double lr = epoch <= probe_cfg.lr_drop_epoch
                          ? probe_cfg.lr
                          : probe_cfg.lr * probe_cfg.lr_drop_factor;
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(probe_cfg.seed, seed_tag::probe, std::uint64_t(epoch)));
    rng.shuffle(order);

    for (std::size_t start = 0; start < n;
         start += std::size_t(probe_cfg.batch_size)) {
      const std::size_t end =
          std::min(n, start + std::size_t(probe_cfg.batch_size));
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const auto& x = train.features[order[i]];
        const std::uint32_t y = train.labels[order[i]];
        compute_logits(x);
        double m = logits[0];
        for (double v : logits) m = std::max(m, v);
        double z = 0.0;
        for (std::size_t o = 0; o < target_classes; ++o) {
          probs[o] = std::exp(logits[o] - m);
          z += probs[o];
        }
        for (std::size_t o = 0; o < target_classes; ++o) {
          const double d = probs[o] / z - (o == y ? 1.0 : 0.0);
          double* grow = gw.data() + o * k;
          for (std::size_t j = 0; j < k; ++j) grow[j] += d * x[j];
          gb[o] += d;
        }
      }
      const double inv = 1.0 / double(end - start);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double g = gw[i] * inv + probe_cfg.weight_decay * w[i];
        vw[i] = probe_cfg.momentum * vw[i] - lr * g;
        w[i] += vw[i];
      }
      for (std::size_t i = 0; i < b.size(); ++i) {
        vb[i] = probe_cfg.momentum * vb[i] - lr * (gb[i] * inv);
        b[i] += vb[i];
      }
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.features.size(); ++i) {
    compute_logits(test.features[i]);
    if (detail::argmax_lowest(logits) == test.labels[i]) ++correct;
  }
  return double(correct) / double(test.features.size());
}

// ---------------------------------------------------------------------------

inline double pearson(const std::vector<double>& xs,
                      const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw DomainError("pearson: need two equal-length series of size >= 2");
  const double n = double(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw DomainError("pearson: constant input series");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace tul
