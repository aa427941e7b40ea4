#pragma once

// Synthetic benchmark generator: isotropic Gaussian clusters for a source
// task, a target task, and an auxiliary pool whose overlap with the target is
// controlled by an affinity knob.
//
// Components and labels:
//   - source centers 0..source_classes-1; source examples are labeled by
//     their component.
//   - target centers 0..target_classes-1; target examples likewise.
//   - auxiliary examples are labeled by generative component id:
//     components [0, source_classes) are distractor clusters sharing the
//     source centers; components [source_classes, source_classes +
//     target_classes) sit at the target centers. A fraction `affinity` of the
//     pool is drawn from the target-seated components.
//
// All centers are pairwise at least `cluster_separation` apart.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tul/dataset.hpp"
#include "tul/rng.hpp"

namespace tul {

struct SyntheticSpec {
  std::size_t dim = 32;
  std::uint32_t source_classes = 12;
  std::uint32_t target_classes = 16;
  double cluster_separation = 1.5;
  double affinity = 0.9;  // fraction of aux mass at target centers
  double noise_sigma = 0.3;
  std::size_t n_source = 2000;
  std::size_t n_target_train = 500;
  std::size_t n_target_val = 200;
  std::size_t n_target_test = 1000;
  std::size_t n_aux = 2000;

  void validate() const {
    if (dim == 0) throw DomainError("SyntheticSpec.dim must be positive");
    if (source_classes == 0)
      throw DomainError("SyntheticSpec.source_classes must be positive");
    if (target_classes == 0)
      throw DomainError("SyntheticSpec.target_classes must be positive");
    if (!(cluster_separation > 0.0))
      throw DomainError("SyntheticSpec.cluster_separation must be > 0");
    if (!(affinity >= 0.0 && affinity <= 1.0))
      throw DomainError("SyntheticSpec.affinity must lie in [0, 1]");
    if (!(noise_sigma > 0.0))
      throw DomainError("SyntheticSpec.noise_sigma must be > 0");
    if (n_source == 0) throw DomainError("SyntheticSpec.n_source must be > 0");
    if (n_target_train == 0)
      throw DomainError("SyntheticSpec.n_target_train must be > 0");
    if (n_target_val == 0)
      throw DomainError("SyntheticSpec.n_target_val must be > 0");
    if (n_target_test == 0)
      throw DomainError("SyntheticSpec.n_target_test must be > 0");
    if (n_aux == 0) throw DomainError("SyntheticSpec.n_aux must be > 0");
  }
};

struct SyntheticBundle {
  Dataset source;
  Dataset target_train;
  Dataset target_val;
  Dataset target_test;
  Dataset aux;
  // Generative mixture metadata, retained so callers can evaluate the
  // analytic Bayes rule or trace aux provenance.
  std::vector<std::vector<double>> source_centers;
  std::vector<std::vector<double>> target_centers;
};

namespace detail {

// Rejection-samples `count` centers on the sphere of radius 2 * separation,
// pairwise >= separation apart and pairwise cosine <= 0.3. Equal norms and
// near-orthogonal directions keep cluster embeddings comparable in magnitude
// and distinct in direction, the regime where dot-product ranking is
// informative (real pretrained features behave the same way across unrelated
// classes). The sphere does not grow, so over-packed specs (many classes in
// a low dimension) fail with a GenerationError.
inline std::vector<std::vector<double>> place_centers(std::size_t count,
                                                      std::size_t dim,
                                                      double separation,
                                                      Rng& rng) {
  const double radius = 2.0 * separation;
  const double max_cosine = 0.3;
  const std::size_t max_attempts = 1000 * count;
  std::vector<std::vector<double>> centers;
  centers.reserve(count);
  std::size_t attempts = 0;
  while (centers.size() < count) {
    if (++attempts > max_attempts)
      throw GenerationError(
          "synthetic generation: could not place " + std::to_string(count) +
          " cluster centers at separation " + fmt_g17(separation) + " in " +
          std::to_string(dim) + " dimensions");
    std::vector<double> c(dim);
    double norm2 = 0.0;
    for (double& x : c) {
      x = rng.normal();
      norm2 += x * x;
    }
    if (norm2 == 0.0) continue;
    const double scale = radius / std::sqrt(norm2);
    for (double& x : c) x *= scale;
    bool ok = true;
    for (const auto& other : centers) {
      double d2 = 0.0;
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double diff = c[i] - other[i];
        d2 += diff * diff;
        dot += c[i] * other[i];
      }
      if (d2 < separation * separation ||
          dot > max_cosine * radius * radius) {
        ok = false;
        break;
      }
    }
    if (ok) centers.push_back(std::move(c));
  }
  return centers;
}

inline Example sample_point(std::uint64_t id, const std::vector<double>& center,
                            double sigma, std::uint32_t label, Rng& rng) {
  Example e;
  e.id = id;
  e.label = label;
  e.features.resize(center.size());
  for (std::size_t i = 0; i < center.size(); ++i)
    e.features[i] = center[i] + sigma * rng.normal();
  return e;
}

}  // namespace detail

inline SyntheticBundle generate_synthetic(const SyntheticSpec& spec,
                                          std::uint64_t seed) {
  spec.validate();

  Rng center_rng(derive_seed(seed, seed_tag::centers));
  const std::size_t total_centers = spec.source_classes + spec.target_classes;
  auto centers = detail::place_centers(total_centers, spec.dim,
                                       spec.cluster_separation, center_rng);

  SyntheticBundle b;
  b.source_centers.assign(centers.begin(), centers.begin() + spec.source_classes);
  b.target_centers.assign(centers.begin() + spec.source_classes, centers.end());

  auto fill = [&](Dataset& ds, const std::string& name, std::size_t n,
                  std::uint32_t classes,
                  const std::vector<std::vector<double>>& cs,
                  std::uint64_t tag) {
    ds.name = name;
    ds.dim = spec.dim;
    ds.num_classes = classes;
    ds.examples.reserve(n);
    Rng rng(derive_seed(seed, tag));
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t c = static_cast<std::uint32_t>(i % cs.size());
      ds.examples.push_back(
          detail::sample_point(i, cs[c], spec.noise_sigma, c, rng));
    }
  };

  fill(b.source, "source", spec.n_source, spec.source_classes,
       b.source_centers, seed_tag::source);
  fill(b.target_train, "target_train", spec.n_target_train,
       spec.target_classes, b.target_centers, seed_tag::target_train);
  fill(b.target_val, "target_val", spec.n_target_val, spec.target_classes,
       b.target_centers, seed_tag::target_val);
  fill(b.target_test, "target_test", spec.n_target_test, spec.target_classes,
       b.target_centers, seed_tag::target_test);

  // Auxiliary pool: the first round(affinity * n) examples come from the
  // target-seated components (round-robin over target classes), the rest from
  // the distractor components (round-robin over source classes).
  Dataset& aux = b.aux;
  aux.name = "aux";
  aux.dim = spec.dim;
  aux.num_classes = spec.source_classes + spec.target_classes;
  aux.examples.reserve(spec.n_aux);
  const std::size_t n_adjacent = static_cast<std::size_t>(
      std::floor(spec.affinity * double(spec.n_aux) + 0.5));
  Rng aux_rng(derive_seed(seed, seed_tag::aux));
  for (std::size_t i = 0; i < spec.n_aux; ++i) {
    if (i < n_adjacent) {
      const std::uint32_t c = static_cast<std::uint32_t>(i % spec.target_classes);
      aux.examples.push_back(detail::sample_point(
          i, b.target_centers[c], spec.noise_sigma, spec.source_classes + c,
          aux_rng));
    } else {
      const std::uint32_t c = static_cast<std::uint32_t>(i % spec.source_classes);
      aux.examples.push_back(detail::sample_point(
          i, b.source_centers[c], spec.noise_sigma, c, aux_rng));
    }
  }

  b.source.validate();
  b.target_train.validate();
  b.target_val.validate();
  b.target_test.validate();
  b.aux.validate();
  return b;
}

// True iff the auxiliary example was drawn from the component seated at
// target class `c` (see the aux labeling scheme above).
inline bool aux_from_target_component(const SyntheticSpec& spec,
                                      const Example& aux_example,
                                      std::uint32_t c) {
  return aux_example.label == spec.source_classes + c;
}

}  // namespace tul
