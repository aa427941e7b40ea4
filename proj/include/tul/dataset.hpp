#pragma once

// Labeled feature-vector datasets and the static/non-static target split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tul/common.hpp"
#include "tul/rng.hpp"

namespace tul {

struct Example {
  std::uint64_t id = 0;
  std::vector<double> features;
  std::uint32_t label = 0;
};

// Examples are stored in id order; ids are dense 0..n-1.
struct Dataset {
  std::vector<Example> examples;
  std::size_t dim = 0;
  std::uint32_t num_classes = 0;
  std::string name;

  std::size_t size() const noexcept { return examples.size(); }

  void validate() const {
    if (num_classes == 0) throw DataError("dataset " + name + ": C must be positive");
    if (dim == 0) throw DataError("dataset " + name + ": d must be positive");
    for (std::size_t i = 0; i < examples.size(); ++i) {
      const Example& e = examples[i];
      if (e.id != i)
        throw DataError("dataset " + name + ": example at position " +
                        std::to_string(i) + " has id " + std::to_string(e.id) +
                        "; ids must be dense and in order");
      if (e.features.size() != dim)
        throw DataError("dataset " + name + ": example " + std::to_string(i) +
                        " has " + std::to_string(e.features.size()) +
                        " features, expected " + std::to_string(dim));
      if (e.label >= num_classes)
        throw DataError("dataset " + name + ": example " + std::to_string(i) +
                        " has label " + std::to_string(e.label) + " >= C = " +
                        std::to_string(num_classes));
    }
  }
};

// Disjoint static / non-static id sets over one target dataset. Both vectors
// are kept sorted.
struct Partition {
  std::vector<std::uint64_t> static_ids;
  std::vector<std::uint64_t> nonstatic_ids;
  double ratio = 0.0;

  bool is_nonstatic(std::uint64_t id) const {
    return std::binary_search(nonstatic_ids.begin(), nonstatic_ids.end(), id);
  }
};

// |static| = round-half-up(ratio * N); assignment is a uniform random
// shuffle. Deterministic in (dataset size, ratio, seed).
inline Partition partition_target(const Dataset& dataset, double ratio,
                                  std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0))
    throw DomainError("partition_target: ratio must lie in [0, 1], got " +
                      fmt_g17(ratio));
  const std::size_t n = dataset.size();
  const std::size_t k =
      static_cast<std::size_t>(std::floor(ratio * double(n) + 0.5));

  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = i;
  Rng rng(derive_seed(seed, seed_tag::partition));
  rng.shuffle(ids);

  Partition p;
  p.ratio = ratio;
  p.static_ids.assign(ids.begin(), ids.begin() + k);
  p.nonstatic_ids.assign(ids.begin() + k, ids.end());
  std::sort(p.static_ids.begin(), p.static_ids.end());
  std::sort(p.nonstatic_ids.begin(), p.nonstatic_ids.end());
  return p;
}

// Copies the examples with the given ids, in the order the ids are listed.
inline std::vector<Example> gather(const Dataset& dataset,
                                   const std::vector<std::uint64_t>& ids) {
  std::vector<Example> out;
  out.reserve(ids.size());
  for (std::uint64_t id : ids) {
    if (id >= dataset.size())
      throw DataError("gather: id " + std::to_string(id) +
                      " out of range for dataset " + dataset.name);
    out.push_back(dataset.examples[static_cast<std::size_t>(id)]);
  }
  return out;
}

}  // namespace tul
