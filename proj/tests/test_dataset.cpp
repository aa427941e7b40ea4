#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "tul/dataset.hpp"
#include "tul/dataset_io.hpp"
#include "tul/embedding.hpp"
#include "tul/synthetic.hpp"

using namespace tul;

namespace {

Dataset tiny_dataset(std::size_t n, std::size_t d, std::uint32_t c,
                     std::uint64_t seed) {
  Dataset ds;
  ds.dim = d;
  ds.num_classes = c;
  ds.name = "tiny";
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Example e;
    e.id = i;
    e.label = static_cast<std::uint32_t>(rng.below(c));
    for (std::size_t j = 0; j < d; ++j) e.features.push_back(rng.uniform(-1, 1));
    ds.examples.push_back(e);
  }
  ds.validate();
  return ds;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double nearest_target_center(const SyntheticBundle& b,
                             const std::vector<double>& x) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : b.target_centers) best = std::min(best, dist(x, c));
  return best;
}

}  // namespace

TEST_CASE("partition boundary ratios") {
  const Dataset ds = tiny_dataset(20, 3, 2, 42);

  const Partition p0 = partition_target(ds, 0.0, 9);
  CHECK(p0.static_ids.empty());
  CHECK(p0.nonstatic_ids.size() == 20);

  const Partition p1 = partition_target(ds, 1.0, 1234);
  CHECK(p1.nonstatic_ids.empty());
  CHECK(p1.static_ids.size() == 20);
}

TEST_CASE("partition N=10 ratio 0.3 seed 7 matches reference shuffle") {
  const Dataset ds = tiny_dataset(10, 2, 2, 1);
  const Partition p = partition_target(ds, 0.3, 7);
  CHECK(p.static_ids.size() == 3);

  // reference: independent Fisher-Yates over the pinned stream
  std::vector<std::uint64_t> ids(10);
  for (std::size_t i = 0; i < 10; ++i) ids[i] = i;
  Rng rng(derive_seed(7, seed_tag::partition));
  for (std::size_t i = ids.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(ids[i - 1], ids[j]);
  }
  std::set<std::uint64_t> expected(ids.begin(), ids.begin() + 3);
  std::set<std::uint64_t> got(p.static_ids.begin(), p.static_ids.end());
  CHECK(expected == got);

  const Partition again = partition_target(ds, 0.3, 7);
  CHECK(again.static_ids == p.static_ids);
  CHECK(again.nonstatic_ids == p.nonstatic_ids);
}

TEST_CASE("partition invariants on randomized trials") {
  Rng rng(777);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.below(40);
    const double ratio = rng.uniform();
    const Dataset ds = tiny_dataset(n, 2, 3, rng.next());
    const Partition p = partition_target(ds, ratio, rng.next());

    CHECK(p.static_ids.size() ==
          std::size_t(std::floor(ratio * double(n) + 0.5)));
    CHECK(p.static_ids.size() + p.nonstatic_ids.size() == n);
    std::set<std::uint64_t> all(p.static_ids.begin(), p.static_ids.end());
    all.insert(p.nonstatic_ids.begin(), p.nonstatic_ids.end());
    CHECK(all.size() == n);  // disjoint and covering
  }
}

TEST_CASE("partition rejects out-of-range ratio") {
  const Dataset ds = tiny_dataset(5, 2, 2, 3);
  CHECK_THROWS_AS(partition_target(ds, -0.1, 0), DomainError);
  CHECK_THROWS_AS(partition_target(ds, 1.1, 0), DomainError);
}

TEST_CASE("synthetic: affinity 0 keeps aux away from target centers") {
  SyntheticSpec spec;
  spec.dim = 16;
  spec.source_classes = 4;
  spec.target_classes = 4;
  spec.cluster_separation = 2.0;
  spec.noise_sigma = 0.04;  // sigma << separation
  spec.affinity = 0.0;
  spec.n_source = 50;
  spec.n_target_train = 50;
  spec.n_target_val = 20;
  spec.n_target_test = 50;
  spec.n_aux = 200;
  const SyntheticBundle b = generate_synthetic(spec, 5);
  for (const Example& e : b.aux.examples)
    CHECK(nearest_target_center(b, e.features) > spec.cluster_separation / 2);
  // native labels are all distractor components
  for (const Example& e : b.aux.examples) CHECK(e.label < spec.source_classes);
}

TEST_CASE("synthetic: affinity 1 with vanishing sigma hugs target centers") {
  SyntheticSpec spec;
  spec.dim = 8;
  spec.source_classes = 3;
  spec.target_classes = 3;
  spec.cluster_separation = 2.0;
  spec.noise_sigma = 1e-9;
  spec.affinity = 1.0;
  spec.n_source = 30;
  spec.n_target_train = 30;
  spec.n_target_val = 10;
  spec.n_target_test = 30;
  spec.n_aux = 60;
  const SyntheticBundle b = generate_synthetic(spec, 11);
  for (const auto& center : b.target_centers) {
    double best = std::numeric_limits<double>::infinity();
    for (const Example& e : b.aux.examples)
      best = std::min(best, dist(e.features, center));
    CHECK(best < 1e-6);
  }
  for (const Example& e : b.aux.examples) CHECK(e.label >= spec.source_classes);
}

TEST_CASE("synthetic: analytic Bayes rule reaches 0.99 on the test split") {
  SyntheticSpec spec;
  spec.dim = 16;
  spec.source_classes = 4;
  spec.target_classes = 4;
  spec.cluster_separation = 8.0;
  spec.noise_sigma = 1.0;
  spec.n_source = 100;
  spec.n_target_train = 100;
  spec.n_target_val = 50;
  spec.n_target_test = 2000;
  spec.n_aux = 100;
  const SyntheticBundle b = generate_synthetic(spec, 3);

  // Bayes rule of the generating mixture: equal priors, isotropic equal
  // variance => nearest target center.
  std::size_t correct = 0;
  for (const Example& e : b.target_test.examples) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < b.target_centers.size(); ++c) {
      const double d = dist(e.features, b.target_centers[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    if (best == e.label) ++correct;
  }
  CHECK(double(correct) / double(spec.n_target_test) >= 0.99);
}

TEST_CASE("synthetic: datasets satisfy invariants for random specs") {
  Rng rng(99);
  for (int t = 0; t < 100; ++t) {
    SyntheticSpec spec;
    spec.dim = 8 + rng.below(25);
    spec.source_classes = 1 + static_cast<std::uint32_t>(rng.below(5));
    spec.target_classes = 1 + static_cast<std::uint32_t>(rng.below(5));
    spec.cluster_separation = rng.uniform(0.5, 3.0);
    spec.noise_sigma = rng.uniform(0.05, 0.5);
    spec.affinity = rng.uniform();
    spec.n_source = 10 + rng.below(40);
    spec.n_target_train = 10 + rng.below(40);
    spec.n_target_val = 5 + rng.below(10);
    spec.n_target_test = 10 + rng.below(20);
    spec.n_aux = 10 + rng.below(50);
    const SyntheticBundle b = generate_synthetic(spec, rng.next());
    // validate() ran inside generate_synthetic; double-check shape wiring
    CHECK(b.source.num_classes == spec.source_classes);
    CHECK(b.aux.num_classes == spec.source_classes + spec.target_classes);
    CHECK(b.target_centers.size() == spec.target_classes);
    CHECK(b.aux.size() == spec.n_aux);
  }
}

TEST_CASE("synthetic: aux-to-target distance shrinks with affinity") {
  SyntheticSpec base;
  base.dim = 12;
  base.source_classes = 3;
  base.target_classes = 3;
  base.cluster_separation = 2.0;
  base.noise_sigma = 0.2;
  base.n_source = 30;
  base.n_target_train = 30;
  base.n_target_val = 10;
  base.n_target_test = 30;
  base.n_aux = 100;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    double mean_low = 0, mean_high = 0;
    {
      SyntheticSpec s = base;
      s.affinity = 0.2;
      const SyntheticBundle b = generate_synthetic(s, seed);
      for (const Example& e : b.aux.examples)
        mean_low += nearest_target_center(b, e.features);
    }
    {
      SyntheticSpec s = base;
      s.affinity = 0.8;
      const SyntheticBundle b = generate_synthetic(s, seed);
      for (const Example& e : b.aux.examples)
        mean_high += nearest_target_center(b, e.features);
    }
    CHECK(mean_high <= mean_low);
  }
}

TEST_CASE("synthetic: infeasible center placement raises") {
  SyntheticSpec spec;
  spec.dim = 1;  // a sphere in one dimension holds two points
  spec.source_classes = 3;
  spec.target_classes = 3;
  spec.cluster_separation = 1.0;
  spec.noise_sigma = 0.1;
  spec.n_source = 10;
  spec.n_target_train = 10;
  spec.n_target_val = 5;
  spec.n_target_test = 10;
  spec.n_aux = 10;
  CHECK_THROWS_AS(generate_synthetic(spec, 1), GenerationError);
}

TEST_CASE("dataset binary round-trip is bit-exact") {
  const Dataset ds = tiny_dataset(3, 4, 2, 8);
  const std::string bytes = serialize_dataset(ds);
  const Dataset back = deserialize_dataset(bytes, ds.name);
  CHECK(serialize_dataset(back) == bytes);
  CHECK(back.size() == 3);
  CHECK(back.examples[2].features == ds.examples[2].features);
}

TEST_CASE("dataset file round-trip and loading") {
  const Dataset ds = tiny_dataset(7, 3, 3, 21);
  const std::string path = "test_ds_roundtrip.tuds";
  save_dataset(ds, path);
  const Dataset back = load_dataset(path);
  CHECK(serialize_dataset(back) == serialize_dataset(ds));
  std::remove(path.c_str());
}

TEST_CASE("truncated dataset file is a parse error, not a crash") {
  const Dataset ds = tiny_dataset(3, 4, 2, 8);
  const std::string bytes = serialize_dataset(ds);
  for (std::size_t cut : {std::size_t(2), std::size_t(10), bytes.size() - 5}) {
    CHECK_THROWS_AS(deserialize_dataset(bytes.substr(0, cut), "t"), ParseError);
  }
}

TEST_CASE("dimension mismatch names the offending record") {
  // header claims d = 4 but the single record carries only 3 floats
  ByteWriter w;
  w.magic("TUDS");
  w.u32(1);  // version
  w.u32(1);  // n
  w.u32(4);  // d
  w.u32(1);  // C
  w.u64(0);  // id
  w.u32(0);  // label
  w.f64(0.5);
  w.f64(1.5);
  w.f64(2.5);  // missing feature 3
  try {
    deserialize_dataset(w.str(), "corrupt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("record 0") != std::string::npos);
    CHECK(msg.find("at byte") != std::string::npos);
  }
}

TEST_CASE("out-of-range label is rejected with its record index") {
  ByteWriter w;
  w.magic("TUDS");
  w.u32(1);
  w.u32(1);
  w.u32(1);
  w.u32(2);  // C = 2
  w.u64(0);
  w.u32(5);  // label 5 >= 2
  w.f64(0.0);
  try {
    deserialize_dataset(w.str(), "badlabel");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("label 5") != std::string::npos);
  }
}

TEST_CASE("csv import") {
  const std::string csv =
      "id,label,f0,f1\n"
      "0,1,0.5,-1.25\n"
      "1,0,3,4\n"
      "2,2,-0.5,0\n";
  const Dataset ds = import_csv(csv, "csvset");
  CHECK(ds.size() == 3);
  CHECK(ds.dim == 2);
  CHECK(ds.num_classes == 3);  // inferred max label + 1
  CHECK(ds.examples[0].features[1] == -1.25);

  CHECK_THROWS_AS(import_csv("id,f0\n0,1\n", "bad"), DataError);
  CHECK_THROWS_AS(import_csv("id,label,f0\n0,0\n", "short"), DataError);
  CHECK_THROWS_AS(import_csv("id,label,f0\n0,0,abc\n", "nonnum"), DataError);
}

TEST_CASE("embedding matrix file round-trip") {
  EmbeddingMatrix m;
  m.rows = 3;
  m.cols = 2;
  m.data = {0.0, 1.5, -2.25, 3.0, 4.5, -6.75};
  const std::string bytes = serialize_embeddings(m);
  const EmbeddingMatrix back = deserialize_embeddings(bytes);
  CHECK(serialize_embeddings(back) == bytes);
  CHECK(back.row(1)[0] == -2.25);
  CHECK_THROWS_AS(deserialize_embeddings(bytes.substr(0, bytes.size() - 3)),
                  ParseError);
}
