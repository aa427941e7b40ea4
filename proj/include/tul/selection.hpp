#pragma once

// Auxiliary data selection: rank the auxiliary pool by average dot-product
// similarity to each target class in the source model's embedding space, take
// the top M per class and relabel them to that class. A uniform-random picker
// with the same output shape serves as the control.
//
// Determinism rules: class members are averaged in ascending id order,
// per-class lists sort by (score desc, aux id asc), and an auxiliary example
// may appear under several classes (the per-class picks form a union of
// relabeled sets).

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tul/common.hpp"
#include "tul/dataset.hpp"
#include "tul/embedding.hpp"
#include "tul/model.hpp"
#include "tul/rng.hpp"

namespace tul {

struct SelectionConfig {
  std::uint32_t examples_per_class = 1;  // M
  bool cosine = false;  // raw dot product by default

  void validate() const {
    if (examples_per_class < 1)
      throw DomainError("SelectionConfig: M must be >= 1");
  }
};

struct SelectionEntry {
  std::uint64_t aux_id = 0;
  double avg_similarity = 0.0;
};

struct SelectionResult {
  SelectionConfig config;
  // Keyed by assigned target class; lists follow the sort invariant above.
  std::map<std::uint32_t, std::vector<SelectionEntry>> per_class;

  std::size_t total_selected() const {
    std::size_t n = 0;
    for (const auto& [c, entries] : per_class) n += entries.size();
    return n;
  }
};

// Row i of the result is the embedding of dataset id i.
inline EmbeddingMatrix embed_all(const ModelParams& params,
                                 const Dataset& dataset) {
  if (dataset.size() > 0 && dataset.dim != params.input_dim())
    throw DomainError("embed_all: dataset dimension " +
                      std::to_string(dataset.dim) + " does not match model input " +
                      std::to_string(params.input_dim()));
  EmbeddingMatrix m;
  m.rows = dataset.size();
  m.cols = params.embedding_dim();
  m.data.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const ForwardResult r = forward(params, dataset.examples[i].features);
    std::copy(r.embedding.begin(), r.embedding.end(), m.row(i));
  }
  return m;
}

namespace detail {

inline double dot(const double* a, const double* b, std::size_t k) {
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += a[i] * b[i];
  return acc;
}

inline std::vector<double> normalized(const std::vector<double>& v) {
  double n2 = 0.0;
  for (double x : v) n2 += x * x;
  if (n2 == 0.0) return v;
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * inv;
  return out;
}

}  // namespace detail

// Entry j = mean over class rows (in the order given) of the dot product with
// aux row j. No normalization.
inline std::vector<double> avg_similarity(
    const EmbeddingMatrix& aux_emb,
    const std::vector<std::vector<double>>& class_rows) {
  if (class_rows.empty())
    throw DomainError("avg_similarity: class has no embedding rows");
  for (const auto& row : class_rows)
    if (row.size() != aux_emb.cols)
      throw DomainError("avg_similarity: embedding dimension mismatch");

  std::vector<double> sims(aux_emb.rows, 0.0);
  for (std::size_t j = 0; j < aux_emb.rows; ++j) {
    double acc = 0.0;
    for (const auto& row : class_rows)
      acc += detail::dot(aux_emb.row(j), row.data(), aux_emb.cols);
    sims[j] = acc / double(class_rows.size());
  }
  return sims;
}

// Top min(M, |aux|) ids by similarity, ties broken by ascending aux id.
inline std::vector<SelectionEntry> select_for_class(
    const Dataset& aux, const std::vector<double>& sims, std::uint32_t M) {
  if (sims.size() != aux.size())
    throw DomainError("select_for_class: similarity vector length " +
                      std::to_string(sims.size()) + " != |aux| = " +
                      std::to_string(aux.size()));
  std::vector<std::uint64_t> ids(aux.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::sort(ids.begin(), ids.end(),
            [&](std::uint64_t a, std::uint64_t b) {
              if (sims[a] != sims[b]) return sims[a] > sims[b];
              return a < b;
            });
  const std::size_t take = std::min<std::size_t>(M, ids.size());
  std::vector<SelectionEntry> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.push_back({ids[i], sims[ids[i]]});
  return out;
}

// The full mechanism: one ranked, relabeled pick list per class present in
// the non-static set. Reads non-static labels only to group by class.
inline SelectionResult select_auxiliary(const ModelParams& w_src,
                                        const std::vector<Example>& nonstatic,
                                        const Dataset& aux,
                                        const SelectionConfig& config) {
  config.validate();
  if (nonstatic.empty())
    throw DomainError("select_auxiliary: non-static set is empty; nothing to replace");
  if (aux.size() == 0)
    throw DomainError("select_auxiliary: auxiliary pool is empty");

  EmbeddingMatrix aux_emb = embed_all(w_src, aux);

  // Group member embeddings by class, ascending id within each class, so the
  // average is independent of input ordering.
  std::map<std::uint32_t, std::vector<std::pair<std::uint64_t, std::vector<double>>>>
      by_class;
  for (const Example& e : nonstatic) {
    ForwardResult r = forward(w_src, e.features);
    by_class[e.label].emplace_back(e.id, std::move(r.embedding));
  }

  if (config.cosine) {
    for (std::size_t j = 0; j < aux_emb.rows; ++j) {
      std::vector<double> row(aux_emb.row(j), aux_emb.row(j) + aux_emb.cols);
      row = detail::normalized(row);
      std::copy(row.begin(), row.end(), aux_emb.row(j));
    }
  }

  SelectionResult result;
  result.config = config;
  for (auto& [label, members] : by_class) {
    std::sort(members.begin(), members.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::vector<double>> rows;
    rows.reserve(members.size());
    for (auto& [id, emb] : members)
      rows.push_back(config.cosine ? detail::normalized(emb) : emb);
    const std::vector<double> sims = avg_similarity(aux_emb, rows);
    result.per_class[label] =
        select_for_class(aux, sims, config.examples_per_class);
  }
  return result;
}

// Control: per class, M distinct auxiliary ids uniformly without
// replacement, relabeled to that class. Scores are set to 0.
inline SelectionResult select_random(const Dataset& aux,
                                     const std::vector<std::uint32_t>& classes,
                                     std::uint32_t M, std::uint64_t seed) {
  if (M < 1) throw DomainError("select_random: M must be >= 1");
  if (M > aux.size())
    throw DomainError("select_random: M = " + std::to_string(M) +
                      " exceeds |aux| = " + std::to_string(aux.size()));
  SelectionResult result;
  result.config.examples_per_class = M;
  for (std::uint32_t c : classes) {
    Rng rng(derive_seed(seed, seed_tag::select_random, c));
    std::vector<std::size_t> picks = rng.sample_indices(aux.size(), M);
    std::sort(picks.begin(), picks.end());  // equal scores sort by id
    std::vector<SelectionEntry> entries;
    entries.reserve(picks.size());
    for (std::size_t p : picks) entries.push_back({std::uint64_t(p), 0.0});
    result.per_class[c] = entries;
  }
  return result;
}

// Turns a selection into training examples: auxiliary features, assigned
// labels, fresh dense ids, ordered class-ascending then list order.
inline std::vector<Example> materialize(const SelectionResult& selection,
                                        const Dataset& aux) {
  std::vector<Example> out;
  out.reserve(selection.total_selected());
  std::uint64_t next_id = 0;
  for (const auto& [label, entries] : selection.per_class) {
    for (const SelectionEntry& entry : entries) {
      if (entry.aux_id >= aux.size())
        throw DataError("materialize: selection references aux id " +
                        std::to_string(entry.aux_id) +
                        " but |aux| = " + std::to_string(aux.size()));
      Example e;
      e.id = next_id++;
      e.features = aux.examples[static_cast<std::size_t>(entry.aux_id)].features;
      e.label = label;
      out.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization.

inline nlohmann::json selection_to_json(const SelectionResult& selection) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [label, list] : selection.per_class)
    for (const SelectionEntry& e : list)
      entries.push_back({{"class", label},
                         {"aux_id", e.aux_id},
                         {"score", e.avg_similarity}});
  return {{"m", selection.config.examples_per_class},
          {"cosine", selection.config.cosine},
          {"entries", entries}};
}

inline SelectionResult selection_from_json(const nlohmann::json& j) {
  SelectionResult s;
  try {
    s.config.examples_per_class = j.at("m").get<std::uint32_t>();
    s.config.cosine = j.at("cosine").get<bool>();
    for (const auto& e : j.at("entries")) {
      s.per_class[e.at("class").get<std::uint32_t>()].push_back(
          {e.at("aux_id").get<std::uint64_t>(),
           e.at("score").get<double>()});
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("selection json: ") + ex.what());
  }
  return s;
}

// Appendix-style human-readable listing of picks per class.
inline std::string selection_to_text(const SelectionResult& selection) {
  std::string out;
  out += "selected auxiliary examples (M = " +
         std::to_string(selection.config.examples_per_class) + ")\n";
  for (const auto& [label, list] : selection.per_class) {
    out += "class " + std::to_string(label) + ":";
    for (const SelectionEntry& e : list)
      out += " " + std::to_string(e.aux_id) + " (" + fmt_g17(e.avg_similarity) + ")";
    out += "\n";
  }
  return out;
}

}  // namespace tul
