#pragma once

// Sweep result persistence: JSON-lines records and the figure CSV emitters.

#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tul/harness.hpp"

namespace tul {

inline void write_records_jsonl(const std::vector<ExperimentRecord>& records,
                                const std::string& path) {
  std::string out;
  for (const ExperimentRecord& r : records) out += r.to_json().dump() + "\n";
  write_file(path, out);
}

inline std::vector<ExperimentRecord> read_records_jsonl(
    const std::string& path) {
  std::vector<ExperimentRecord> out;
  const std::string text = read_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(ExperimentRecord::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("records line " + std::to_string(line_no) + ": " +
                      e.what());
    }
  }
  return out;
}

inline void write_per_class_jsonl(const std::vector<PerClassRow>& rows,
                                  const std::string& path) {
  std::string out;
  for (const PerClassRow& r : rows) {
    nlohmann::json j;
    j["arm"] = to_string(r.arm);
    j["ratio"] = r.ratio;
    j["seed"] = r.seed;
    j["class"] = r.cls;
    j["static_count"] = r.static_count;
    j["recall"] = r.recall ? nlohmann::json(*r.recall) : nlohmann::json(nullptr);
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

inline std::vector<PerClassRow> read_per_class_jsonl(const std::string& path) {
  std::vector<PerClassRow> out;
  const std::string text = read_file(path);
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    PerClassRow r;
    r.arm = arm_from_string(j.at("arm").get<std::string>());
    r.ratio = j.at("ratio").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.cls = j.at("class").get<std::uint32_t>();
    r.static_count = j.at("static_count").get<std::size_t>();
    if (!j.at("recall").is_null()) r.recall = j.at("recall").get<double>();
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace harness_detail {

struct Agg {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

inline Agg aggregate(const std::vector<double>& xs) {
  Agg a;
  a.n = xs.size();
  if (xs.empty()) return a;
  double sum = 0.0;
  for (double x : xs) sum += x;
  a.mean = sum / double(xs.size());
  if (xs.size() > 1) {
    double sq = 0.0;
    for (double x : xs) sq += (x - a.mean) * (x - a.mean);
    a.stddev = std::sqrt(sq / double(xs.size() - 1));
  }
  return a;
}

inline std::string fmt_stat(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return std::string(buf);
}

}  // namespace harness_detail

// Writes fig1.csv .. fig6.csv into outdir (created if missing). Skipped
// cells do not contribute to the aggregates.
inline void emit_figure_csvs(const SweepOutput& output,
                             const std::string& outdir) {
  namespace hd = harness_detail;
  std::filesystem::create_directories(outdir);
  const auto path = [&](const char* name) { return outdir + "/" + name; };

  // fig1: accuracy vs non-static size at ratio 0
  {
    std::map<std::pair<std::size_t, std::string>, std::vector<double>> groups;
    for (const ExperimentRecord& r : output.records)
      if (r.group == "fig1" && !r.skip && r.test_accuracy && r.nonstatic_size)
        groups[{*r.nonstatic_size, to_string(r.arm)}].push_back(
            *r.test_accuracy);
    std::string csv =
        "nonstatic_size,arm,mean_test_accuracy,std_test_accuracy,n_seeds\n";
    for (const auto& [key, accs] : groups) {
      const hd::Agg a = hd::aggregate(accs);
      csv += std::to_string(key.first) + "," + key.second + "," +
             hd::fmt_stat(a.mean) + "," + hd::fmt_stat(a.stddev) + "," +
             std::to_string(a.n) + "\n";
    }
    write_file(path("fig1.csv"), csv);
  }

  // fig2 / fig6: accuracy vs ratio per arm
  const auto ratio_figure = [&](const char* group, const char* file) {
    std::map<std::pair<double, std::string>, std::vector<double>> groups;
    for (const ExperimentRecord& r : output.records)
      if (r.group == group && !r.skip && r.test_accuracy)
        groups[{r.ratio, to_string(r.arm)}].push_back(*r.test_accuracy);
    std::string csv = "ratio,arm,mean_test_accuracy,std_test_accuracy,n_seeds\n";
    for (const auto& [key, accs] : groups) {
      const hd::Agg a = hd::aggregate(accs);
      csv += fmt_g17(key.first) + "," + key.second + "," +
             hd::fmt_stat(a.mean) + "," + hd::fmt_stat(a.stddev) + "," +
             std::to_string(a.n) + "\n";
    }
    write_file(path(file), csv);
  };
  ratio_figure("fig2", "fig2.csv");
  ratio_figure("fig6", "fig6.csv");

  // fig3: accuracy vs M
  {
    std::map<std::tuple<std::uint32_t, double, std::string>,
             std::vector<double>>
        groups;
    for (const ExperimentRecord& r : output.records)
      if (r.group == "fig3" && !r.skip && r.test_accuracy && r.m)
        groups[{*r.m, r.ratio, to_string(r.arm)}].push_back(*r.test_accuracy);
    std::string csv = "m,ratio,arm,mean_test_accuracy,std_test_accuracy,n_seeds\n";
    for (const auto& [key, accs] : groups) {
      const hd::Agg a = hd::aggregate(accs);
      csv += std::to_string(std::get<0>(key)) + "," + fmt_g17(std::get<1>(key)) +
             "," + std::get<2>(key) + "," + hd::fmt_stat(a.mean) + "," +
             hd::fmt_stat(a.stddev) + "," + std::to_string(a.n) + "\n";
    }
    write_file(path("fig3.csv"), csv);
  }

  // fig4 left: per-class recall vs per-class static count
  {
    std::map<std::uint32_t,
             std::pair<std::vector<double>, std::vector<double>>>
        recalls;  // class -> (static_only, selected)
    std::map<std::uint32_t, std::vector<double>> counts;
    for (const PerClassRow& row : output.per_class) {
      if (row.arm == Arm::static_only) {
        counts[row.cls].push_back(double(row.static_count));
        if (row.recall) recalls[row.cls].first.push_back(*row.recall);
      } else if (row.arm == Arm::selected) {
        if (row.recall) recalls[row.cls].second.push_back(*row.recall);
      }
    }
    std::string csv =
        "class,mean_static_count,recall_static_only,recall_selected\n";
    for (const auto& [cls, pair] : recalls) {
      const hd::Agg c = hd::aggregate(counts[cls]);
      const hd::Agg rs = hd::aggregate(pair.first);
      const hd::Agg rsel = hd::aggregate(pair.second);
      csv += std::to_string(cls) + "," + hd::fmt_stat(c.mean) + "," +
             hd::fmt_stat(rs.mean) + "," + hd::fmt_stat(rsel.mean) + "\n";
    }
    write_file(path("fig4_left.csv"), csv);
  }

  // fig4 right: accuracy gain of selection vs domain affinity
  {
    std::map<double, std::vector<double>> gains;       // knob -> per-seed gain
    std::map<double, std::vector<double>> affinities;  // knob -> proxy values
    std::map<std::pair<double, std::uint64_t>, double> sel, stat;
    for (const ExperimentRecord& r : output.records) {
      if (r.group != "fig4r" || r.skip || !r.test_accuracy || !r.affinity_knob)
        continue;
      if (r.arm == Arm::selected) {
        sel[{*r.affinity_knob, r.seed}] = *r.test_accuracy;
        if (r.domain_affinity)
          affinities[*r.affinity_knob].push_back(*r.domain_affinity);
      } else if (r.arm == Arm::static_only) {
        stat[{*r.affinity_knob, r.seed}] = *r.test_accuracy;
      }
    }
    for (const auto& [key, acc] : sel) {
      const auto it = stat.find(key);
      if (it != stat.end()) gains[key.first].push_back(acc - it->second);
    }
    std::string csv =
        "affinity_knob,domain_affinity,mean_gain,std_gain,n_seeds\n";
    for (const auto& [knob, gs] : gains) {
      const hd::Agg g = hd::aggregate(gs);
      const hd::Agg a = hd::aggregate(affinities[knob]);
      csv += fmt_g17(knob) + "," + hd::fmt_stat(a.mean) + "," +
             hd::fmt_stat(g.mean) + "," + hd::fmt_stat(g.stddev) + "," +
             std::to_string(g.n) + "\n";
    }
    write_file(path("fig4_right.csv"), csv);
  }
}

}  // namespace tul
