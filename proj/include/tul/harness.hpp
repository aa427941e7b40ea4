#pragma once

// Experiment harness: enumerates sweep cells over arms, static ratios,
// selection sizes, auxiliary affinities and seeds; runs each cell through the
// full pipeline with per-cell learning-rate tuning; and aggregates records
// into the figure CSVs.
//
// Determinism: every cell derives its RNG streams from (config hash, product
// key, seed) only, heavy sub-results are memoized behind promise/future
// caches, and records land in enumeration order, so serial and parallel
// sweeps emit identical bytes (wall-clock fields aside).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tul/common.hpp"
#include "tul/dataset.hpp"
#include "tul/dataset_io.hpp"
#include "tul/metrics.hpp"
#include "tul/model.hpp"
#include "tul/selection.hpp"
#include "tul/synthetic.hpp"
#include "tul/trainer.hpp"
#include "tul/unlearning.hpp"

namespace tul {

enum class Arm {
  selected,
  random_control,
  static_only,
  upper_bound,
  neggrad,
  finetune_unlearn,
};

inline const char* to_string(Arm arm) {
  switch (arm) {
    case Arm::selected: return "selected";
    case Arm::random_control: return "random_control";
    case Arm::static_only: return "static_only";
    case Arm::upper_bound: return "upper_bound";
    case Arm::neggrad: return "neggrad";
    case Arm::finetune_unlearn: return "finetune_unlearn";
  }
  return "unknown";
}

inline Arm arm_from_string(const std::string& s) {
  if (s == "selected") return Arm::selected;
  if (s == "random_control") return Arm::random_control;
  if (s == "static_only") return Arm::static_only;
  if (s == "upper_bound") return Arm::upper_bound;
  if (s == "neggrad") return Arm::neggrad;
  if (s == "finetune_unlearn") return Arm::finetune_unlearn;
  throw DomainError("unknown arm '" + s + "'");
}

// ---------------------------------------------------------------------------
// Key = value configuration files with [section] headers.

struct IniFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static IniFile parse(const std::string& text) {
    IniFile ini;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t eol = text.find('\n', pos);
      std::string line = text.substr(
          pos, eol == std::string::npos ? std::string::npos : eol - pos);
      pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
      ++line_no;

      const auto comment = line.find_first_of("#;");
      if (comment != std::string::npos) line = line.substr(0, comment);
      const auto strip = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      line = strip(line);
      if (line.empty()) continue;

      if (line.front() == '[') {
        if (line.back() != ']')
          throw DomainError("config line " + std::to_string(line_no) +
                            ": unterminated section header");
        section = strip(line.substr(1, line.size() - 2));
        ini.sections[section];
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw DomainError("config line " + std::to_string(line_no) +
                          ": expected key = value");
      const std::string key = strip(line.substr(0, eq));
      const std::string value = strip(line.substr(eq + 1));
      if (key.empty())
        throw DomainError("config line " + std::to_string(line_no) +
                          ": empty key");
      ini.sections[section][key] = value;
    }
    return ini;
  }

  static IniFile parse_file(const std::string& path) {
    return parse(read_file(path));
  }

  bool has(const std::string& section, const std::string& key) const {
    const auto s = sections.find(section);
    return s != sections.end() && s->second.count(key) > 0;
  }

  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const {
    const auto s = sections.find(section);
    if (s == sections.end()) return fallback;
    const auto k = s->second.find(key);
    return k == s->second.end() ? fallback : k->second;
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key, "");
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return d;
    } catch (const std::exception&) {
      throw DomainError("config " + section + "." + key +
                        ": not a number: '" + v + "'");
    }
  }

  long get_int(const std::string& section, const std::string& key,
               long fallback) const {
    const double d = get_double(section, key, double(fallback));
    const long v = static_cast<long>(d);
    if (double(v) != d)
      throw DomainError("config " + section + "." + key + ": not an integer");
    return v;
  }

  std::vector<std::string> get_list(const std::string& section,
                                    const std::string& key,
                                    const std::vector<std::string>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::string> out;
    std::string cur;
    const std::string v = get(section, key, "");
    for (char ch : v) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    out.push_back(cur);
    for (std::string& s : out) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      s = a == std::string::npos ? "" : s.substr(a, b - a + 1);
    }
    out.erase(std::remove(out.begin(), out.end(), std::string()), out.end());
    return out;
  }

  std::vector<double> get_doubles(const std::string& section,
                                  const std::string& key,
                                  const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    for (const std::string& s : get_list(section, key, {})) {
      try {
        out.push_back(std::stod(s));
      } catch (const std::exception&) {
        throw DomainError("config " + section + "." + key +
                          ": bad number '" + s + "'");
      }
    }
    if (out.empty())
      throw DomainError("config " + section + "." + key + ": empty list");
    return out;
  }
};

// ---------------------------------------------------------------------------

struct FilePaths {
  std::string model;         // pretrained source checkpoint (.tuck)
  std::string target_train;  // .tuds
  std::string target_val;    // optional
  std::string target_test;
  std::string aux;
};

struct ExperimentConfig {
  // data source: exactly one of the two is active
  bool synthetic = true;
  SyntheticSpec spec;
  FilePaths files;

  std::vector<std::size_t> hidden_dims = {64};

  TrainConfig train;     // epochs/momentum/decay defaults per TrainConfig
  TrainConfig pretrain;  // source model training
  TrainConfig probe;     // domain-affinity linear probe

  std::vector<double> ratios = {0.0, 0.05, 0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<double> lr_grid = {0.001, 0.005, 0.01, 0.05, 0.1};
  std::vector<double> selected_fraction = {0.10, 0.20};
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::size_t target_train_cap = 1000;
  std::vector<Arm> arms = {Arm::selected,    Arm::random_control,
                           Arm::static_only, Arm::upper_bound,
                           Arm::neggrad,     Arm::finetune_unlearn};

  std::vector<std::uint32_t> m_values = {1, 5, 20, 50};
  std::vector<double> affinities = {0.0, 0.3, 0.6, 0.9};
  std::vector<std::size_t> nonstatic_sizes = {50, 100, 200, 400};
  double fig3_ratio = 0.3;
  double fig4_ratio = 0.3;
  double affinity_ratio = 0.05;

  int neggrad_epochs = 30;
  int finetune_epochs = 30;
  double neggrad_lr = 0.0;   // 0 = reuse the tuned training lr
  double finetune_lr = 0.0;

  int threads = 2;

  void validate() const {
    if (synthetic) spec.validate();
    for (double r : ratios)
      if (!(r >= 0.0 && r <= 1.0))
        throw DomainError("ExperimentConfig: ratio " + fmt_g17(r) +
                          " outside [0, 1]");
    if (lr_grid.empty()) throw DomainError("ExperimentConfig: empty lr grid");
    if (selected_fraction.empty())
      throw DomainError("ExperimentConfig: empty selected_fraction");
    if (seeds.empty()) throw DomainError("ExperimentConfig: no seeds");
    if (arms.empty()) throw DomainError("ExperimentConfig: no arms");
    if (hidden_dims.empty())
      throw DomainError("ExperimentConfig: no hidden dims");
    train.validate();
    pretrain.validate();
    probe.validate();
    if (neggrad_epochs < 1 || finetune_epochs < 1)
      throw DomainError("ExperimentConfig: unlearn epochs must be >= 1");
    if (threads < 1) throw DomainError("ExperimentConfig: threads must be >= 1");
  }

  bool has_arm(Arm a) const {
    return std::find(arms.begin(), arms.end(), a) != arms.end();
  }

  static TrainConfig train_section(const IniFile& ini, const std::string& sec,
                                   TrainConfig base) {
    base.lr = ini.get_double(sec, "lr", base.lr);
    base.momentum = ini.get_double(sec, "momentum", base.momentum);
    base.weight_decay = ini.get_double(sec, "weight_decay", base.weight_decay);
    base.epochs = static_cast<int>(ini.get_int(sec, "epochs", base.epochs));
    base.lr_drop_epoch = static_cast<int>(
        ini.get_int(sec, "lr_drop_epoch", std::min(base.lr_drop_epoch, base.epochs)));
    base.lr_drop_factor =
        ini.get_double(sec, "lr_drop_factor", base.lr_drop_factor);
    base.batch_size =
        static_cast<int>(ini.get_int(sec, "batch_size", base.batch_size));
    return base;
  }

  static ExperimentConfig from_ini(const IniFile& ini) {
    ExperimentConfig cfg;
    const std::string kind = ini.get("data", "kind", "synthetic");
    if (kind == "synthetic") {
      cfg.synthetic = true;
      SyntheticSpec& s = cfg.spec;
      s.dim = static_cast<std::size_t>(ini.get_int("data", "dim", long(s.dim)));
      s.source_classes = static_cast<std::uint32_t>(
          ini.get_int("data", "source_classes", s.source_classes));
      s.target_classes = static_cast<std::uint32_t>(
          ini.get_int("data", "target_classes", s.target_classes));
      s.cluster_separation =
          ini.get_double("data", "cluster_separation", s.cluster_separation);
      s.affinity = ini.get_double("data", "affinity", s.affinity);
      s.noise_sigma = ini.get_double("data", "noise_sigma", s.noise_sigma);
      s.n_source = static_cast<std::size_t>(
          ini.get_int("data", "n_source", long(s.n_source)));
      s.n_target_train = static_cast<std::size_t>(
          ini.get_int("data", "n_target_train", long(s.n_target_train)));
      s.n_target_val = static_cast<std::size_t>(
          ini.get_int("data", "n_target_val", long(s.n_target_val)));
      s.n_target_test = static_cast<std::size_t>(
          ini.get_int("data", "n_target_test", long(s.n_target_test)));
      s.n_aux =
          static_cast<std::size_t>(ini.get_int("data", "n_aux", long(s.n_aux)));
    } else if (kind == "files") {
      cfg.synthetic = false;
      cfg.files.model = ini.get("data", "model", "");
      cfg.files.target_train = ini.get("data", "target_train", "");
      cfg.files.target_val = ini.get("data", "target_val", "");
      cfg.files.target_test = ini.get("data", "target_test", "");
      cfg.files.aux = ini.get("data", "aux", "");
      if (cfg.files.model.empty() || cfg.files.target_train.empty() ||
          cfg.files.target_test.empty() || cfg.files.aux.empty())
        throw DomainError(
            "config data: files mode needs model, target_train, target_test, aux");
    } else {
      throw DomainError("config data.kind must be 'synthetic' or 'files'");
    }

    if (ini.has("model", "hidden")) {
      cfg.hidden_dims.clear();
      for (double d : ini.get_doubles("model", "hidden", {}))
        cfg.hidden_dims.push_back(static_cast<std::size_t>(d));
    }

    cfg.train = train_section(ini, "train", TrainConfig{});
    TrainConfig pre;
    pre.epochs = 40;
    pre.lr_drop_epoch = 30;
    cfg.pretrain = train_section(ini, "pretrain", pre);
    TrainConfig probe;
    probe.lr = 0.05;
    probe.epochs = 40;
    probe.lr_drop_epoch = 30;
    cfg.probe = train_section(ini, "probe", probe);

    cfg.ratios = ini.get_doubles("sweep", "ratios", cfg.ratios);
    cfg.lr_grid = ini.get_doubles("sweep", "lr_grid", cfg.lr_grid);
    cfg.selected_fraction =
        ini.get_doubles("sweep", "selected_fraction", cfg.selected_fraction);
    if (ini.has("sweep", "seeds")) {
      cfg.seeds.clear();
      for (double s : ini.get_doubles("sweep", "seeds", {}))
        cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    cfg.target_train_cap = static_cast<std::size_t>(
        ini.get_int("sweep", "target_train_cap", long(cfg.target_train_cap)));
    if (ini.has("sweep", "arms")) {
      cfg.arms.clear();
      for (const std::string& s : ini.get_list("sweep", "arms", {}))
        cfg.arms.push_back(arm_from_string(s));
    }
    // per-arm sections can also disable arms: [arm.neggrad] enabled = false
    for (Arm a : {Arm::selected, Arm::random_control, Arm::static_only,
                  Arm::upper_bound, Arm::neggrad, Arm::finetune_unlearn}) {
      const std::string sec = std::string("arm.") + to_string(a);
      if (ini.get(sec, "enabled", "true") == "false")
        cfg.arms.erase(std::remove(cfg.arms.begin(), cfg.arms.end(), a),
                       cfg.arms.end());
    }
    if (ini.has("sweep", "m_values")) {
      cfg.m_values.clear();
      for (double m : ini.get_doubles("sweep", "m_values", {}))
        cfg.m_values.push_back(static_cast<std::uint32_t>(m));
    }
    cfg.affinities = ini.get_doubles("sweep", "affinities", cfg.affinities);
    if (ini.has("sweep", "nonstatic_sizes")) {
      cfg.nonstatic_sizes.clear();
      for (double s : ini.get_doubles("sweep", "nonstatic_sizes", {}))
        cfg.nonstatic_sizes.push_back(static_cast<std::size_t>(s));
    }
    cfg.fig3_ratio = ini.get_double("sweep", "fig3_ratio", cfg.fig3_ratio);
    cfg.fig4_ratio = ini.get_double("sweep", "fig4_ratio", cfg.fig4_ratio);
    cfg.affinity_ratio =
        ini.get_double("sweep", "affinity_ratio", cfg.affinity_ratio);
    cfg.threads = static_cast<int>(ini.get_int("sweep", "threads", cfg.threads));

    cfg.neggrad_epochs =
        static_cast<int>(ini.get_int("arm.neggrad", "epochs", cfg.neggrad_epochs));
    cfg.neggrad_lr = ini.get_double("arm.neggrad", "lr", cfg.neggrad_lr);
    cfg.finetune_epochs = static_cast<int>(
        ini.get_int("arm.finetune_unlearn", "epochs", cfg.finetune_epochs));
    cfg.finetune_lr = ini.get_double("arm.finetune_unlearn", "lr", cfg.finetune_lr);

    cfg.validate();
    return cfg;
  }

  // Canonical dump of every resolved field, sorted, so the hash is stable
  // under reordering of the input file.
  std::string canonical() const {
    std::map<std::string, std::string> kv;
    kv["data.kind"] = synthetic ? "synthetic" : "files";
    if (synthetic) {
      kv["data.dim"] = std::to_string(spec.dim);
      kv["data.source_classes"] = std::to_string(spec.source_classes);
      kv["data.target_classes"] = std::to_string(spec.target_classes);
      kv["data.cluster_separation"] = fmt_g17(spec.cluster_separation);
      kv["data.affinity"] = fmt_g17(spec.affinity);
      kv["data.noise_sigma"] = fmt_g17(spec.noise_sigma);
      kv["data.n_source"] = std::to_string(spec.n_source);
      kv["data.n_target_train"] = std::to_string(spec.n_target_train);
      kv["data.n_target_val"] = std::to_string(spec.n_target_val);
      kv["data.n_target_test"] = std::to_string(spec.n_target_test);
      kv["data.n_aux"] = std::to_string(spec.n_aux);
    } else {
      kv["data.model"] = files.model;
      kv["data.target_train"] = files.target_train;
      kv["data.target_val"] = files.target_val;
      kv["data.target_test"] = files.target_test;
      kv["data.aux"] = files.aux;
    }
    std::string hidden;
    for (std::size_t h : hidden_dims) hidden += std::to_string(h) + ",";
    kv["model.hidden"] = hidden;
    const auto dump_train = [&](const std::string& p, const TrainConfig& t) {
      kv[p + ".lr"] = fmt_g17(t.lr);
      kv[p + ".momentum"] = fmt_g17(t.momentum);
      kv[p + ".weight_decay"] = fmt_g17(t.weight_decay);
      kv[p + ".epochs"] = std::to_string(t.epochs);
      kv[p + ".lr_drop_epoch"] = std::to_string(t.lr_drop_epoch);
      kv[p + ".lr_drop_factor"] = fmt_g17(t.lr_drop_factor);
      kv[p + ".batch_size"] = std::to_string(t.batch_size);
    };
    dump_train("train", train);
    dump_train("pretrain", pretrain);
    dump_train("probe", probe);
    const auto join_d = [](const std::vector<double>& v) {
      std::string s;
      for (double x : v) s += fmt_g17(x) + ",";
      return s;
    };
    kv["sweep.ratios"] = join_d(ratios);
    kv["sweep.lr_grid"] = join_d(lr_grid);
    kv["sweep.selected_fraction"] = join_d(selected_fraction);
    std::string seeds_s;
    for (std::uint64_t s : seeds) seeds_s += std::to_string(s) + ",";
    kv["sweep.seeds"] = seeds_s;
    kv["sweep.target_train_cap"] = std::to_string(target_train_cap);
    std::string arms_s;
    for (Arm a : arms) arms_s += std::string(to_string(a)) + ",";
    kv["sweep.arms"] = arms_s;
    std::string ms;
    for (std::uint32_t m : m_values) ms += std::to_string(m) + ",";
    kv["sweep.m_values"] = ms;
    kv["sweep.affinities"] = join_d(affinities);
    std::string sizes;
    for (std::size_t s : nonstatic_sizes) sizes += std::to_string(s) + ",";
    kv["sweep.nonstatic_sizes"] = sizes;
    kv["sweep.fig3_ratio"] = fmt_g17(fig3_ratio);
    kv["sweep.fig4_ratio"] = fmt_g17(fig4_ratio);
    kv["sweep.affinity_ratio"] = fmt_g17(affinity_ratio);
    kv["arm.neggrad.epochs"] = std::to_string(neggrad_epochs);
    kv["arm.neggrad.lr"] = fmt_g17(neggrad_lr);
    kv["arm.finetune_unlearn.epochs"] = std::to_string(finetune_epochs);
    kv["arm.finetune_unlearn.lr"] = fmt_g17(finetune_lr);
    // threads intentionally excluded: parallelism must not change results
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
  }

  std::uint64_t config_hash() const { return fnv1a64(canonical()); }
};

// ---------------------------------------------------------------------------

struct ExperimentRecord {
  std::string config_hash;
  std::string group;  // fig1 | fig2 | fig3 | fig4r | fig6 | adhoc
  Arm arm = Arm::selected;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> affinity_knob;       // synthetic generator knob
  std::optional<std::size_t> nonstatic_size; // fig1 subsetting
  std::optional<std::uint32_t> m;
  std::optional<double> fraction;
  std::optional<double> lr;
  std::optional<std::size_t> train_size;
  std::optional<std::size_t> selection_size;
  std::optional<double> test_accuracy;
  std::optional<double> balanced_accuracy;
  std::optional<double> domain_affinity;
  double wall_time_s = 0.0;
  std::optional<std::string> skip;

  nlohmann::json to_json() const {
    const auto opt = [](const auto& o) {
      return o ? nlohmann::json(*o) : nlohmann::json(nullptr);
    };
    nlohmann::json j;
    j["config_hash"] = config_hash;
    j["group"] = group;
    j["arm"] = to_string(arm);
    j["ratio"] = ratio;
    j["seed"] = seed;
    j["affinity_knob"] = opt(affinity_knob);
    j["nonstatic_size"] = opt(nonstatic_size);
    j["m"] = opt(m);
    j["fraction"] = opt(fraction);
    j["lr"] = opt(lr);
    j["train_size"] = opt(train_size);
    j["selection_size"] = opt(selection_size);
    j["test_accuracy"] = opt(test_accuracy);
    j["balanced_accuracy"] = opt(balanced_accuracy);
    j["domain_affinity"] = opt(domain_affinity);
    j["wall_time_s"] = wall_time_s;
    j["skip"] = opt(skip);
    return j;
  }

  static ExperimentRecord from_json(const nlohmann::json& j) {
    ExperimentRecord r;
    const auto opt_d = [&](const char* k) -> std::optional<double> {
      if (j.at(k).is_null()) return std::nullopt;
      return j.at(k).get<double>();
    };
    r.config_hash = j.at("config_hash").get<std::string>();
    r.group = j.at("group").get<std::string>();
    r.arm = arm_from_string(j.at("arm").get<std::string>());
    r.ratio = j.at("ratio").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.affinity_knob = opt_d("affinity_knob");
    if (!j.at("nonstatic_size").is_null())
      r.nonstatic_size = j.at("nonstatic_size").get<std::size_t>();
    if (!j.at("m").is_null()) r.m = j.at("m").get<std::uint32_t>();
    r.fraction = opt_d("fraction");
    r.lr = opt_d("lr");
    if (!j.at("train_size").is_null())
      r.train_size = j.at("train_size").get<std::size_t>();
    if (!j.at("selection_size").is_null())
      r.selection_size = j.at("selection_size").get<std::size_t>();
    r.test_accuracy = opt_d("test_accuracy");
    r.balanced_accuracy = opt_d("balanced_accuracy");
    r.domain_affinity = opt_d("domain_affinity");
    r.wall_time_s = j.at("wall_time_s").get<double>();
    if (!j.at("skip").is_null()) r.skip = j.at("skip").get<std::string>();
    return r;
  }
};

// Per-class recalls for the fig4-left emitter.
struct PerClassRow {
  Arm arm = Arm::selected;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::uint32_t cls = 0;
  std::size_t static_count = 0;
  std::optional<double> recall;
};

struct SweepOutput {
  std::vector<ExperimentRecord> records;
  std::vector<PerClassRow> per_class;
};

// ---------------------------------------------------------------------------

namespace harness_detail {

struct CellSpec {
  std::string group;
  Arm arm = Arm::selected;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  double affinity_knob = -1.0;  // < 0: config default / files mode
  std::optional<std::size_t> nonstatic_size;
  std::optional<std::uint32_t> m_override;
  bool collect_per_class = false;
};

// Tuned training product shared between cells.
struct ArmProduct {
  ModelParams model;
  double val_accuracy = -1.0;
  double lr = 0.0;
  std::optional<double> fraction;
  std::optional<std::uint32_t> m;
  std::size_t train_size = 0;
  std::optional<std::size_t> selection_size;
  std::optional<int> selected_epoch;
};

// Everything derived from one (affinity knob, seed) pair: datasets, the
// pretrained source model and the affinity proxy. Products memoize the
// trained arms.
struct Context {
  Dataset target_pool;  // capped working copy, ids re-densified
  std::vector<Example> val_set;
  std::vector<Example> test_set;
  Dataset aux;
  ModelParams w_src;
  std::uint32_t target_classes = 0;
  double affinity_proxy = 0.0;

  std::mutex mu;
  std::map<std::string, std::shared_future<std::shared_ptr<const ArmProduct>>>
      products;

  std::shared_ptr<const ArmProduct> product(
      const std::string& key,
      const std::function<std::shared_ptr<const ArmProduct>()>& factory) {
    std::unique_lock<std::mutex> lock(mu);
    auto it = products.find(key);
    if (it != products.end()) {
      auto fut = it->second;
      lock.unlock();
      return fut.get();
    }
    auto prom = std::make_shared<
        std::promise<std::shared_ptr<const ArmProduct>>>();
    products.emplace(key, prom->get_future().share());
    lock.unlock();
    try {
      auto value = factory();
      prom->set_value(value);
      return value;
    } catch (...) {
      prom->set_exception(std::current_exception());
      throw;
    }
  }
};

inline Dataset redensify(std::vector<Example> examples, std::size_t dim,
                         std::uint32_t classes, const std::string& name) {
  Dataset ds;
  ds.dim = dim;
  ds.num_classes = classes;
  ds.name = name;
  for (std::size_t i = 0; i < examples.size(); ++i) examples[i].id = i;
  ds.examples = std::move(examples);
  ds.validate();
  return ds;
}

class ContextCache {
 public:
  explicit ContextCache(const ExperimentConfig& cfg)
      : cfg_(cfg), hash_(cfg.config_hash()) {}

  std::shared_ptr<Context> get(double affinity_knob, std::uint64_t seed) {
    const std::string key = fmt_g17(affinity_knob) + "|" + std::to_string(seed);
    std::unique_lock<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) {
      auto fut = it->second;
      lock.unlock();
      return fut.get();
    }
    auto prom = std::make_shared<std::promise<std::shared_ptr<Context>>>();
    cache_.emplace(key, prom->get_future().share());
    lock.unlock();
    try {
      auto ctx = build(affinity_knob, seed);
      prom->set_value(ctx);
      return ctx;
    } catch (...) {
      prom->set_exception(std::current_exception());
      throw;
    }
  }

  std::uint64_t config_hash() const { return hash_; }

 private:
  std::shared_ptr<Context> build(double affinity_knob, std::uint64_t seed) {
    auto ctx = std::make_shared<Context>();
    Dataset pool, val, test;
    if (cfg_.synthetic) {
      SyntheticSpec spec = cfg_.spec;
      if (affinity_knob >= 0.0) spec.affinity = affinity_knob;
      SyntheticBundle bundle = generate_synthetic(spec, seed);
      pool = std::move(bundle.target_train);
      val = std::move(bundle.target_val);
      test = std::move(bundle.target_test);
      ctx->aux = std::move(bundle.aux);
      ctx->target_classes = spec.target_classes;

      MlpSpec mspec;
      mspec.layer_dims.push_back(spec.dim);
      for (std::size_t h : cfg_.hidden_dims) mspec.layer_dims.push_back(h);
      mspec.layer_dims.push_back(spec.source_classes);
      TrainConfig pre = cfg_.pretrain;
      pre.seed = derive_seed(hash_, fnv1a64("pretrain"), seed);
      ctx->w_src = pretrain_source(mspec, bundle.source, pre).best_params;
    } else {
      ctx->w_src = load_params(cfg_.files.model);
      pool = load_dataset(cfg_.files.target_train);
      test = load_dataset(cfg_.files.target_test);
      ctx->aux = load_dataset(cfg_.files.aux);
      ctx->target_classes = pool.num_classes;
      if (!cfg_.files.target_val.empty()) {
        val = load_dataset(cfg_.files.target_val);
      } else {
        // hold out 20% of the pool before the train cap
        std::vector<std::size_t> order(pool.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(derive_seed(hash_, fnv1a64("val_split"), seed));
        rng.shuffle(order);
        const std::size_t n_val = std::max<std::size_t>(1, pool.size() / 5);
        std::vector<Example> val_ex, pool_ex;
        for (std::size_t i = 0; i < order.size(); ++i)
          (i < n_val ? val_ex : pool_ex).push_back(pool.examples[order[i]]);
        val = redensify(std::move(val_ex), pool.dim, pool.num_classes,
                        "target_val");
        pool = redensify(std::move(pool_ex), pool.dim, pool.num_classes,
                         "target_pool");
      }
    }

    // cap the train pool
    if (pool.size() > cfg_.target_train_cap) {
      std::vector<std::size_t> order(pool.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng(derive_seed(hash_, fnv1a64("train_cap"), seed));
      rng.shuffle(order);
      order.resize(cfg_.target_train_cap);
      std::sort(order.begin(), order.end());
      std::vector<Example> kept;
      kept.reserve(order.size());
      for (std::size_t i : order) kept.push_back(pool.examples[i]);
      pool = redensify(std::move(kept), pool.dim, pool.num_classes,
                       "target_pool");
    }

    ctx->target_pool = std::move(pool);
    ctx->val_set = val.examples;
    ctx->test_set = test.examples;

    TrainConfig probe = cfg_.probe;
    probe.seed = derive_seed(hash_, fnv1a64("probe"), seed);
    ctx->affinity_proxy =
        domain_affinity(ctx->w_src, ctx->target_pool.examples, ctx->test_set,
                        ctx->target_classes, probe);
    return ctx;
  }

  const ExperimentConfig& cfg_;
  std::uint64_t hash_;
  std::mutex mu_;
  std::map<std::string, std::shared_future<std::shared_ptr<Context>>> cache_;
};

struct CellResult {
  ExperimentRecord record;
  std::vector<PerClassRow> per_class;
};

CellResult run_cell_impl(const ExperimentConfig& cfg, ContextCache& cache,
                         const CellSpec& cell);

}  // namespace harness_detail

// ---------------------------------------------------------------------------
// Cell enumeration mirrors the figure layout: Q1 sizes, Q2 ratios, Q3
// selection sizes, Q5 affinity sweep, Q6 approximate-unlearning comparison.

inline std::vector<harness_detail::CellSpec> enumerate_cells(
    const ExperimentConfig& cfg) {
  using harness_detail::CellSpec;
  std::vector<CellSpec> cells;
  const auto has_ratio = [&](double r) {
    for (double x : cfg.ratios)
      if (x == r) return true;
    return false;
  };

  if (cfg.synthetic) {
    for (std::size_t size : cfg.nonstatic_sizes)
      for (Arm arm : {Arm::upper_bound, Arm::selected, Arm::random_control})
        if (cfg.has_arm(arm))
          for (std::uint64_t seed : cfg.seeds) {
            CellSpec c;
            c.group = "fig1";
            c.arm = arm;
            c.ratio = 0.0;
            c.seed = seed;
            c.nonstatic_size = size;
            cells.push_back(c);
          }
  }

  for (double ratio : cfg.ratios)
    for (Arm arm : {Arm::selected, Arm::random_control, Arm::static_only,
                    Arm::upper_bound})
      if (cfg.has_arm(arm))
        for (std::uint64_t seed : cfg.seeds) {
          CellSpec c;
          c.group = "fig2";
          c.arm = arm;
          c.ratio = ratio;
          c.seed = seed;
          c.collect_per_class =
              ratio == cfg.fig4_ratio &&
              (arm == Arm::selected || arm == Arm::static_only);
          cells.push_back(c);
        }

  if (cfg.has_arm(Arm::selected)) {
    for (double ratio : {0.0, cfg.fig3_ratio})
      if (has_ratio(ratio) || ratio == cfg.fig3_ratio)
        for (std::uint32_t m : cfg.m_values)
          for (std::uint64_t seed : cfg.seeds) {
            CellSpec c;
            c.group = "fig3";
            c.arm = Arm::selected;
            c.ratio = ratio;
            c.seed = seed;
            c.m_override = m;
            cells.push_back(c);
          }
  }

  if (cfg.synthetic) {
    for (double affinity : cfg.affinities)
      for (Arm arm : {Arm::selected, Arm::static_only})
        if (cfg.has_arm(arm))
          for (std::uint64_t seed : cfg.seeds) {
            CellSpec c;
            c.group = "fig4r";
            c.arm = arm;
            c.ratio = cfg.affinity_ratio;
            c.seed = seed;
            c.affinity_knob = affinity;
            cells.push_back(c);
          }
  }

  for (double ratio : cfg.ratios)
    for (Arm arm : {Arm::selected, Arm::neggrad, Arm::finetune_unlearn})
      if (cfg.has_arm(arm))
        for (std::uint64_t seed : cfg.seeds) {
          CellSpec c;
          c.group = "fig6";
          c.arm = arm;
          c.ratio = ratio;
          c.seed = seed;
          cells.push_back(c);
        }

  return cells;
}

inline SweepOutput run_sweep(const ExperimentConfig& cfg, int threads = 0) {
  cfg.validate();
  if (threads <= 0) threads = cfg.threads;
  harness_detail::ContextCache cache(cfg);
  const auto cells = enumerate_cells(cfg);

  std::vector<harness_detail::CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      results[i] = harness_detail::run_cell_impl(cfg, cache, cells[i]);
    }
  };
  if (threads <= 1 || cells.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int n = std::min<int>(threads, static_cast<int>(cells.size()));
    pool.reserve(n);
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  SweepOutput out;
  out.records.reserve(results.size());
  for (auto& r : results) {
    out.records.push_back(std::move(r.record));
    for (auto& row : r.per_class) out.per_class.push_back(row);
  }
  return out;
}

// Convenience single-cell entry point (full-size, config-default affinity).
inline ExperimentRecord run_cell(const ExperimentConfig& cfg, Arm arm,
                                 double ratio, std::uint64_t seed) {
  cfg.validate();
  harness_detail::ContextCache cache(cfg);
  harness_detail::CellSpec cell;
  cell.group = "adhoc";
  cell.arm = arm;
  cell.ratio = ratio;
  cell.seed = seed;
  return harness_detail::run_cell_impl(cfg, cache, cell).record;
}

}  // namespace tul

#include "tul/harness_cell.hpp"
