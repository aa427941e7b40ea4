// tul: transfer unlearning toolkit CLI.
//
// Subcommands: gen-data, pretrain, select, transfer, unlearn, sweep, report.
// Every run writes a manifest.json with the resolved configuration, seeds and
// content hashes of all input files. Exit codes: 0 success, 2 configuration
// error, 3 data error, 4 numerical divergence.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tul/tul.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Manifest {
  std::string command;
  json config = json::object();
  std::vector<std::uint64_t> seeds;
  json inputs = json::object();
  std::vector<std::string> outputs;

  void add_input(const std::string& path) {
    inputs[path] = tul::to_hex(tul::fnv1a64(tul::read_file(path)));
  }

  void write(const std::string& outdir) const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["timestamp"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count();
    tul::write_file(outdir + "/manifest.json", j.dump(2) + "\n");
  }
};

void ensure_outdir(const std::string& outdir) {
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) throw tul::DataError("cannot create output directory " + outdir);
}

tul::ExperimentConfig load_config(const std::string& path) {
  return tul::ExperimentConfig::from_ini(tul::IniFile::parse_file(path));
}

json config_to_json(const tul::ExperimentConfig& cfg) {
  json j;
  std::string canon = cfg.canonical();
  json lines = json::object();
  std::size_t pos = 0;
  while (pos < canon.size()) {
    const std::size_t eol = canon.find('\n', pos);
    const std::string line = canon.substr(pos, eol - pos);
    pos = eol + 1;
    const std::size_t eq = line.find('=');
    if (eq != std::string::npos)
      lines[line.substr(0, eq)] = line.substr(eq + 1);
  }
  j["resolved"] = lines;
  j["hash"] = tul::to_hex(cfg.config_hash());
  return j;
}

// Builds (or loads) the partition shared by select/transfer/unlearn.
struct TargetSplit {
  tul::Partition partition;
  std::vector<tul::Example> static_set;
  std::vector<tul::Example> nonstatic;
};

TargetSplit split_target(const tul::Dataset& target, double ratio,
                         std::uint64_t seed) {
  TargetSplit s;
  s.partition = tul::partition_target(target, ratio, seed);
  s.static_set = tul::gather(target, s.partition.static_ids);
  s.nonstatic = tul::gather(target, s.partition.nonstatic_ids);
  return s;
}

int cmd_gen_data(const std::string& config_path, std::uint64_t seed,
                 const std::string& outdir) {
  const tul::ExperimentConfig cfg = load_config(config_path);
  if (!cfg.synthetic)
    throw tul::DomainError("gen-data requires a synthetic data config");
  ensure_outdir(outdir);
  const tul::SyntheticBundle b = tul::generate_synthetic(cfg.spec, seed);

  Manifest m;
  m.command = "gen-data";
  m.config = config_to_json(cfg);
  m.seeds = {seed};
  m.add_input(config_path);
  const auto save = [&](const tul::Dataset& ds, const char* name) {
    const std::string path = outdir + "/" + name + ".tuds";
    tul::save_dataset(ds, path);
    m.outputs.push_back(path);
  };
  save(b.source, "source");
  save(b.target_train, "target_train");
  save(b.target_val, "target_val");
  save(b.target_test, "target_test");
  save(b.aux, "aux");
  m.write(outdir);
  std::cout << "wrote 5 datasets to " << outdir << "\n";
  return 0;
}

int cmd_pretrain(const std::string& config_path, const std::string& source_path,
                 std::uint64_t seed, const std::string& outdir) {
  const tul::ExperimentConfig cfg = load_config(config_path);
  ensure_outdir(outdir);
  const tul::Dataset source = tul::load_dataset(source_path);

  tul::MlpSpec spec;
  spec.layer_dims.push_back(source.dim);
  for (std::size_t h : cfg.hidden_dims) spec.layer_dims.push_back(h);
  spec.layer_dims.push_back(source.num_classes);

  tul::TrainConfig pre = cfg.pretrain;
  pre.seed = seed;
  const tul::TrainResult r = tul::pretrain_source(spec, source, pre);

  const std::string model_path = outdir + "/w_src.tuck";
  tul::save_params(r.best_params, model_path);
  tul::write_history_jsonl(r.history, outdir + "/pretrain_history.jsonl");

  Manifest m;
  m.command = "pretrain";
  m.config = config_to_json(cfg);
  m.seeds = {seed};
  m.add_input(config_path);
  m.add_input(source_path);
  m.outputs = {model_path, outdir + "/pretrain_history.jsonl"};
  m.write(outdir);
  std::cout << "pretrained source model: val_accuracy="
            << tul::fmt_g17(r.best_val_accuracy) << " epoch=" << r.best_epoch
            << "\n";
  return 0;
}

int cmd_select(const std::string& model_path, const std::string& target_path,
               const std::string& aux_path, double ratio, std::uint32_t m,
               bool cosine, std::uint64_t seed, const std::string& outdir) {
  ensure_outdir(outdir);
  const tul::ModelParams w_src = tul::load_params(model_path);
  const tul::Dataset target = tul::load_dataset(target_path);
  const tul::Dataset aux = tul::load_dataset(aux_path);
  const TargetSplit split = split_target(target, ratio, seed);
  if (split.nonstatic.empty())
    throw tul::DomainError("select: non-static set is empty at ratio " +
                           tul::fmt_g17(ratio));

  tul::SelectionConfig sc;
  sc.examples_per_class = m;
  sc.cosine = cosine;
  const tul::SelectionResult sel =
      tul::select_auxiliary(w_src, split.nonstatic, aux, sc);

  tul::write_file(outdir + "/selection.json",
                  tul::selection_to_json(sel).dump(2) + "\n");
  tul::write_file(outdir + "/selection.txt", tul::selection_to_text(sel));

  Manifest man;
  man.command = "select";
  man.seeds = {seed};
  man.config["ratio"] = ratio;
  man.config["m"] = m;
  man.config["cosine"] = cosine;
  man.add_input(model_path);
  man.add_input(target_path);
  man.add_input(aux_path);
  man.outputs = {outdir + "/selection.json", outdir + "/selection.txt"};
  man.write(outdir);
  std::cout << "selected " << sel.total_selected() << " auxiliary examples\n";
  return 0;
}

int cmd_transfer(const std::string& config_path, const std::string& model_path,
                 const std::string& target_path, const std::string& val_path,
                 const std::string& aux_path, double ratio, std::uint32_t m,
                 double lr, std::uint64_t seed, const std::string& outdir) {
  const tul::ExperimentConfig cfg = load_config(config_path);
  ensure_outdir(outdir);
  const tul::ModelParams w_src = tul::load_params(model_path);
  const tul::Dataset target = tul::load_dataset(target_path);
  const tul::Dataset val = tul::load_dataset(val_path);
  const tul::Dataset aux = tul::load_dataset(aux_path);
  const TargetSplit split = split_target(target, ratio, seed);

  tul::SelectionConfig sc;
  sc.examples_per_class = m;
  tul::TrainConfig tc = cfg.train;
  if (lr > 0.0) tc.lr = lr;
  tc.seed = seed;

  const tul::TransferOutcome out = tul::transfer_with_selection(
      w_src, split.static_set, split.nonstatic, aux, target.num_classes, sc,
      tc, val.examples);

  const std::string model_out = outdir + "/w_tg.tuck";
  tul::save_params(out.w_tg, model_out);
  tul::write_file(outdir + "/selection.json",
                  tul::selection_to_json(out.selection).dump(2) + "\n");
  tul::write_history_jsonl(out.train_result.history,
                           outdir + "/train_history.jsonl");

  Manifest man;
  man.command = "transfer";
  man.config = config_to_json(cfg);
  man.config["ratio"] = ratio;
  man.config["m"] = m;
  man.seeds = {seed};
  man.add_input(config_path);
  man.add_input(model_path);
  man.add_input(target_path);
  man.add_input(val_path);
  man.add_input(aux_path);
  man.outputs = {model_out, outdir + "/selection.json",
                 outdir + "/train_history.jsonl"};
  man.write(outdir);
  std::cout << "transfer complete: val_accuracy="
            << tul::fmt_g17(out.train_result.best_val_accuracy)
            << " train_size=" << split.static_set.size() +
                                     out.selection.total_selected()
            << "\n";
  return 0;
}

std::vector<std::uint64_t> parse_id_list(const std::string& s) {
  std::vector<std::uint64_t> ids;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) ids.push_back(std::stoull(cur));
      cur.clear();
    } else if (!isspace(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) ids.push_back(std::stoull(cur));
  return ids;
}

int cmd_unlearn(const std::string& config_path, const std::string& method,
                const std::string& model_path, const std::string& src_path,
                const std::string& target_path, const std::string& val_path,
                const std::string& aux_path, const std::string& selection_path,
                double ratio, const std::string& forget,
                std::uint64_t seed, const std::string& outdir) {
  const tul::ExperimentConfig cfg = load_config(config_path);
  ensure_outdir(outdir);
  const tul::Dataset target = tul::load_dataset(target_path);
  const TargetSplit split = split_target(target, ratio, seed);

  tul::ForgetRequest request;
  request.ids = forget.empty() ? split.partition.nonstatic_ids
                               : parse_id_list(forget);

  Manifest man;
  man.command = "unlearn";
  man.config = config_to_json(cfg);
  man.config["method"] = method;
  man.config["ratio"] = ratio;
  man.seeds = {seed};
  man.add_input(config_path);
  man.add_input(model_path);
  man.add_input(target_path);

  const std::string model_out = outdir + "/w_unlearned.tuck";
  tul::UnlearnOutcome outcome;

  if (method == "identity") {
    const tul::ModelParams w_tg = tul::load_params(model_path);
    outcome.model = tul::identity_unlearn(w_tg, request, split.partition);
    outcome.method = tul::UnlearnMethod::identity;
    const std::string in_bytes = tul::serialize_params(w_tg);
    const std::string out_bytes = tul::serialize_params(outcome.model);
    std::cout << "identity unlearner: input hash "
              << tul::to_hex(tul::fnv1a64(in_bytes)) << " == output hash "
              << tul::to_hex(tul::fnv1a64(out_bytes)) << " ("
              << (in_bytes == out_bytes ? "bit-identical" : "MISMATCH") << ")\n";
    if (in_bytes != out_bytes) return 1;  // unreachable by construction
  } else if (method == "retrain") {
    if (src_path.empty() || val_path.empty() || aux_path.empty() ||
        selection_path.empty())
      throw tul::DomainError(
          "unlearn --method retrain needs --source-model, --val, --aux and "
          "--selection");
    const tul::ModelParams w_src = tul::load_params(src_path);
    const tul::Dataset val = tul::load_dataset(val_path);
    const tul::Dataset aux = tul::load_dataset(aux_path);
    man.add_input(src_path);
    man.add_input(val_path);
    man.add_input(aux_path);
    man.add_input(selection_path);
    const tul::SelectionResult frozen = tul::selection_from_json(
        json::parse(tul::read_file(selection_path)));
    // remaining non-static examples after the deletion request
    std::vector<tul::Example> remaining;
    for (const tul::Example& e : split.nonstatic)
      if (std::find(request.ids.begin(), request.ids.end(), e.id) ==
          request.ids.end())
        remaining.push_back(e);
    tul::TrainConfig tc = cfg.train;
    tc.seed = seed;
    outcome.model =
        tul::exact_retrain(w_src, split.static_set, remaining, aux,
                           target.num_classes, tc, val.examples, frozen);
    outcome.method = tul::UnlearnMethod::retrain;
  } else if (method == "neggrad" || method == "finetune") {
    if (src_path.empty() || val_path.empty())
      throw tul::DomainError("unlearn --method " + method +
                             " needs --source-model and --val");
    const tul::ModelParams w_tg = tul::load_params(model_path);
    const tul::ModelParams w_src = tul::load_params(src_path);
    const tul::Dataset val = tul::load_dataset(val_path);
    man.add_input(src_path);
    man.add_input(val_path);
    tul::TrainConfig tc = cfg.train;
    tc.seed = seed;
    const double reference =
        tul::reference_point(w_src, split.static_set, target.num_classes,
                             val.examples, split.nonstatic, tc);
    tul::TrainConfig uc = tc;
    const bool is_neggrad = method == "neggrad";
    uc.epochs = is_neggrad ? cfg.neggrad_epochs : cfg.finetune_epochs;
    uc.lr_drop_epoch = uc.epochs;
    const double ulr = is_neggrad ? cfg.neggrad_lr : cfg.finetune_lr;
    if (ulr > 0.0) uc.lr = ulr;
    const std::vector<tul::ModelParams> checkpoints =
        is_neggrad ? tul::unlearn_neggrad(w_tg, split.nonstatic, uc)
                   : tul::unlearn_finetune(w_tg, split.static_set, uc);
    outcome = tul::select_unlearn_checkpoint(
        checkpoints, split.nonstatic, reference,
        is_neggrad ? tul::UnlearnMethod::neggrad
                   : tul::UnlearnMethod::finetune);
    std::cout << "reference " << tul::fmt_g17(reference) << ", selected epoch "
              << *outcome.selected_epoch << "\n";
  } else {
    throw tul::DomainError(
        "unknown unlearn method '" + method +
        "' (expected identity, retrain, neggrad or finetune)");
  }

  tul::save_params(outcome.model, model_out);
  tul::write_file(outdir + "/outcome.json",
                  tul::outcome_to_json(outcome, model_out).dump(2) + "\n");
  man.outputs = {model_out, outdir + "/outcome.json"};
  man.write(outdir);
  return 0;
}

int cmd_sweep(const std::string& config_path, int threads,
              const std::string& outdir) {
  const tul::ExperimentConfig cfg = load_config(config_path);
  ensure_outdir(outdir);
  const tul::SweepOutput out = tul::run_sweep(cfg, threads);
  tul::write_records_jsonl(out.records, outdir + "/records.jsonl");
  tul::write_per_class_jsonl(out.per_class, outdir + "/per_class.jsonl");
  tul::emit_figure_csvs(out, outdir);

  Manifest man;
  man.command = "sweep";
  man.config = config_to_json(cfg);
  man.seeds = cfg.seeds;
  man.add_input(config_path);
  man.outputs = {outdir + "/records.jsonl", outdir + "/per_class.jsonl",
                 outdir + "/fig1.csv",      outdir + "/fig2.csv",
                 outdir + "/fig3.csv",      outdir + "/fig4_left.csv",
                 outdir + "/fig4_right.csv", outdir + "/fig6.csv"};
  man.write(outdir);

  std::size_t skips = 0;
  for (const auto& r : out.records)
    if (r.skip) ++skips;
  std::cout << "sweep complete: " << out.records.size() << " records ("
            << skips << " skips) in " << outdir << "\n";
  return 0;
}

int cmd_report(const std::string& records_dir, const std::string& outdir) {
  tul::SweepOutput out;
  out.records = tul::read_records_jsonl(records_dir + "/records.jsonl");
  const std::string pc_path = records_dir + "/per_class.jsonl";
  if (fs::exists(pc_path)) out.per_class = tul::read_per_class_jsonl(pc_path);
  ensure_outdir(outdir);
  tul::emit_figure_csvs(out, outdir);

  Manifest man;
  man.command = "report";
  man.add_input(records_dir + "/records.jsonl");
  if (fs::exists(pc_path)) man.add_input(pc_path);
  man.outputs = {outdir + "/fig1.csv",      outdir + "/fig2.csv",
                 outdir + "/fig3.csv",      outdir + "/fig4_left.csv",
                 outdir + "/fig4_right.csv", outdir + "/fig6.csv"};
  man.write(outdir);
  std::cout << "report: 6 figure CSVs written to " << outdir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tul: transfer unlearning toolkit"};
  app.require_subcommand(1);

  std::string config_path, outdir = ".", model_path, src_path, target_path,
              val_path, aux_path, selection_path, method = "identity",
              forget, records_dir;
  std::uint64_t seed = 1;
  double ratio = 0.0, lr = 0.0;
  std::uint32_t m = 1;
  bool cosine = false;
  int threads = 0;

  auto* gen = app.add_subcommand("gen-data", "generate synthetic datasets");
  gen->add_option("--config", config_path, "config file")->required();
  gen->add_option("--seed", seed, "generation seed");
  gen->add_option("--out", outdir, "output directory")->required();

  auto* pre = app.add_subcommand("pretrain", "train the source model");
  pre->add_option("--config", config_path)->required();
  pre->add_option("--source", src_path, "source dataset (.tuds)")->required();
  pre->add_option("--seed", seed);
  pre->add_option("--out", outdir)->required();

  auto* sel = app.add_subcommand("select", "select auxiliary examples");
  sel->add_option("--model", model_path, "source checkpoint (.tuck)")->required();
  sel->add_option("--target", target_path, "target train dataset")->required();
  sel->add_option("--aux", aux_path, "auxiliary dataset")->required();
  sel->add_option("--ratio", ratio, "static ratio");
  sel->add_option("--m", m, "examples per class")->required();
  sel->add_flag("--cosine", cosine, "use cosine similarity");
  sel->add_option("--seed", seed);
  sel->add_option("--out", outdir)->required();

  auto* tr = app.add_subcommand("transfer", "transfer with data selection");
  tr->add_option("--config", config_path)->required();
  tr->add_option("--model", model_path, "source checkpoint")->required();
  tr->add_option("--target", target_path)->required();
  tr->add_option("--val", val_path)->required();
  tr->add_option("--aux", aux_path)->required();
  tr->add_option("--ratio", ratio);
  tr->add_option("--m", m)->required();
  tr->add_option("--lr", lr, "override training lr");
  tr->add_option("--seed", seed);
  tr->add_option("--out", outdir)->required();

  auto* un = app.add_subcommand("unlearn", "service a deletion request");
  un->add_option("--config", config_path)->required();
  un->add_option("--method", method,
                 "identity | retrain | neggrad | finetune");
  un->add_option("--model", model_path, "target checkpoint (w_tg)")->required();
  un->add_option("--source-model", src_path, "source checkpoint (w_src)");
  un->add_option("--target", target_path)->required();
  un->add_option("--val", val_path);
  un->add_option("--aux", aux_path);
  un->add_option("--selection", selection_path, "frozen selection json");
  un->add_option("--ratio", ratio);
  un->add_option("--forget", forget, "comma-separated non-static ids");
  un->add_option("--seed", seed);
  un->add_option("--out", outdir)->required();

  auto* sw = app.add_subcommand("sweep", "run the experiment sweep");
  sw->add_option("--config", config_path)->required();
  sw->add_option("--threads", threads, "parallel cells (0 = config value)");
  sw->add_option("--out", outdir)->required();

  auto* rep = app.add_subcommand("report", "emit figure CSVs from records");
  rep->add_option("--records", records_dir, "directory with records.jsonl")
      ->required();
  rep->add_option("--out", outdir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, seed, outdir);
    if (pre->parsed()) return cmd_pretrain(config_path, src_path, seed, outdir);
    if (sel->parsed())
      return cmd_select(model_path, target_path, aux_path, ratio, m, cosine,
                        seed, outdir);
    if (tr->parsed())
      return cmd_transfer(config_path, model_path, target_path, val_path,
                          aux_path, ratio, m, lr, seed, outdir);
    if (un->parsed())
      return cmd_unlearn(config_path, method, model_path, src_path,
                         target_path, val_path, aux_path, selection_path,
                         ratio, forget, seed, outdir);
    if (sw->parsed()) return cmd_sweep(config_path, threads, outdir);
    if (rep->parsed()) return cmd_report(records_dir, outdir);
  } catch (const tul::DivergedError& e) {
    std::cerr << "error[diverged]: " << e.what() << "\n";
    return 4;
  } catch (const tul::DomainError& e) {
    std::cerr << "error[config]: " << e.what() << "\n";
    return 2;
  } catch (const tul::DataError& e) {
    std::cerr << "error[data]: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
