#include "ecgdg/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "ecgdg/config.hpp"
#include "ecgdg/dataset.hpp"
#include "ecgdg/dsp.hpp"
#include "ecgdg/errors.hpp"
#include "ecgdg/experiment.hpp"
#include "ecgdg/gradcheck.hpp"
#include "ecgdg/harness.hpp"
#include "ecgdg/parallel.hpp"
#include "ecgdg/portable.hpp"
#include "ecgdg/synth.hpp"
#include "ecgdg/trainer.hpp"

namespace fs = std::filesystem;

namespace ecgdg::cli {

namespace {

uint64_t env_seed() {
  if (const char* env = std::getenv("ECGDG_SEED")) return std::strtoull(env, nullptr, 10);
  return 7;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

// --- ingest ------------------------------------------------------------------

struct IngestArgs {
  std::string dir, domain, manifest, skip_report;
};

int cmd_ingest(const IngestArgs& a) {
  io::ScanResult scan = io::scan_dataset(a.dir, a.domain);
  io::write_manifest(scan.manifest, a.manifest);
  if (!a.skip_report.empty()) io::write_skip_report(scan.skipped, a.skip_report);
  std::printf("ingested %zu records from %s (%zu skipped)\n", scan.manifest.entries.size(),
              a.dir.c_str(), scan.skipped.size());
  for (const auto& s : scan.skipped)
    std::fprintf(stderr, "skipped %s: %s\n", s.path.c_str(), s.reason.c_str());
  return 0;
}

// --- preprocess ---------------------------------------------------------------

struct PreprocessArgs {
  std::string manifest, out;
  dsp::PreprocessConfig cfg;
};

int cmd_preprocess(const PreprocessArgs& a) {
  a.cfg.validate();
  io::DatasetManifest manifest = io::read_manifest(a.manifest);
  if (manifest.entries.empty()) fail(ErrorCode::EmptyDataset, a.manifest + " is empty");
  fs::create_directories(a.out);

  io::DatasetManifest cache;
  cache.created_at = manifest.created_at;
  cache.entries.resize(manifest.entries.size());
  parallel_for(static_cast<int64_t>(manifest.entries.size()), [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      const auto& entry = manifest.entries[static_cast<size_t>(i)];
      io::EcgRecord rec = io::load_entry(entry);
      rec = dsp::preprocess_record(rec, a.cfg);
      io::PortablePaths paths = io::write_portable(rec, a.out);
      io::ManifestEntry out_entry = entry;
      out_entry.path = paths.header_path;
      out_entry.fs = rec.fs;
      out_entry.num_samples = rec.num_samples;
      cache.entries[static_cast<size_t>(i)] = std::move(out_entry);
    }
  });
  io::write_manifest(cache, (fs::path(a.out) / "manifest.csv").string());
  std::printf("preprocessed %zu records into %s\n", cache.entries.size(), a.out.c_str());
  return 0;
}

// --- synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string out, spec_file;
  int domains = 4;
  int classes = 6;
  int per_domain = 200;
  uint64_t seed = env_seed();
};

synth::SynthDomainSpec default_domain_spec(int index, const SynthArgs& a) {
  // Even-indexed domains stay clean source-like; odd ones shift harder.
  synth::SynthDomainSpec spec;
  spec.name = "D" + std::to_string(index + 1);
  spec.seed = a.seed + static_cast<uint64_t>(index);
  spec.record_count = a.per_domain;
  switch (index % 4) {
    case 0:
      break;
    case 1:
      spec.noise_std = 0.03;
      spec.wander_amplitude = 0.15;
      break;
    case 2:
      spec.fs = 257;
      spec.amplitude_scale = 2.5;
      spec.wander_amplitude = 0.3;
      spec.noise_std = 0.06;
      spec.rate_offset = 0.25;
      break;
    default:
      spec.noise_std = 0.08;
      spec.wander_amplitude = 0.25;
      spec.qrs_width_factor = 1.6;
      spec.rate_offset = -0.15;
      spec.t_flip = true;
      break;
  }
  return spec;
}

void apply_spec_overrides(synth::SynthDomainSpec& spec,
                          const std::map<std::string, std::string>& kv, const std::string& origin) {
  require_known_keys(kv,
                     {"fs", "seconds", "amplitude_scale", "wander_amplitude", "wander_freq",
                      "noise_std", "rate_offset", "qrs_width_factor", "t_flip", "records",
                      "co_occurrence", "class_priors", "seed"},
                     origin);
  auto num = [&](const char* key, double fb) {
    auto it = kv.find(key);
    return it == kv.end() ? fb : std::atof(it->second.c_str());
  };
  spec.fs = static_cast<int>(num("fs", spec.fs));
  spec.seconds = num("seconds", spec.seconds);
  spec.amplitude_scale = num("amplitude_scale", spec.amplitude_scale);
  spec.wander_amplitude = num("wander_amplitude", spec.wander_amplitude);
  spec.wander_freq = num("wander_freq", spec.wander_freq);
  spec.noise_std = num("noise_std", spec.noise_std);
  spec.rate_offset = num("rate_offset", spec.rate_offset);
  spec.qrs_width_factor = num("qrs_width_factor", spec.qrs_width_factor);
  if (kv.count("t_flip")) spec.t_flip = kv.at("t_flip") == "true";
  spec.record_count = static_cast<int>(num("records", spec.record_count));
  spec.co_occurrence = num("co_occurrence", spec.co_occurrence);
  if (kv.count("seed")) spec.seed = std::strtoull(kv.at("seed").c_str(), nullptr, 10);
  if (kv.count("class_priors")) {
    spec.class_priors.clear();
    for (const auto& tok : split_list(kv.at("class_priors")))
      spec.class_priors.push_back(std::atof(tok.c_str()));
  }
}

int cmd_synth(const SynthArgs& a) {
  dg::LabelMap map = synth::synthetic_label_map(a.classes);
  std::vector<synth::SynthDomainSpec> specs;
  for (int i = 0; i < a.domains; ++i) specs.push_back(default_domain_spec(i, a));
  if (!a.spec_file.empty()) {
    KeyValueFile kv = KeyValueFile::parse_file(a.spec_file);
    for (const auto& [section, values] : kv.sections) {
      if (section.rfind("domain:", 0) != 0)
        fail(ErrorCode::UnknownKey, a.spec_file + ": unknown section [" + section + "]");
      std::string name = section.substr(7);
      bool found = false;
      for (auto& spec : specs)
        if (spec.name == name) {
          apply_spec_overrides(spec, values, a.spec_file + " [" + section + "]");
          found = true;
        }
      if (!found)
        fail(ErrorCode::InvalidConfig, a.spec_file + ": no domain named " + name +
                                           " (have D1..D" + std::to_string(a.domains) + ")");
    }
  }
  auto manifests = synth::generate_dataset(specs, map, a.out);
  size_t total = 0;
  for (const auto& m : manifests) total += m.entries.size();
  std::printf("generated %zu records across %zu domains under %s\n", total, manifests.size(),
              a.out.c_str());
  return 0;
}

// --- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, sources, out;
  uint64_t seed = 0;
  bool seed_given = false;
  bool deterministic = false;
  std::string variant;
  int epochs = -1;
  int batch_size = -1;
  double lr = -1.0;
};

int cmd_train(const TrainArgs& a) {
  KeyValueFile kv = a.config.empty() ? KeyValueFile{} : KeyValueFile::parse_file(a.config);
  for (const auto& [name, section] : kv.sections) {
    (void)section;
    static const std::set<std::string> known = {"model", "trainer", "labels"};
    if (!known.count(name)) fail(ErrorCode::UnknownKey, a.config + ": unknown section [" + name + "]");
  }

  nn::ModelConfig model_cfg = kv.has_section("model")
                                  ? nn::ModelConfig::from_key_values(kv.section("model"))
                                  : nn::ModelConfig{};
  train::TrainConfig train_cfg = kv.has_section("trainer")
                                     ? train::TrainConfig::from_key_values(kv.section("trainer"))
                                     : train::TrainConfig{};
  const auto& labels_section = kv.section("labels");
  require_known_keys(labels_section, {"map"}, a.config + " [labels]");

  // Flags override file values which override defaults.
  if (a.seed_given) train_cfg.seed = a.seed;
  if (train_cfg.seed == 0) train_cfg.seed = env_seed();
  if (a.deterministic) train_cfg.deterministic = true;
  if (a.epochs > 0) train_cfg.epochs = a.epochs;
  if (a.batch_size > 0) train_cfg.batch_size = a.batch_size;
  if (a.lr > 0) train_cfg.lr = a.lr;
  if (!a.variant.empty()) model_cfg.multiscale = a.variant == "multiscale";
  train_cfg.validate();

  dg::LabelMap map = labels_section.count("map") ? dg::LabelMap::load_csv(labels_section.at("map"))
                                                 : dg::default_label_map();
  model_cfg.num_classes = static_cast<int>(map.size());
  model_cfg.validate();

  std::vector<std::string> source_names = split_list(a.sources);
  if (source_names.empty()) fail(ErrorCode::InvalidConfig, "--sources must name domains");

  std::vector<std::pair<std::string, std::vector<std::string>>> source_ids;
  std::vector<io::EcgRecord> all_records;
  std::vector<std::pair<std::string, std::string>> source_manifests;
  for (const auto& name : source_names) {
    std::string manifest_path = (fs::path(a.data) / name / "manifest.csv").string();
    source_manifests.push_back({name, manifest_path});
    io::DatasetManifest manifest = io::read_manifest(manifest_path);
    std::vector<io::EcgRecord> records(manifest.entries.size());
    parallel_for(static_cast<int64_t>(manifest.entries.size()), [&](int64_t begin, int64_t end) {
      for (int64_t i = begin; i < end; ++i) {
        records[static_cast<size_t>(i)] = io::load_entry(manifest.entries[static_cast<size_t>(i)]);
        records[static_cast<size_t>(i)].domain = name;
      }
    });
    dg::FilterStats stats = dg::filter_scored(records, map);
    if (stats.records_dropped > 0)
      std::fprintf(stderr, "%s: dropped %lld unscored-only records\n", name.c_str(),
                   static_cast<long long>(stats.records_dropped));
    std::vector<std::string> ids;
    for (auto& r : records) {
      ids.push_back(r.id);
      all_records.push_back(std::move(r));
    }
    source_ids.push_back({name, std::move(ids)});
  }

  dg::SplitPlan plan = dg::make_splits(source_ids, train_cfg.seed);
  fs::create_directories(a.out);
  dg::write_split_plan(plan, (fs::path(a.out) / "splits.txt").string());

  std::unordered_map<std::string, size_t> by_id;
  for (size_t i = 0; i < all_records.size(); ++i) by_id[all_records[i].id] = i;
  auto collect = [&](const std::vector<std::string>& ids) {
    train::RecordSet set;
    for (const auto& id : ids) set.records.push_back(all_records[by_id.at(id)]);
    set.targets = dg::truth_matrix(set.records, map);
    return set;
  };
  std::vector<std::string> train_ids, val_ids;
  for (const auto& s : plan.sources) {
    train_ids.insert(train_ids.end(), s.train.begin(), s.train.end());
    val_ids.insert(val_ids.end(), s.val.begin(), s.val.end());
  }
  train::RecordSet train_set = collect(train_ids);
  train::RecordSet val_set = collect(val_ids);

  // Echo the effective configuration (defaults -> file -> flags).
  KeyValueFile echo;
  for (const auto& [k, v] : model_cfg.to_key_values()) echo.set("model", k, v);
  for (const auto& [k, v] : train_cfg.to_key_values()) echo.set("trainer", k, v);
  {
    std::string joined;
    for (size_t i = 0; i < source_manifests.size(); ++i) {
      if (i) joined += ",";
      joined += source_manifests[i].first + "=" + source_manifests[i].second;
    }
    echo.set("data", "sources", joined);
    echo.set("data", "cache_dir", a.data);
  }
  echo.save((fs::path(a.out) / "config.txt").string());
  map.save_csv((fs::path(a.out) / "labels.txt").string());

  nn::ModelGraph<float> model = nn::build_model<float>(model_cfg, train_cfg.seed);
  std::printf("model: %s, %lld trainable parameters\n",
              model_cfg.multiscale ? "multiscale" : "baseline",
              static_cast<long long>(model.param_count()));
  train::RunState state = train::train(model, train_set, val_set, train_cfg, a.out);
  std::printf("trained %zu epochs, best val loss %.6f at epoch %d%s\n", state.log.size(),
              state.best_val_loss, state.best_epoch,
              state.stopped_early ? " (early stop)" : "");
  return 0;
}

// --- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string run, targets, report, data;
  double threshold = 0.5;
  bool omit = false;
};

int cmd_eval(const EvalArgs& a) {
  KeyValueFile run_cfg = KeyValueFile::parse_file((fs::path(a.run) / "config.txt").string());
  nn::ModelConfig model_cfg = nn::ModelConfig::from_key_values(run_cfg.section("model"));
  dg::LabelMap map = dg::LabelMap::load_csv((fs::path(a.run) / "labels.txt").string());
  model_cfg.num_classes = static_cast<int>(map.size());

  nn::ModelGraph<float> model = nn::build_model<float>(model_cfg, 0);
  nn::load_checkpoint(model.params, (fs::path(a.run) / "best.ckpt").string());

  std::string variant = model_cfg.multiscale ? "multiscale" : "baseline";
  std::vector<dg::ReportEntry> entries;

  // Intra evaluation: the recorded source test split.
  dg::SplitPlan plan = dg::read_split_plan((fs::path(a.run) / "splits.txt").string());
  const auto& data_section = run_cfg.section("data");
  std::unordered_map<std::string, io::DatasetManifest> manifests;
  if (data_section.count("sources")) {
    for (const auto& pair : split_list(data_section.at("sources"))) {
      size_t eq = pair.find('=');
      if (eq == std::string::npos) continue;
      manifests[pair.substr(0, eq)] = io::read_manifest(pair.substr(eq + 1));
    }
  }
  train::RecordSet test_set;
  for (const auto& s : plan.sources) {
    auto it = manifests.find(s.domain);
    if (it == manifests.end())
      fail(ErrorCode::InvalidConfig, a.run + ": no manifest recorded for source " + s.domain);
    std::unordered_map<std::string, const io::ManifestEntry*> by_id;
    for (const auto& e : it->second.entries) by_id[e.id] = &e;
    for (const auto& id : s.test) {
      auto rec_it = by_id.find(id);
      if (rec_it == by_id.end()) fail(ErrorCode::InvalidConfig, s.domain + ": missing record " + id);
      io::EcgRecord rec = io::load_entry(*rec_it->second);
      rec.domain = s.domain;
      test_set.records.push_back(std::move(rec));
    }
  }
  dg::filter_scored(test_set.records, map);
  test_set.targets = dg::truth_matrix(test_set.records, map);
  train::EvalResult intra = train::evaluate_split(model, test_set, a.threshold);
  entries.push_back(
      {variant, dg::compute_class_metrics(intra.predictions, test_set.targets, map, "intra")});

  for (const auto& target : split_list(a.targets)) {
    std::string manifest_path = (fs::path(a.data) / target / "manifest.csv").string();
    io::DatasetManifest manifest = io::read_manifest(manifest_path);
    train::RecordSet set;
    for (const auto& e : manifest.entries) {
      io::EcgRecord rec = io::load_entry(e);
      rec.domain = target;
      set.records.push_back(std::move(rec));
    }
    dg::filter_scored(set.records, map);
    set.targets = dg::truth_matrix(set.records, map);
    train::EvalResult ood = train::evaluate_split(model, set, a.threshold);
    entries.push_back(
        {variant, dg::compute_class_metrics(ood.predictions, set.targets, map, "ood:" + target)});
  }

  dg::save_report_csv(entries, map, (fs::path(a.run) / "report.csv").string());
  dg::ComparisonTable table = dg::build_report(entries, map, a.omit);
  {
    std::ofstream out(a.report, std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write report: " + a.report);
    out << dg::render_report_csv(table);
  }
  std::string txt_path = a.report + ".txt";
  {
    std::ofstream out(txt_path, std::ios::trunc);
    out << dg::render_report_text(table);
  }
  std::printf("evaluated %s on intra + %zu targets; report at %s\n", variant.c_str(),
              split_list(a.targets).size(), a.report.c_str());
  return 0;
}

// --- report --------------------------------------------------------------------

struct ReportArgs {
  std::string runs, out;
  bool omit = false;
};

int cmd_report(const ReportArgs& a) {
  std::vector<std::string> run_dirs = split_list(a.runs);
  if (run_dirs.empty()) fail(ErrorCode::InvalidConfig, "--runs must name run directories");

  dg::LabelMap map = dg::LabelMap::load_csv((fs::path(run_dirs[0]) / "labels.txt").string());
  std::vector<dg::ReportEntry> entries;
  for (const auto& dir : run_dirs) {
    dg::LabelMap other = dg::LabelMap::load_csv((fs::path(dir) / "labels.txt").string());
    if (!(other == map))
      fail(ErrorCode::LabelMapMismatch, dir + ": label map differs from " + run_dirs[0]);
    auto run_entries = dg::load_report_csv((fs::path(dir) / "report.csv").string(), nullptr);
    // Loaded rows carry codes only; names come from the shared map.
    for (auto& e : run_entries) {
      for (auto& row : e.report.rows) {
        int idx = map.index_of(row.code);
        if (idx >= 0) row.name = map.at(static_cast<size_t>(idx)).name;
      }
      entries.push_back(std::move(e));
    }
  }

  dg::ComparisonTable table = dg::build_report(entries, map, a.omit);
  std::string csv_path = a.out + ".csv";
  std::string txt_path = a.out + ".txt";
  {
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + csv_path);
    out << dg::render_report_csv(table);
  }
  {
    std::ofstream out(txt_path, std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + txt_path);
    out << dg::render_report_text(table);
  }
  std::printf("%s\n", dg::render_report_text(table).c_str());
  return 0;
}

// --- gradcheck ------------------------------------------------------------------

int cmd_gradcheck(uint64_t seed) {
  auto results = nn::run_op_gradchecks(seed);
  bool ok = true;
  std::printf("%-24s %8s %14s\n", "op", "samples", "max_rel_error");
  for (const auto& r : results) {
    std::printf("%-24s %8d %14.3e\n", r.op.c_str(), r.samples, r.max_rel_error);
    ok = ok && r.max_rel_error < 1e-4;
  }
  std::printf("gradcheck %s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

// --- experiment -----------------------------------------------------------------

int cmd_experiment(const std::string& config_path, const std::string& out_dir, bool have_out) {
  dg::ExperimentConfig cfg = dg::ExperimentConfig::from_file(config_path);
  if (have_out) cfg.out_dir = out_dir;
  dg::ExperimentResult result = dg::run_experiment(cfg);
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("%s\n", dg::render_report_text(result.table).c_str());
  std::printf("report: %s\n", result.report_csv_path.c_str());
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"desk-scale domain-generalization pipeline for 12-lead ECG classification"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "scan a raw dataset directory into a manifest");
  ingest_cmd->add_option("--dir", ingest.dir, "directory of .hea/.dat record pairs")->required();
  ingest_cmd->add_option("--domain", ingest.domain, "domain name for the manifest")->required();
  ingest_cmd->add_option("--manifest", ingest.manifest, "output manifest path")->required();
  ingest_cmd->add_option("--skip-report", ingest.skip_report, "write skipped files here");

  PreprocessArgs pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "run the signal chain over a manifest");
  pre_cmd->add_option("--manifest", pre.manifest, "input manifest")->required();
  pre_cmd->add_option("--out", pre.out, "cache directory for portable records")->required();
  pre_cmd->add_option("--target-fs", pre.cfg.target_fs, "resample target, Hz");
  pre_cmd->add_option("--target-len", pre.cfg.target_len, "fixed length, samples");
  pre_cmd->add_option("--lp-order", pre.cfg.lp_order, "low-pass order");
  pre_cmd->add_option("--lp-cutoff", pre.cfg.lp_cutoff, "low-pass cutoff, Hz");
  pre_cmd->add_option("--notch-freq", pre.cfg.notch_freq, "notch center, Hz");
  pre_cmd->add_option("--notch-q", pre.cfg.notch_q, "notch quality factor");
  pre_cmd->add_option("--norm-lo", pre.cfg.norm_lo, "normalization lower bound");
  pre_cmd->add_option("--norm-hi", pre.cfg.norm_hi, "normalization upper bound");
  pre_cmd->add_flag("--hp-alternative", pre.cfg.hp_alternative,
                    "replace the notch with a 2nd-order high-pass at the same frequency");

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "generate multi-domain synthetic datasets");
  synth_cmd->add_option("--out", synth_args.out, "output directory")->required();
  synth_cmd->add_option("--domains", synth_args.domains, "number of domains");
  synth_cmd->add_option("--classes", synth_args.classes, "number of synthetic classes");
  synth_cmd->add_option("--per-domain", synth_args.per_domain, "records per domain");
  synth_cmd->add_option("--seed", synth_args.seed, "generation seed");
  synth_cmd->add_option("--spec", synth_args.spec_file, "per-domain override file");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train one model variant");
  train_cmd->add_option("--config", train_args.config, "model/trainer config file");
  train_cmd->add_option("--data", train_args.data, "cache directory")->required();
  train_cmd->add_option("--sources", train_args.sources, "comma list of source domains")
      ->required();
  train_cmd->add_option("--out", train_args.out, "run directory")->required();
  auto* seed_opt = train_cmd->add_option("--seed", train_args.seed, "run seed");
  train_cmd->add_flag("--deterministic", train_args.deterministic, "force serial determinism");
  train_cmd->add_option("--variant", train_args.variant, "multiscale or baseline");
  train_cmd->add_option("--epochs", train_args.epochs, "override epochs");
  train_cmd->add_option("--batch-size", train_args.batch_size, "override batch size");
  train_cmd->add_option("--lr", train_args.lr, "override learning rate");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a run on intra and target domains");
  eval_cmd->add_option("--run", eval_args.run, "run directory")->required();
  eval_cmd->add_option("--targets", eval_args.targets, "comma list of target domains");
  eval_cmd->add_option("--report", eval_args.report, "output report CSV path")->required();
  eval_cmd->add_option("--data", eval_args.data, "cache directory holding target manifests");
  eval_cmd->add_option("--threshold", eval_args.threshold, "decision threshold");
  eval_cmd->add_flag("--omit-unrecognized", eval_args.omit,
                     "drop classes no model predicted anywhere");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "merge run reports into a comparison table");
  report_cmd->add_option("--runs", report_args.runs, "comma list of run directories")->required();
  report_cmd->add_option("--out", report_args.out, "output path prefix")->required();
  report_cmd->add_flag("--omit-unrecognized", report_args.omit,
                       "drop classes no model predicted anywhere");

  uint64_t gradcheck_seed = env_seed();
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "sampling seed");

  std::string exp_config, exp_out;
  auto* exp_cmd = app.add_subcommand("experiment", "run the full train/evaluate protocol");
  exp_cmd->add_option("--config", exp_config, "experiment config file")->required();
  auto* exp_out_opt = exp_cmd->add_option("--out", exp_out, "run directory (overrides config)");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*ingest_cmd) return cmd_ingest(ingest);
    if (*pre_cmd) return cmd_preprocess(pre);
    if (*synth_cmd) return cmd_synth(synth_args);
    if (*train_cmd) {
      train_args.seed_given = seed_opt->count() > 0;
      return cmd_train(train_args);
    }
    if (*eval_cmd) return cmd_eval(eval_args);
    if (*report_cmd) return cmd_report(report_args);
    if (*gradcheck_cmd) return cmd_gradcheck(gradcheck_seed);
    if (*exp_cmd) return cmd_experiment(exp_config, exp_out, exp_out_opt->count() > 0);
  } catch (const Error& e) {
    std::fprintf(stderr, "%s: %s\n", e.code_name(), e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal_error: %s\n", e.what());
    return 1;
  }
  return 2;
}

}  // namespace ecgdg::cli
