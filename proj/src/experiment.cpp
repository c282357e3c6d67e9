#include "ecgdg/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ecgdg/config.hpp"
#include "ecgdg/dataset.hpp"
#include "ecgdg/errors.hpp"
#include "ecgdg/parallel.hpp"

namespace fs = std::filesystem;

namespace ecgdg::dg {

namespace {

std::vector<DomainSpec> parse_domain_list(const std::string& value, DomainRole role,
                                          const std::string& what) {
  std::vector<DomainSpec> out;
  std::string cur;
  std::istringstream ss(value);
  while (std::getline(ss, cur, ',')) {
    if (cur.empty()) continue;
    size_t eq = cur.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::InvalidConfig, what + ": expected name=manifest_path, got '" + cur + "'");
    out.push_back({cur.substr(0, eq), role, cur.substr(eq + 1)});
  }
  return out;
}

std::string render_domain_list(const std::vector<DomainSpec>& specs) {
  std::string out;
  for (size_t i = 0; i < specs.size(); ++i) {
    if (i) out += ",";
    out += specs[i].name + "=" + specs[i].manifest_path;
  }
  return out;
}

double get_double(const std::map<std::string, std::string>& kv, const char* key, double fb) {
  auto it = kv.find(key);
  return it == kv.end() ? fb : std::atof(it->second.c_str());
}

}  // namespace

void ExperimentConfig::validate() const {
  if (sources.empty()) fail(ErrorCode::InvalidConfig, "experiment needs at least one source domain");
  if (targets.empty()) fail(ErrorCode::InvalidConfig, "experiment needs at least one target domain");
  std::set<std::string> names;
  for (const auto& d : sources)
    if (!names.insert(d.name).second) fail(ErrorCode::InvalidConfig, "duplicate domain " + d.name);
  for (const auto& d : targets)
    if (!names.insert(d.name).second) fail(ErrorCode::InvalidConfig, "duplicate domain " + d.name);
  if (variants.empty()) fail(ErrorCode::InvalidConfig, "experiment needs at least one variant");
  for (const auto& v : variants)
    if (v != "multiscale" && v != "baseline")
      fail(ErrorCode::InvalidConfig, "unknown variant '" + v + "'");
  if (out_dir.empty()) fail(ErrorCode::InvalidConfig, "experiment out_dir not set");
  if (threshold < 0.0 || threshold > 1.0)
    fail(ErrorCode::InvalidConfig, "threshold must be in [0,1]");
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  KeyValueFile kv = KeyValueFile::parse_file(path);
  for (const auto& [name, section] : kv.sections) {
    (void)section;
    static const std::set<std::string> known = {"experiment", "domains", "labels",
                                                "preprocess", "model", "trainer"};
    if (!known.count(name))
      fail(ErrorCode::UnknownKey, path + ": unknown section [" + name + "]");
  }

  ExperimentConfig cfg;
  const auto& exp = kv.section("experiment");
  require_known_keys(exp,
                     {"seed", "deterministic", "variants", "threshold", "omit_unrecognized",
                      "out_dir"},
                     path + " [experiment]");
  if (exp.count("seed")) cfg.seed = std::strtoull(exp.at("seed").c_str(), nullptr, 10);
  if (exp.count("deterministic")) cfg.deterministic = exp.at("deterministic") == "true";
  if (exp.count("threshold")) cfg.threshold = std::atof(exp.at("threshold").c_str());
  if (exp.count("omit_unrecognized")) cfg.omit_unrecognized = exp.at("omit_unrecognized") == "true";
  if (exp.count("out_dir")) cfg.out_dir = exp.at("out_dir");
  if (exp.count("variants")) {
    cfg.variants.clear();
    std::istringstream ss(exp.at("variants"));
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) cfg.variants.push_back(tok);
  }

  const auto& domains = kv.section("domains");
  require_known_keys(domains, {"source", "target"}, path + " [domains]");
  if (domains.count("source"))
    cfg.sources = parse_domain_list(domains.at("source"), DomainRole::Source, path);
  if (domains.count("target"))
    cfg.targets = parse_domain_list(domains.at("target"), DomainRole::Target, path);

  const auto& labels = kv.section("labels");
  require_known_keys(labels, {"map"}, path + " [labels]");
  if (labels.count("map")) cfg.label_map_path = labels.at("map");

  const auto& pre = kv.section("preprocess");
  require_known_keys(pre,
                     {"enabled", "target_fs", "target_len", "lp_order", "lp_cutoff", "notch_freq",
                      "notch_q", "norm_lo", "norm_hi", "hp_alternative"},
                     path + " [preprocess]");
  if (pre.count("enabled")) cfg.preprocess_enabled = pre.at("enabled") == "true";
  cfg.preprocess.target_fs = static_cast<int>(get_double(pre, "target_fs", 500));
  cfg.preprocess.target_len = static_cast<int64_t>(get_double(pre, "target_len", 5000));
  cfg.preprocess.lp_order = static_cast<int>(get_double(pre, "lp_order", 3));
  cfg.preprocess.lp_cutoff = get_double(pre, "lp_cutoff", 20.0);
  cfg.preprocess.notch_freq = get_double(pre, "notch_freq", 0.01);
  cfg.preprocess.notch_q = get_double(pre, "notch_q", 0.707);
  cfg.preprocess.norm_lo = get_double(pre, "norm_lo", -1.0);
  cfg.preprocess.norm_hi = get_double(pre, "norm_hi", 1.0);
  if (pre.count("hp_alternative")) cfg.preprocess.hp_alternative = pre.at("hp_alternative") == "true";

  if (kv.has_section("model")) cfg.model = nn::ModelConfig::from_key_values(kv.section("model"));
  if (kv.has_section("trainer"))
    cfg.trainer = train::TrainConfig::from_key_values(kv.section("trainer"));
  return cfg;
}

std::string ExperimentConfig::render() const {
  KeyValueFile kv;
  kv.set("experiment", "seed", std::to_string(seed));
  kv.set("experiment", "deterministic", deterministic ? "true" : "false");
  {
    std::string v;
    for (size_t i = 0; i < variants.size(); ++i) {
      if (i) v += ",";
      v += variants[i];
    }
    kv.set("experiment", "variants", v);
  }
  kv.set("experiment", "threshold", std::to_string(threshold));
  kv.set("experiment", "omit_unrecognized", omit_unrecognized ? "true" : "false");
  kv.set("experiment", "out_dir", out_dir);
  kv.set("domains", "source", render_domain_list(sources));
  kv.set("domains", "target", render_domain_list(targets));
  kv.set("labels", "map", label_map_path);
  kv.set("preprocess", "enabled", preprocess_enabled ? "true" : "false");
  kv.set("preprocess", "target_fs", std::to_string(preprocess.target_fs));
  kv.set("preprocess", "target_len", std::to_string(preprocess.target_len));
  kv.set("preprocess", "lp_order", std::to_string(preprocess.lp_order));
  kv.set("preprocess", "lp_cutoff", std::to_string(preprocess.lp_cutoff));
  kv.set("preprocess", "notch_freq", std::to_string(preprocess.notch_freq));
  kv.set("preprocess", "notch_q", std::to_string(preprocess.notch_q));
  kv.set("preprocess", "norm_lo", std::to_string(preprocess.norm_lo));
  kv.set("preprocess", "norm_hi", std::to_string(preprocess.norm_hi));
  kv.set("preprocess", "hp_alternative", preprocess.hp_alternative ? "true" : "false");
  for (const auto& [k, v] : model.to_key_values()) kv.set("model", k, v);
  for (const auto& [k, v] : trainer.to_key_values()) kv.set("trainer", k, v);
  return kv.render();
}

namespace {

struct DomainData {
  std::string name;
  std::vector<io::EcgRecord> records;
  std::unordered_map<std::string, size_t> by_id;
  std::set<std::string> observed_classes;
};

DomainData load_domain(const DomainSpec& spec, const LabelMap& map,
                       const dsp::PreprocessConfig& pre, bool preprocess_enabled,
                       std::vector<std::string>& warnings) {
  DomainData data;
  data.name = spec.name;
  io::DatasetManifest manifest = io::read_manifest(spec.manifest_path);
  if (manifest.entries.empty())
    fail(ErrorCode::EmptyDataset, spec.name + ": manifest " + spec.manifest_path + " is empty");
  data.records.resize(manifest.entries.size());
  // Record loading and preprocessing are independent per entry.
  parallel_for(static_cast<int64_t>(manifest.entries.size()), [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      io::EcgRecord rec = io::load_entry(manifest.entries[static_cast<size_t>(i)]);
      rec.domain = spec.name;
      if (preprocess_enabled) rec = dsp::preprocess_record(rec, pre);
      data.records[static_cast<size_t>(i)] = std::move(rec);
    }
  });

  FilterStats stats = filter_scored(data.records, map);
  if (stats.records_dropped > 0)
    warnings.push_back(spec.name + ": dropped " + std::to_string(stats.records_dropped) +
                       " records with only unscored labels");
  if (data.records.empty())
    fail(ErrorCode::EmptyDataset, spec.name + ": no records left after scored-label filtering");

  for (size_t i = 0; i < data.records.size(); ++i) {
    data.by_id[data.records[i].id] = i;
    for (const auto& code : data.records[i].labels) data.observed_classes.insert(code);
  }
  return data;
}

train::RecordSet collect(const std::vector<DomainData>& domains,
                         const std::vector<std::pair<std::string, std::vector<std::string>>>& ids,
                         const LabelMap& map) {
  train::RecordSet set;
  for (const auto& [domain, id_list] : ids) {
    const DomainData* d = nullptr;
    for (const auto& dd : domains)
      if (dd.name == domain) d = &dd;
    if (!d) fail(ErrorCode::InvalidConfig, "unknown domain in split: " + domain);
    for (const auto& id : id_list) {
      auto it = d->by_id.find(id);
      if (it == d->by_id.end()) fail(ErrorCode::InvalidConfig, domain + ": unknown record " + id);
      set.records.push_back(d->records[it->second]);
    }
  }
  set.targets = truth_matrix(set.records, map);
  return set;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.deterministic) set_max_threads(1);
  if (cfg.preprocess_enabled) cfg.preprocess.validate();

  fs::create_directories(cfg.out_dir);
  LabelMap map =
      cfg.label_map_path.empty() ? default_label_map() : LabelMap::load_csv(cfg.label_map_path);
  map.save_csv((fs::path(cfg.out_dir) / "labels.txt").string());

  ExperimentResult result;

  std::vector<DomainData> source_data, target_data;
  for (const auto& d : cfg.sources)
    source_data.push_back(
        load_domain(d, map, cfg.preprocess, cfg.preprocess_enabled, result.warnings));
  for (const auto& d : cfg.targets)
    target_data.push_back(
        load_domain(d, map, cfg.preprocess, cfg.preprocess_enabled, result.warnings));

  std::set<std::string> source_classes;
  for (const auto& d : source_data)
    source_classes.insert(d.observed_classes.begin(), d.observed_classes.end());
  for (const auto& d : target_data) {
    bool overlap = false;
    for (const auto& c : d.observed_classes) overlap = overlap || source_classes.count(c) > 0;
    if (!overlap)
      result.warnings.push_back(d.name +
                                ": no scored class overlap with the source domains; evaluation "
                                "proceeds on the shared label space");
  }

  std::vector<std::pair<std::string, std::vector<std::string>>> source_ids;
  for (const auto& d : source_data) {
    std::vector<std::string> ids;
    for (const auto& r : d.records) ids.push_back(r.id);
    source_ids.push_back({d.name, std::move(ids)});
  }
  SplitPlan plan = make_splits(source_ids, cfg.seed);
  for (const auto& d : target_data) {
    std::vector<std::string> ids;
    for (const auto& r : d.records) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    plan.targets.push_back({d.name, std::move(ids)});
  }
  write_split_plan(plan, (fs::path(cfg.out_dir) / "splits.txt").string());

  {
    std::ofstream out((fs::path(cfg.out_dir) / "config.txt").string(), std::ios::trunc);
    out << cfg.render();
  }

  std::vector<std::pair<std::string, std::vector<std::string>>> train_ids, val_ids, test_ids;
  for (const auto& s : plan.sources) {
    train_ids.push_back({s.domain, s.train});
    val_ids.push_back({s.domain, s.val});
    test_ids.push_back({s.domain, s.test});
  }
  train::RecordSet train_set = collect(source_data, train_ids, map);
  train::RecordSet val_set = collect(source_data, val_ids, map);
  train::RecordSet test_set = collect(source_data, test_ids, map);

  nn::ModelConfig model_cfg = cfg.model;
  model_cfg.num_classes = static_cast<int>(map.size());

  train::TrainConfig trainer_cfg = cfg.trainer;
  trainer_cfg.deterministic = trainer_cfg.deterministic || cfg.deterministic;
  if (trainer_cfg.seed == 0) trainer_cfg.seed = cfg.seed;

  for (const auto& variant : cfg.variants) {
    nn::ModelConfig vcfg = model_cfg;
    vcfg.multiscale = variant == "multiscale";
    vcfg.validate();

    std::string vdir = (fs::path(cfg.out_dir) / variant).string();
    fs::create_directories(vdir);
    std::string done_path = (fs::path(vdir) / "DONE").string();
    std::string ckpt_path = (fs::path(vdir) / "best.ckpt").string();

    nn::ModelGraph<float> model = nn::build_model<float>(vcfg, trainer_cfg.seed);
    if (fs::exists(done_path) && fs::exists(ckpt_path)) {
      result.warnings.push_back(variant + ": found completed training, reusing " + ckpt_path);
    } else {
      KeyValueFile echo;
      for (const auto& [k, v] : vcfg.to_key_values()) echo.set("model", k, v);
      for (const auto& [k, v] : trainer_cfg.to_key_values()) echo.set("trainer", k, v);
      echo.save((fs::path(vdir) / "config.txt").string());
      map.save_csv((fs::path(vdir) / "labels.txt").string());

      train::train(model, train_set, val_set, trainer_cfg, vdir);
      std::ofstream done(done_path, std::ios::trunc);
      done << "ok\n";
    }

    // Evaluate the best-val checkpoint, not the last epoch's weights.
    nn::load_checkpoint(model.params, ckpt_path);

    std::vector<ReportEntry> variant_entries;
    train::EvalResult intra = train::evaluate_split(model, test_set, cfg.threshold);
    variant_entries.push_back(
        {variant, compute_class_metrics(intra.predictions, test_set.targets, map, "intra")});

    for (const auto& d : target_data) {
      std::vector<std::pair<std::string, std::vector<std::string>>> tid;
      for (const auto& [name, ids] : plan.targets)
        if (name == d.name) tid.push_back({name, ids});
      train::RecordSet target_set = collect(target_data, tid, map);
      train::EvalResult ood = train::evaluate_split(model, target_set, cfg.threshold);
      variant_entries.push_back(
          {variant,
           compute_class_metrics(ood.predictions, target_set.targets, map, "ood:" + d.name)});
    }

    save_report_csv(variant_entries, map, (fs::path(vdir) / "report.csv").string());
    for (auto& e : variant_entries) result.entries.push_back(std::move(e));
  }

  result.table = build_report(result.entries, map, cfg.omit_unrecognized);
  result.report_csv_path = (fs::path(cfg.out_dir) / "report.csv").string();
  result.report_txt_path = (fs::path(cfg.out_dir) / "report.txt").string();
  {
    std::ofstream out(result.report_csv_path, std::ios::trunc);
    out << render_report_csv(result.table);
  }
  {
    std::ofstream out(result.report_txt_path, std::ios::trunc);
    out << render_report_text(result.table);
  }
  return result;
}

}  // namespace ecgdg::dg
