#pragma once

#include <string>
#include <vector>

#include "ecgdg/dsp.hpp"
#include "ecgdg/harness.hpp"
#include "ecgdg/model.hpp"
#include "ecgdg/trainer.hpp"

namespace ecgdg::dg {

// The full protocol for one run directory: filter scored labels, split
// sources 70/10/20, train each variant, evaluate on the source test split
// (intra) and every full target domain (ood), and emit the comparison
// report. Reproducible from (config, seed); completed variants are skipped
// on rerun over the same directory.
struct ExperimentConfig {
  std::vector<DomainSpec> sources;
  std::vector<DomainSpec> targets;
  std::string label_map_path;  // empty = built-in default map
  bool preprocess_enabled = true;
  dsp::PreprocessConfig preprocess;
  nn::ModelConfig model;
  train::TrainConfig trainer;
  std::vector<std::string> variants = {"multiscale", "baseline"};
  double threshold = 0.5;
  bool omit_unrecognized = false;
  uint64_t seed = 7;
  bool deterministic = true;
  std::string out_dir;

  static ExperimentConfig from_file(const std::string& path);
  std::string render() const;
  void validate() const;
};

struct ExperimentResult {
  ComparisonTable table;
  std::string report_csv_path;
  std::string report_txt_path;
  std::vector<std::string> warnings;
  std::vector<ReportEntry> entries;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace ecgdg::dg
