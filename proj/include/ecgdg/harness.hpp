#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ecgdg/labels.hpp"
#include "ecgdg/matrix.hpp"
#include "ecgdg/record.hpp"

namespace ecgdg::dg {

enum class DomainRole { Source, Target };

struct DomainSpec {
  std::string name;
  DomainRole role = DomainRole::Source;
  std::string manifest_path;
};

struct FilterStats {
  int64_t records_kept = 0;
  int64_t records_dropped = 0;  // only unscored labels
  int64_t labels_dropped = 0;   // unscored codes removed from kept records
};

// Maps every label through the map (resolving merged aliases to primary
// codes), drops unscored codes, and drops records left with no scored label.
FilterStats filter_scored(std::vector<io::EcgRecord>& records, const LabelMap& map);

// Multi-hot truth matrix aligned with the label map order.
BinaryMatrix truth_matrix(const std::vector<io::EcgRecord>& records, const LabelMap& map);

struct SplitPlan {
  struct SourceSplit {
    std::string domain;
    std::vector<std::string> train, val, test;
  };
  std::vector<SourceSplit> sources;
  std::vector<std::pair<std::string, std::vector<std::string>>> targets;  // full domains
  uint64_t seed = 0;
};

// Per-source shuffle keyed by (seed, domain), then a contiguous cut with
// val = round(0.1 n), test = round(0.2 n), train = remainder.
SplitPlan make_splits(const std::vector<std::pair<std::string, std::vector<std::string>>>& sources,
                      uint64_t seed);

void write_split_plan(const SplitPlan& plan, const std::string& path);
SplitPlan read_split_plan(const std::string& path);

struct ClassRow {
  std::string code;
  std::string name;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t support = 0;             // ground-truth positives
  int64_t predicted_positives = 0;
};

struct ClassReport {
  std::string eval_tag;  // "intra" or "ood:<domain>"
  std::vector<ClassRow> rows;
};

// Harmonic mean with the 0/0 -> 0 convention.
double f1_score(double precision, double recall);

// Per-class precision/recall/F1 with zero conventions on empty denominators.
ClassReport compute_class_metrics(const BinaryMatrix& predictions, const BinaryMatrix& truths,
                                  const LabelMap& map, const std::string& eval_tag);

// Micro-averaged F1 over all (record, class) cells.
double micro_f1(const BinaryMatrix& predictions, const BinaryMatrix& truths);

struct ReportEntry {
  std::string model;  // variant name
  ClassReport report;
};

struct ComparisonTable {
  std::vector<std::string> class_codes;  // after any omission
  std::vector<std::string> class_names;
  std::vector<ReportEntry> entries;      // column groups, in input order
};

// Joins per-class rows across (model, eval_tag) pairs. With omit_unrecognized
// set, classes where every entry has zero predicted positives are dropped.
// Entries must share the label map.
ComparisonTable build_report(const std::vector<ReportEntry>& entries, const LabelMap& map,
                             bool omit_unrecognized);

std::string render_report_csv(const ComparisonTable& table);
std::string render_report_text(const ComparisonTable& table);

void save_report_csv(const std::vector<ReportEntry>& entries, const LabelMap& map,
                     const std::string& path);
std::vector<ReportEntry> load_report_csv(const std::string& path, LabelMap* map_out);

}  // namespace ecgdg::dg
