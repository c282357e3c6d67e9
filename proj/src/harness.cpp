#include "ecgdg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ecgdg/errors.hpp"
#include "ecgdg/rng.hpp"

namespace ecgdg::dg {

FilterStats filter_scored(std::vector<io::EcgRecord>& records, const LabelMap& map) {
  if (map.size() == 0) fail(ErrorCode::InvalidConfig, "empty label map");
  FilterStats stats;
  std::vector<io::EcgRecord> kept;
  kept.reserve(records.size());
  for (auto& rec : records) {
    std::set<std::string> scored;
    for (const auto& code : rec.labels) {
      int idx = map.index_of(code);
      if (idx >= 0)
        scored.insert(map.at(static_cast<size_t>(idx)).code);  // aliases fold into primary
      else
        ++stats.labels_dropped;
    }
    if (scored.empty()) {
      ++stats.records_dropped;
      continue;
    }
    rec.labels.assign(scored.begin(), scored.end());
    kept.push_back(std::move(rec));
    ++stats.records_kept;
  }
  records = std::move(kept);
  return stats;
}

BinaryMatrix truth_matrix(const std::vector<io::EcgRecord>& records, const LabelMap& map) {
  BinaryMatrix m(static_cast<int64_t>(records.size()), static_cast<int64_t>(map.size()));
  for (size_t r = 0; r < records.size(); ++r)
    for (const auto& code : records[r].labels) {
      int idx = map.index_of(code);
      if (idx >= 0) m.at(static_cast<int64_t>(r), idx) = 1;
    }
  return m;
}

SplitPlan make_splits(const std::vector<std::pair<std::string, std::vector<std::string>>>& sources,
                      uint64_t seed) {
  SplitPlan plan;
  plan.seed = seed;
  for (const auto& [domain, raw_ids] : sources) {
    if (raw_ids.empty()) fail(ErrorCode::EmptySource, domain + ": no records to split");
    std::vector<std::string> ids = raw_ids;
    std::sort(ids.begin(), ids.end());  // fixed base order, whatever the caller had

    Philox rng = named_stream(seed, "split/" + domain);
    for (size_t i = ids.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(rng.next_below(i));
      std::swap(ids[i - 1], ids[j]);
    }

    int64_t n = static_cast<int64_t>(ids.size());
    int64_t n_val = std::llround(0.1 * static_cast<double>(n));
    int64_t n_test = std::llround(0.2 * static_cast<double>(n));
    int64_t n_train = n - n_val - n_test;  // remainder-to-train policy
    if (n_train < 0) fail(ErrorCode::EmptySource, domain + ": too few records to split");

    SplitPlan::SourceSplit split;
    split.domain = domain;
    split.train.assign(ids.begin(), ids.begin() + n_train);
    split.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
    split.test.assign(ids.begin() + n_train + n_val, ids.end());
    plan.sources.push_back(std::move(split));
  }
  return plan;
}

void write_split_plan(const SplitPlan& plan, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write split plan: " + path);
  out << "# seed: " << plan.seed << "\n";
  out << "role,domain,split,id\n";
  for (const auto& s : plan.sources) {
    for (const auto& id : s.train) out << "source," << s.domain << ",train," << id << "\n";
    for (const auto& id : s.val) out << "source," << s.domain << ",val," << id << "\n";
    for (const auto& id : s.test) out << "source," << s.domain << ",test," << id << "\n";
  }
  for (const auto& [domain, ids] : plan.targets)
    for (const auto& id : ids) out << "target," << domain << ",full," << id << "\n";
}

SplitPlan read_split_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open split plan: " + path);
  SplitPlan plan;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      size_t colon = line.find(':');
      if (colon != std::string::npos)
        plan.seed = static_cast<uint64_t>(std::strtoull(line.c_str() + colon + 1, nullptr, 10));
      continue;
    }
    if (line.rfind("role,", 0) == 0) continue;
    std::vector<std::string> cols;
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 4) fail(ErrorCode::IoFailure, path + ": bad split row: " + line);
    if (cols[0] == "source") {
      auto it = std::find_if(plan.sources.begin(), plan.sources.end(),
                             [&](const auto& s) { return s.domain == cols[1]; });
      if (it == plan.sources.end()) {
        plan.sources.push_back({cols[1], {}, {}, {}});
        it = plan.sources.end() - 1;
      }
      if (cols[2] == "train") it->train.push_back(cols[3]);
      else if (cols[2] == "val") it->val.push_back(cols[3]);
      else if (cols[2] == "test") it->test.push_back(cols[3]);
    } else {
      auto it = std::find_if(plan.targets.begin(), plan.targets.end(),
                             [&](const auto& t) { return t.first == cols[1]; });
      if (it == plan.targets.end()) {
        plan.targets.push_back({cols[1], {}});
        it = plan.targets.end() - 1;
      }
      it->second.push_back(cols[3]);
    }
  }
  return plan;
}

double f1_score(double precision, double recall) {
  double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

ClassReport compute_class_metrics(const BinaryMatrix& predictions, const BinaryMatrix& truths,
                                  const LabelMap& map, const std::string& eval_tag) {
  if (predictions.rows != truths.rows || predictions.cols != truths.cols)
    fail(ErrorCode::ShapeMismatch, "metrics: prediction and truth shapes differ");
  if (predictions.cols != static_cast<int64_t>(map.size()))
    fail(ErrorCode::ShapeMismatch, "metrics: column count differs from label map size");

  ClassReport report;
  report.eval_tag = eval_tag;
  for (int64_t c = 0; c < predictions.cols; ++c) {
    int64_t tp = 0, fp = 0, fn = 0;
    for (int64_t r = 0; r < predictions.rows; ++r) {
      bool p = predictions.at(r, c) != 0;
      bool t = truths.at(r, c) != 0;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    ClassRow row;
    row.code = map.at(static_cast<size_t>(c)).code;
    row.name = map.at(static_cast<size_t>(c)).name;
    row.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    row.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    row.f1 = f1_score(row.precision, row.recall);
    row.support = tp + fn;
    row.predicted_positives = tp + fp;
    report.rows.push_back(std::move(row));
  }
  return report;
}

double micro_f1(const BinaryMatrix& predictions, const BinaryMatrix& truths) {
  if (predictions.rows != truths.rows || predictions.cols != truths.cols)
    fail(ErrorCode::ShapeMismatch, "micro_f1: shapes differ");
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < predictions.data.size(); ++i) {
    bool p = predictions.data[i] != 0;
    bool t = truths.data[i] != 0;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  int64_t denom = 2 * tp + fp + fn;
  return denom > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
}

ComparisonTable build_report(const std::vector<ReportEntry>& entries, const LabelMap& map,
                             bool omit_unrecognized) {
  if (entries.empty()) fail(ErrorCode::InvalidConfig, "build_report needs at least one entry");
  for (const auto& e : entries) {
    if (e.report.rows.size() != map.size())
      fail(ErrorCode::LabelMapMismatch,
           e.model + "/" + e.report.eval_tag + ": row count differs from label map");
    for (size_t c = 0; c < map.size(); ++c)
      if (e.report.rows[c].code != map.at(c).code)
        fail(ErrorCode::LabelMapMismatch,
             e.model + "/" + e.report.eval_tag + ": class order differs from label map");
  }

  ComparisonTable table;
  table.entries = entries;
  for (size_t c = 0; c < map.size(); ++c) {
    bool recognized = false;
    for (const auto& e : entries) recognized = recognized || e.report.rows[c].predicted_positives > 0;
    if (omit_unrecognized && !recognized) continue;
    table.class_codes.push_back(map.at(c).code);
    table.class_names.push_back(map.at(c).name);
  }
  return table;
}

namespace {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt2(double v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const ClassRow* find_row(const ClassReport& r, const std::string& code) {
  for (const auto& row : r.rows)
    if (row.code == code) return &row;
  return nullptr;
}

}  // namespace

std::string render_report_csv(const ComparisonTable& table) {
  std::string out = "class,model,eval_tag,precision,recall,f1,support,predicted_positives\n";
  for (const auto& code : table.class_codes) {
    for (const auto& e : table.entries) {
      const ClassRow* row = find_row(e.report, code);
      out += code + "," + e.model + "," + e.report.eval_tag + "," + fmt_full(row->precision) +
             "," + fmt_full(row->recall) + "," + fmt_full(row->f1) + "," +
             std::to_string(row->support) + "," + std::to_string(row->predicted_positives) + "\n";
    }
  }
  return out;
}

std::string render_report_text(const ComparisonTable& table) {
  size_t name_w = 5;
  for (const auto& n : table.class_names) name_w = std::max(name_w, n.size());

  auto intra_f1 = [&](const std::string& model, const std::string& code) -> const ClassRow* {
    for (const auto& e : table.entries)
      if (e.model == model && e.report.eval_tag == "intra") return find_row(e.report, code);
    return nullptr;
  };

  // One column group per entry: P R F1, plus the intra->OOD F1 delta when the
  // entry is an OOD evaluation and the same model has an intra entry.
  struct Group {
    std::string head, sub;
    std::vector<std::string> cells;
    size_t width = 0;
  };
  std::vector<Group> groups;
  for (const auto& e : table.entries) {
    bool ood = e.report.eval_tag.rfind("ood", 0) == 0;
    Group g;
    g.head = e.model + " " + e.report.eval_tag;
    g.sub = ood ? "P     R     F1    dF1" : "P     R     F1";
    for (const auto& code : table.class_codes) {
      const ClassRow* row = find_row(e.report, code);
      std::string cell = fmt2(row->precision) + "  " + fmt2(row->recall) + "  " + fmt2(row->f1);
      if (ood) {
        const ClassRow* base = intra_f1(e.model, code);
        if (base) {
          char buf[16];
          std::snprintf(buf, sizeof(buf), "%+.2f", row->f1 - base->f1);
          cell += std::string("  ") + buf;
        } else {
          cell += "    -  ";
        }
      }
      g.cells.push_back(std::move(cell));
    }
    g.width = std::max(g.head.size(), g.sub.size());
    for (const auto& c : g.cells) g.width = std::max(g.width, c.size());
    groups.push_back(std::move(g));
  }

  auto pad = [](const std::string& s, size_t w) { return s + std::string(w - s.size(), ' '); };
  std::ostringstream out;
  out << std::string(name_w, ' ');
  for (const auto& g : groups) out << " | " << pad(g.head, g.width);
  out << "\n" << std::string(name_w, ' ');
  for (const auto& g : groups) out << " | " << pad(g.sub, g.width);
  out << "\n";
  for (size_t i = 0; i < table.class_codes.size(); ++i) {
    out << pad(table.class_names[i], name_w);
    for (const auto& g : groups) out << " | " << pad(g.cells[i], g.width);
    out << "\n";
  }
  return out.str();
}

void save_report_csv(const std::vector<ReportEntry>& entries, const LabelMap& map,
                     const std::string& path) {
  ComparisonTable table = build_report(entries, map, false);
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write report: " + path);
  out << render_report_csv(table);
}

std::vector<ReportEntry> load_report_csv(const std::string& path, LabelMap* /*map_out*/) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open report: " + path);
  std::vector<ReportEntry> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      continue;
    }
    std::vector<std::string> cols;
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 8) fail(ErrorCode::IoFailure, path + ": bad report row: " + line);
    auto it = std::find_if(entries.begin(), entries.end(), [&](const ReportEntry& e) {
      return e.model == cols[1] && e.report.eval_tag == cols[2];
    });
    if (it == entries.end()) {
      entries.push_back({cols[1], {cols[2], {}}});
      it = entries.end() - 1;
    }
    ClassRow row;
    row.code = cols[0];
    row.precision = std::atof(cols[3].c_str());
    row.recall = std::atof(cols[4].c_str());
    row.f1 = std::atof(cols[5].c_str());
    row.support = std::atoll(cols[6].c_str());
    row.predicted_positives = std::atoll(cols[7].c_str());
    it->report.rows.push_back(std::move(row));
  }
  return entries;
}

}  // namespace ecgdg::dg
