#include "ecgdg/labels.hpp"

#include <fstream>
#include <sstream>

#include "ecgdg/errors.hpp"

namespace ecgdg::dg {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

LabelMap LabelMap::parse_csv(const std::string& text, const std::string& origin) {
  LabelMap map;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  std::vector<std::pair<std::string, std::string>> merges;  // alias -> primary
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (first && line.rfind("code,", 0) == 0) {
      first = false;
      continue;
    }
    first = false;
    std::vector<std::string> cols;
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, ',')) cols.push_back(trim(tok));
    while (cols.size() < 3) cols.push_back("");
    if (cols[0].empty()) fail(ErrorCode::InvalidConfig, origin + ": label row missing code");
    if (!cols[2].empty()) {
      merges.emplace_back(cols[0], cols[2]);
      continue;
    }
    if (map.index_.count(cols[0]))
      fail(ErrorCode::InvalidConfig, origin + ": duplicate label code " + cols[0]);
    map.index_[cols[0]] = static_cast<int>(map.classes_.size());
    map.classes_.push_back({cols[0], cols[1]});
  }
  for (const auto& [alias, primary] : merges) {
    auto it = map.index_.find(primary);
    if (it == map.index_.end())
      fail(ErrorCode::InvalidConfig, origin + ": merge target " + primary + " is not a class");
    if (map.index_.count(alias))
      fail(ErrorCode::InvalidConfig, origin + ": duplicate label code " + alias);
    map.index_[alias] = it->second;
  }
  if (map.classes_.empty()) fail(ErrorCode::InvalidConfig, origin + ": empty label map");
  return map;
}

LabelMap LabelMap::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open label map: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path);
}

LabelMap LabelMap::from_classes(std::vector<LabelClass> classes) {
  LabelMap map;
  for (auto& c : classes) {
    if (map.index_.count(c.code)) fail(ErrorCode::InvalidConfig, "duplicate label code " + c.code);
    map.index_[c.code] = static_cast<int>(map.classes_.size());
    map.classes_.push_back(std::move(c));
  }
  if (map.classes_.empty()) fail(ErrorCode::InvalidConfig, "empty label map");
  return map;
}

std::string LabelMap::to_csv() const {
  std::string out = "code,name,merge_into\n";
  // Aliases are re-derived: enumerate index entries pointing at a class with
  // a different code.
  for (const auto& c : classes_) out += c.code + "," + c.name + ",\n";
  for (const auto& [code, idx] : index_) {
    if (code != classes_[static_cast<size_t>(idx)].code)
      out += code + "," + classes_[static_cast<size_t>(idx)].name + "," +
             classes_[static_cast<size_t>(idx)].code + "\n";
  }
  return out;
}

void LabelMap::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write label map: " + path);
  out << to_csv();
}

bool LabelMap::operator==(const LabelMap& o) const {
  if (classes_.size() != o.classes_.size()) return false;
  for (size_t i = 0; i < classes_.size(); ++i)
    if (classes_[i].code != o.classes_[i].code || classes_[i].name != o.classes_[i].name)
      return false;
  return index_ == o.index_;
}

LabelMap default_label_map() {
  return LabelMap::from_classes({
      {"270492004", "1st degree av block"},
      {"164889003", "atrial fibrillation"},
      {"164890007", "atrial flutter"},
      {"426627000", "bradycardia"},
      {"713427006", "complete right bundle branch block"},
      {"713426002", "incomplete right bundle branch block"},
      {"445118002", "left anterior fascicular block"},
      {"39732003", "left axis deviation"},
      {"164909002", "left bundle branch block"},
      {"251146004", "low qrs voltages"},
      {"698252002", "nonspecific intraventricular conduction disorder"},
      {"10370003", "pacing rhythm"},
      {"284470004", "premature atrial contraction"},
      {"427172004", "premature ventricular contractions"},
      {"164947007", "prolonged pr interval"},
      {"111975006", "prolonged qt interval"},
      {"164917005", "qwave abnormal"},
      {"47665007", "right axis deviation"},
      {"427393009", "sinus arrhythmia"},
      {"426177001", "sinus bradycardia"},
      {"426783006", "sinus rhythm"},
      {"427084000", "sinus tachycardia"},
      {"164934002", "t wave abnormal"},
      {"59931005", "t wave inversion"},
  });
}

}  // namespace ecgdg::dg
