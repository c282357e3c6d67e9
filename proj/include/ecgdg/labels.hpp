#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace ecgdg::dg {

struct LabelClass {
  std::string code;  // primary diagnosis code
  std::string name;
};

// The ordered set of scored diagnosis classes, loaded from CSV
// (code,name[,merge_into]). Rows with merge_into map their code onto an
// existing class, implementing challenge-style equivalences. Class order is
// fixed for the life of an experiment.
class LabelMap {
 public:
  static LabelMap load_csv(const std::string& path);
  static LabelMap parse_csv(const std::string& text, const std::string& origin);
  static LabelMap from_classes(std::vector<LabelClass> classes);

  // -1 when the code is unscored.
  int index_of(const std::string& code) const {
    auto it = index_.find(code);
    return it == index_.end() ? -1 : it->second;
  }

  size_t size() const { return classes_.size(); }
  const std::vector<LabelClass>& classes() const { return classes_; }
  const LabelClass& at(size_t i) const { return classes_[i]; }

  void save_csv(const std::string& path) const;
  std::string to_csv() const;

  bool operator==(const LabelMap& o) const;

 private:
  std::vector<LabelClass> classes_;
  std::unordered_map<std::string, int> index_;  // includes merged aliases
};

// The 24 scored classes of the 2020 challenge mapping, unmerged.
LabelMap default_label_map();

}  // namespace ecgdg::dg
