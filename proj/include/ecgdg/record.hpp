#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ecgdg::io {

inline constexpr int kNumLeads = 12;

// One 12-lead recording. Lead samples are stored lead-major (all of lead 0,
// then lead 1, ...) in millivolts after gain/offset scaling. Immutable by
// convention once assembled; safe to share across threads.
struct EcgRecord {
  std::string id;
  std::vector<float> leads;  // kNumLeads * num_samples, lead-major
  int fs = 0;
  int64_t num_samples = 0;
  std::vector<std::string> labels;  // diagnosis codes, sorted, unique
  std::string domain;
  std::string age;  // optional demographic pass-through
  std::string sex;

  float* lead(int i) { return leads.data() + i * num_samples; }
  const float* lead(int i) const { return leads.data() + i * num_samples; }

  bool has_label(const std::string& code) const;
};

// Validates the 12-lead/positive-rate/positive-length invariants; throws
// UnsupportedLeadCount or MalformedHeader.
void validate_record(const EcgRecord& record, int num_leads);

struct ManifestEntry {
  std::string id;
  std::string path;  // header file path
  std::string domain;
  std::vector<std::string> labels;
  int fs = 0;
  int64_t num_samples = 0;
};

struct SkipEntry {
  std::string path;
  std::string reason;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;  // sorted by id, ids unique
  std::string created_at;              // informational; excluded from equality
};

bool same_entries(const DatasetManifest& a, const DatasetManifest& b);

}  // namespace ecgdg::io
