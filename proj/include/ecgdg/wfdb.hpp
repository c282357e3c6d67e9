#pragma once

#include <string>
#include <vector>

#include "ecgdg/record.hpp"

namespace ecgdg::io {

struct LeadSpec {
  std::string file;
  std::string format;  // "16" (int16 LE) or "f32"
  double gain = 1.0;   // ADC units per millivolt
  double offset = 0.0; // ADC units at 0 mV
};

struct HeaderInfo {
  std::string id;
  int num_leads = 0;
  int fs = 0;
  int64_t num_samples = 0;
  std::vector<LeadSpec> lead_specs;
  std::vector<std::string> labels;  // from "#Dx:" comment
  std::string domain;               // from "#Domain:" comment, optional
  std::string age;                  // from "#Age:" comment, optional
  std::string sex;                  // from "#Sex:" comment, optional
};

// Parses a header: first line "id num_leads fs num_samples", one line per
// lead "file format gain offset ...", comments start with '#'. Lead-count
// policy is NOT applied here; callers reject non-12-lead records when
// assembling an EcgRecord.
HeaderInfo parse_header(const std::string& text);

HeaderInfo parse_header_file(const std::string& header_path);

// Reads a raw record: header + little-endian int16 lead-major signal file,
// scaled to millivolts via per-lead gain/offset (mv = (raw - offset) / gain).
EcgRecord read_record(const std::string& header_path, const std::string& signal_path);

// Resolves the signal path named by the header's first lead spec relative to
// the header's directory.
std::string signal_path_for(const std::string& header_path, const HeaderInfo& header);

}  // namespace ecgdg::io
