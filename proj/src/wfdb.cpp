#include "ecgdg/wfdb.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecgdg/errors.hpp"

namespace fs = std::filesystem;

namespace ecgdg::io {

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int64_t parse_int(const std::string& tok, const char* what) {
  int64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    fail(ErrorCode::MalformedHeader, std::string("non-numeric ") + what + ": '" + tok + "'");
  return v;
}

// Gains in challenge-style headers carry suffixes like "1000/mV" or
// "1000(0)/mV"; the numeric prefix is the gain, the parenthesized value the
// baseline. Returns the leading number and any parenthesized baseline.
double parse_gain(const std::string& tok, double* baseline_out) {
  size_t cut = tok.find_first_of("(/");
  std::string num = cut == std::string::npos ? tok : tok.substr(0, cut);
  char* end = nullptr;
  double v = std::strtod(num.c_str(), &end);
  if (end == num.c_str() || *end != '\0')
    fail(ErrorCode::MalformedHeader, "non-numeric gain: '" + tok + "'");
  if (baseline_out && cut != std::string::npos && tok[cut] == '(') {
    size_t close = tok.find(')', cut);
    if (close != std::string::npos) {
      std::string base = tok.substr(cut + 1, close - cut - 1);
      char* bend = nullptr;
      double b = std::strtod(base.c_str(), &bend);
      if (bend != base.c_str() && *bend == '\0') *baseline_out = b;
    }
  }
  return v;
}

double parse_double(const std::string& tok, const char* what) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0')
    fail(ErrorCode::MalformedHeader, std::string("non-numeric ") + what + ": '" + tok + "'");
  return v;
}

std::vector<std::string> parse_code_list(const std::string& value) {
  std::vector<std::string> codes;
  std::string cur;
  std::istringstream ss(value);
  while (std::getline(ss, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) codes.push_back(cur);
  }
  std::sort(codes.begin(), codes.end());
  codes.erase(std::unique(codes.begin(), codes.end()), codes.end());
  return codes;
}

}  // namespace

HeaderInfo parse_header(const std::string& text) {
  if (trim(text).empty()) fail(ErrorCode::MalformedHeader, "empty header");
  std::istringstream input(text);
  std::string line;

  HeaderInfo h;
  bool first = true;
  int lead_lines_expected = 0;
  while (std::getline(input, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      size_t colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string key = trim(line.substr(1, colon - 1));
      std::string value = trim(line.substr(colon + 1));
      if (key == "Dx") h.labels = parse_code_list(value);
      else if (key == "Domain") h.domain = value;
      else if (key == "Age") h.age = value;
      else if (key == "Sex") h.sex = value;
      continue;
    }
    if (first) {
      auto toks = split_ws(line);
      if (toks.size() < 4)
        fail(ErrorCode::MalformedHeader,
             "record line needs >= 4 fields (id num_leads fs num_samples), got " +
                 std::to_string(toks.size()));
      h.id = toks[0];
      h.num_leads = static_cast<int>(parse_int(toks[1], "num_leads"));
      h.fs = static_cast<int>(parse_int(toks[2], "fs"));
      h.num_samples = parse_int(toks[3], "num_samples");
      if (h.fs <= 0) fail(ErrorCode::MalformedHeader, "fs must be positive");
      if (h.num_samples <= 0) fail(ErrorCode::MalformedHeader, "num_samples must be positive");
      if (h.num_leads <= 0) fail(ErrorCode::MalformedHeader, "num_leads must be positive");
      lead_lines_expected = h.num_leads;
      first = false;
      continue;
    }
    if (lead_lines_expected > 0) {
      auto toks = split_ws(line);
      if (toks.size() < 2)
        fail(ErrorCode::MalformedHeader, "lead line needs >= 2 fields: '" + line + "'");
      LeadSpec spec;
      spec.file = toks[0];
      spec.format = toks[1];
      double baseline = 0.0;
      if (toks.size() >= 3) spec.gain = parse_gain(toks[2], &baseline);
      spec.offset = baseline;
      if (toks.size() >= 4) spec.offset = parse_double(toks[3], "offset");
      if (spec.gain == 0.0) fail(ErrorCode::MalformedHeader, "zero gain");
      h.lead_specs.push_back(spec);
      --lead_lines_expected;
    }
  }
  if (first) fail(ErrorCode::MalformedHeader, "no record line found");
  return h;
}

HeaderInfo parse_header_file(const std::string& header_path) {
  std::ifstream in(header_path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open header: " + header_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_header(ss.str());
}

std::string signal_path_for(const std::string& header_path, const HeaderInfo& header) {
  fs::path dir = fs::path(header_path).parent_path();
  std::string file = header.lead_specs.empty() ? header.id + ".dat" : header.lead_specs[0].file;
  return (dir / file).string();
}

EcgRecord read_record(const std::string& header_path, const std::string& signal_path) {
  HeaderInfo h = parse_header_file(header_path);
  if (h.num_leads != kNumLeads)
    fail(ErrorCode::UnsupportedLeadCount,
         h.id + ": expected 12 leads, header declares " + std::to_string(h.num_leads));
  if (static_cast<int>(h.lead_specs.size()) != h.num_leads)
    fail(ErrorCode::MalformedHeader,
         h.id + ": header declares " + std::to_string(h.num_leads) + " leads but has " +
             std::to_string(h.lead_specs.size()) + " lead lines");

  std::ifstream in(signal_path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open signal: " + signal_path);
  in.seekg(0, std::ios::end);
  int64_t file_size = static_cast<int64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  int64_t expected = static_cast<int64_t>(h.num_leads) * h.num_samples * 2;
  if (file_size != expected)
    fail(ErrorCode::SizeMismatch,
         h.id + ": signal file is " + std::to_string(file_size) + " bytes, header implies " +
             std::to_string(expected));

  std::vector<unsigned char> raw(static_cast<size_t>(file_size));
  if (!in.read(reinterpret_cast<char*>(raw.data()), file_size))
    fail(ErrorCode::IoFailure, "short read: " + signal_path);

  EcgRecord rec;
  rec.id = h.id;
  rec.fs = h.fs;
  rec.num_samples = h.num_samples;
  rec.labels = h.labels;
  rec.domain = h.domain;
  rec.age = h.age;
  rec.sex = h.sex;
  rec.leads.resize(static_cast<size_t>(kNumLeads) * h.num_samples);

  for (int lead = 0; lead < kNumLeads; ++lead) {
    const LeadSpec& spec = h.lead_specs[static_cast<size_t>(lead)];
    double inv_gain = 1.0 / spec.gain;
    const unsigned char* src = raw.data() + static_cast<size_t>(lead) * h.num_samples * 2;
    float* dst = rec.lead(lead);
    for (int64_t i = 0; i < h.num_samples; ++i) {
      uint16_t u = static_cast<uint16_t>(src[2 * i]) |
                   static_cast<uint16_t>(src[2 * i + 1]) << 8;
      int16_t v = static_cast<int16_t>(u);
      dst[i] = static_cast<float>((static_cast<double>(v) - spec.offset) * inv_gain);
    }
  }
  return rec;
}

bool EcgRecord::has_label(const std::string& code) const {
  return std::binary_search(labels.begin(), labels.end(), code);
}

void validate_record(const EcgRecord& record, int num_leads) {
  if (num_leads != kNumLeads)
    fail(ErrorCode::UnsupportedLeadCount,
         record.id + ": expected 12 leads, got " + std::to_string(num_leads));
  if (record.fs <= 0) fail(ErrorCode::MalformedHeader, record.id + ": fs must be positive");
  if (record.num_samples <= 0)
    fail(ErrorCode::MalformedHeader, record.id + ": num_samples must be positive");
}

bool same_entries(const DatasetManifest& a, const DatasetManifest& b) {
  if (a.entries.size() != b.entries.size()) return false;
  for (size_t i = 0; i < a.entries.size(); ++i) {
    const auto& x = a.entries[i];
    const auto& y = b.entries[i];
    if (x.id != y.id || x.path != y.path || x.domain != y.domain || x.labels != y.labels ||
        x.fs != y.fs || x.num_samples != y.num_samples)
      return false;
  }
  return true;
}

}  // namespace ecgdg::io
