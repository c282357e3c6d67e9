#include "ecgdg/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "ecgdg/errors.hpp"
#include "ecgdg/parallel.hpp"
#include "ecgdg/portable.hpp"
#include "ecgdg/wfdb.hpp"

namespace fs = std::filesystem;

namespace ecgdg::io {

namespace {

std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (i) out += ";";
    out += labels[i];
  }
  return out;
}

std::vector<std::string> split_labels(const std::string& joined) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(joined);
  while (std::getline(ss, cur, ';'))
    if (!cur.empty()) out.push_back(cur);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

ScanResult scan_dataset(const std::string& dir, const std::string& domain) {
  if (!fs::is_directory(dir)) fail(ErrorCode::IoFailure, "not a directory: " + dir);

  std::vector<std::string> header_paths;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (de.is_regular_file() && de.path().extension() == ".hea")
      header_paths.push_back(de.path().string());
  }
  std::sort(header_paths.begin(), header_paths.end());

  ScanResult result;
  result.manifest.created_at = now_iso8601();
  std::vector<ManifestEntry> entries(header_paths.size());
  std::vector<SkipEntry> skips(header_paths.size());
  std::vector<char> ok(header_paths.size(), 0);

  // Headers parse independently; the id sort below restores a deterministic
  // order whatever the chunking.
  parallel_for(static_cast<int64_t>(header_paths.size()), [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      const std::string& hp = header_paths[static_cast<size_t>(i)];
      try {
        HeaderInfo h = parse_header_file(hp);
        if (h.num_leads != kNumLeads)
          fail(ErrorCode::UnsupportedLeadCount,
               "expected 12 leads, got " + std::to_string(h.num_leads));
        std::string sp = signal_path_for(hp, h);
        if (!fs::is_regular_file(sp)) fail(ErrorCode::IoFailure, "missing signal file " + sp);
        bool portable = fs::path(sp).extension() == ".edg";
        int64_t size = static_cast<int64_t>(fs::file_size(sp));
        int64_t expected = static_cast<int64_t>(h.num_leads) * h.num_samples *
                               (portable ? 4 : 2) +
                           (portable ? 20 : 0);
        if (size != expected)
          fail(ErrorCode::SizeMismatch, "signal file is " + std::to_string(size) +
                                            " bytes, header implies " + std::to_string(expected));
        ManifestEntry e;
        e.id = h.id;
        e.path = hp;
        e.domain = domain;
        e.labels = h.labels;
        e.fs = h.fs;
        e.num_samples = h.num_samples;
        entries[static_cast<size_t>(i)] = std::move(e);
        ok[static_cast<size_t>(i)] = 1;
      } catch (const Error& err) {
        skips[static_cast<size_t>(i)] = {hp, std::string(err.code_name()) + ": " + err.what()};
      }
    }
  });

  for (size_t i = 0; i < header_paths.size(); ++i) {
    if (ok[i])
      result.manifest.entries.push_back(std::move(entries[i]));
    else
      result.skipped.push_back(std::move(skips[i]));
  }
  std::sort(result.manifest.entries.begin(), result.manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  for (size_t i = 1; i < result.manifest.entries.size(); ++i) {
    if (result.manifest.entries[i].id == result.manifest.entries[i - 1].id)
      fail(ErrorCode::MalformedHeader, "duplicate record id: " + result.manifest.entries[i].id);
  }

  if (result.manifest.entries.empty())
    fail(ErrorCode::EmptyDataset,
         dir + ": no valid records (" + std::to_string(result.skipped.size()) + " skipped)");
  return result;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
  out << "# created_at: " << manifest.created_at << "\n";
  out << "id,path,domain,labels,fs,num_samples\n";
  for (const auto& e : manifest.entries) {
    out << e.id << "," << e.path << "," << e.domain << "," << join_labels(e.labels) << "," << e.fs
        << "," << e.num_samples << "\n";
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed: " + path);
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open manifest: " + path);
  DatasetManifest m;
  std::string line;
  bool saw_header_row = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      size_t colon = line.find(':');
      if (colon != std::string::npos && line.substr(1, colon - 1).find("created_at") != std::string::npos) {
        size_t b = line.find_first_not_of(" ", colon + 1);
        if (b != std::string::npos) m.created_at = line.substr(b);
      }
      continue;
    }
    if (!saw_header_row) {
      saw_header_row = true;  // column header row
      continue;
    }
    std::vector<std::string> cols;
    std::string tok;
    std::istringstream ss(line);
    while (std::getline(ss, tok, ',')) cols.push_back(tok);
    if (cols.size() != 6) fail(ErrorCode::IoFailure, path + ": bad manifest row: " + line);
    ManifestEntry e;
    e.id = cols[0];
    e.path = cols[1];
    e.domain = cols[2];
    e.labels = split_labels(cols[3]);
    e.fs = std::atoi(cols[4].c_str());
    e.num_samples = std::atoll(cols[5].c_str());
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_skip_report(const std::vector<SkipEntry>& skipped, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write " + path);
  out << "path,reason\n";
  for (const auto& s : skipped) out << s.path << "," << s.reason << "\n";
}

EcgRecord load_entry(const ManifestEntry& entry) {
  HeaderInfo h = parse_header_file(entry.path);
  std::string sp = signal_path_for(entry.path, h);
  EcgRecord rec;
  if (fs::path(sp).extension() == ".edg")
    rec = read_portable(entry.path);
  else
    rec = read_record(entry.path, sp);
  if (entry.domain != "") rec.domain = entry.domain;
  return rec;
}

}  // namespace ecgdg::io
