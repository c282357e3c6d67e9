#pragma once

#include <string>
#include <vector>

#include "ecgdg/record.hpp"

namespace ecgdg::io {

struct ScanResult {
  DatasetManifest manifest;
  std::vector<SkipEntry> skipped;  // unparseable headers/signals, with reasons
};

// Enumerates every *.hea in dir (non-recursive), pairing with its signal
// file (raw int16 ".dat" style or portable ".edg"). Entries are ordered by
// record id regardless of filesystem enumeration order. Throws EmptyDataset
// when nothing parses.
ScanResult scan_dataset(const std::string& dir, const std::string& domain);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

void write_skip_report(const std::vector<SkipEntry>& skipped, const std::string& path);

// Loads the record behind a manifest entry, dispatching on signal format.
EcgRecord load_entry(const ManifestEntry& entry);

}  // namespace ecgdg::io
