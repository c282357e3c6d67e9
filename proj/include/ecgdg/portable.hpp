#pragma once

#include <string>
#include <utility>

#include "ecgdg/record.hpp"

namespace ecgdg::io {

// Portable format: a text header "<id>.hea" (same line grammar as raw
// headers, lead format "f32", gain 1, offset 0) plus a binary "<id>.edg"
// holding magic "EDG1", u32 num_leads, u32 fs, u64 num_samples and the
// float32 little-endian lead-major payload in millivolts. See docs/format.md.
struct PortablePaths {
  std::string header_path;
  std::string signal_path;
};

PortablePaths write_portable(const EcgRecord& record, const std::string& dir);

EcgRecord read_portable(const std::string& header_path);

}  // namespace ecgdg::io
