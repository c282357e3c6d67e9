#include "ecgdg/portable.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ecgdg/errors.hpp"
#include "ecgdg/wfdb.hpp"

namespace fs = std::filesystem;

namespace ecgdg::io {

namespace {

constexpr char kMagic[4] = {'E', 'D', 'G', '1'};

void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

uint64_t get_u64(std::istream& in) {
  uint64_t lo = get_u32(in);
  uint64_t hi = get_u32(in);
  return (hi << 32) | lo;
}

static_assert(sizeof(float) == 4, "float32 payload requires 4-byte float");

}  // namespace

PortablePaths write_portable(const EcgRecord& record, const std::string& dir) {
  validate_record(record, kNumLeads);
  fs::path base(dir);
  std::error_code ec;
  fs::create_directories(base, ec);
  if (!fs::is_directory(base))
    fail(ErrorCode::IoFailure, "not a writable directory: " + dir);

  PortablePaths paths;
  paths.header_path = (base / (record.id + ".hea")).string();
  paths.signal_path = (base / (record.id + ".edg")).string();

  {
    std::ostringstream head;
    head << record.id << " " << kNumLeads << " " << record.fs << " " << record.num_samples << "\n";
    for (int i = 0; i < kNumLeads; ++i) head << record.id << ".edg f32 1 0\n";
    if (!record.labels.empty()) {
      head << "#Dx: ";
      for (size_t i = 0; i < record.labels.size(); ++i) {
        if (i) head << ",";
        head << record.labels[i];
      }
      head << "\n";
    }
    if (!record.domain.empty()) head << "#Domain: " << record.domain << "\n";
    if (!record.age.empty()) head << "#Age: " << record.age << "\n";
    if (!record.sex.empty()) head << "#Sex: " << record.sex << "\n";

    std::ofstream out(paths.header_path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + paths.header_path);
    out << head.str();
    if (!out) fail(ErrorCode::IoFailure, "write failed: " + paths.header_path);
  }
  {
    std::ofstream out(paths.signal_path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot write " + paths.signal_path);
    out.write(kMagic, 4);
    put_u32(out, kNumLeads);
    put_u32(out, static_cast<uint32_t>(record.fs));
    put_u64(out, static_cast<uint64_t>(record.num_samples));
    out.write(reinterpret_cast<const char*>(record.leads.data()),
              static_cast<std::streamsize>(record.leads.size() * sizeof(float)));
    if (!out) fail(ErrorCode::IoFailure, "write failed: " + paths.signal_path);
  }
  return paths;
}

EcgRecord read_portable(const std::string& header_path) {
  HeaderInfo h = parse_header_file(header_path);
  if (h.num_leads != kNumLeads)
    fail(ErrorCode::UnsupportedLeadCount,
         h.id + ": expected 12 leads, header declares " + std::to_string(h.num_leads));

  std::string signal_path = signal_path_for(header_path, h);
  std::ifstream in(signal_path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open signal: " + signal_path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    fail(ErrorCode::MalformedHeader, signal_path + ": bad magic, expected EDG1");
  uint32_t leads = get_u32(in);
  uint32_t fs = get_u32(in);
  uint64_t samples = get_u64(in);
  if (!in) fail(ErrorCode::IoFailure, "short read: " + signal_path);
  if (leads != static_cast<uint32_t>(h.num_leads) || fs != static_cast<uint32_t>(h.fs) ||
      samples != static_cast<uint64_t>(h.num_samples))
    fail(ErrorCode::SizeMismatch, signal_path + ": binary fields disagree with header");

  EcgRecord rec;
  rec.id = h.id;
  rec.fs = h.fs;
  rec.num_samples = h.num_samples;
  rec.labels = h.labels;
  rec.domain = h.domain;
  rec.age = h.age;
  rec.sex = h.sex;
  rec.leads.resize(static_cast<size_t>(kNumLeads) * h.num_samples);
  in.read(reinterpret_cast<char*>(rec.leads.data()),
          static_cast<std::streamsize>(rec.leads.size() * sizeof(float)));
  if (!in || in.gcount() != static_cast<std::streamsize>(rec.leads.size() * sizeof(float)))
    fail(ErrorCode::SizeMismatch, signal_path + ": payload shorter than header implies");
  char extra;
  if (in.read(&extra, 1))
    fail(ErrorCode::SizeMismatch, signal_path + ": payload longer than header implies");
  return rec;
}

}  // namespace ecgdg::io
