#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ecgdg/dataset.hpp"
#include "ecgdg/errors.hpp"
#include "ecgdg/portable.hpp"
#include "ecgdg/rng.hpp"
#include "ecgdg/wfdb.hpp"

using namespace ecgdg;
namespace fs = std::filesystem;

namespace {

std::string lead_lines(const std::string& id, int count, const std::string& gain = "1000",
                       const std::string& offset = "0") {
  std::string out;
  for (int i = 0; i < count; ++i) out += id + ".dat 16 " + gain + " " + offset + "\n";
  return out;
}

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("ecgdg_test_" + tag + "_" + std::to_string(getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

void write_int16_signal(const fs::path& path, int64_t count, int16_t value) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (int64_t i = 0; i < count; ++i) {
    unsigned char b[2] = {static_cast<unsigned char>(value & 0xff),
                          static_cast<unsigned char>((value >> 8) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 2);
  }
}

io::EcgRecord random_record(uint64_t seed, const std::string& id, int fs, int64_t samples) {
  Philox rng(seed, stream_id("recordio/" + id));
  io::EcgRecord rec;
  rec.id = id;
  rec.fs = fs;
  rec.num_samples = samples;
  rec.domain = "T";
  rec.labels = {"164889003", "426783006"};
  rec.age = "63";
  rec.sex = "Female";
  rec.leads.resize(static_cast<size_t>(io::kNumLeads) * samples);
  for (auto& v : rec.leads) v = static_cast<float>(rng.uniform(-5.0, 5.0));
  return rec;
}

}  // namespace

TEST_CASE("parse_header reads the record line and Dx labels") {
  io::HeaderInfo h = io::parse_header("A0001 12 500 5000\n" + lead_lines("A0001", 12) +
                                      "#Dx: 164889003\n");
  CHECK(h.id == "A0001");
  CHECK(h.num_leads == 12);
  CHECK(h.fs == 500);
  CHECK(h.num_samples == 5000);
  REQUIRE(h.labels.size() == 1);
  CHECK(h.labels[0] == "164889003");
}

TEST_CASE("parse_header reads multiple labels and odd rates") {
  io::HeaderInfo h = io::parse_header("A0002 12 257 77000\n" + lead_lines("A0002", 12) +
                                      "#Dx: 426783006,59118001\n");
  CHECK(h.fs == 257);
  CHECK(h.num_samples == 77000);
  CHECK(h.labels == std::vector<std::string>{"426783006", "59118001"});
}

TEST_CASE("parse_header rejects non-numeric fields") {
  CHECK_THROWS_AS(io::parse_header("A0003 twelve 500 5000\n"), Error);
  try {
    io::parse_header("A0003 twelve 500 5000\n");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MalformedHeader);
  }
  CHECK_THROWS_AS(io::parse_header(""), Error);
  CHECK_THROWS_AS(io::parse_header("A0004 12 500\n"), Error);  // too few fields
}

TEST_CASE("parse_header keeps missing Dx empty and passes demographics") {
  io::HeaderInfo h = io::parse_header("B1 12 500 100\n" + lead_lines("B1", 12) +
                                      "#Age: 44\n#Sex: Male\n");
  CHECK(h.labels.empty());
  CHECK(h.age == "44");
  CHECK(h.sex == "Male");
}

TEST_CASE("parse_header accepts challenge-style gain suffixes") {
  io::HeaderInfo h =
      io::parse_header("C1 12 500 100\n" + lead_lines("C1", 12, "1000(12)/mV", "12"));
  CHECK(h.lead_specs[0].gain == doctest::Approx(1000.0));
  CHECK(h.lead_specs[0].offset == doctest::Approx(12.0));
}

TEST_CASE("read_record size checking and scaling") {
  fs::path dir = temp_dir("read");
  write_file(dir / "A1.hea", "A1 12 500 5000\n" + lead_lines("A1", 12));
  write_int16_signal(dir / "A1.dat", 12 * 5000, 500);

  io::EcgRecord rec = io::read_record((dir / "A1.hea").string(), (dir / "A1.dat").string());
  CHECK(rec.num_samples == 5000);
  CHECK(rec.leads.size() == 12u * 5000u);
  // gain 1000 units/mV: raw 500 -> 0.5 mV
  CHECK(rec.lead(0)[0] == doctest::Approx(0.5));
  CHECK(rec.lead(11)[4999] == doctest::Approx(0.5));

  // off-by-one byte
  std::ofstream(dir / "A1.dat", std::ios::binary | std::ios::app | std::ios::ate);
  fs::resize_file(dir / "A1.dat", 12 * 5000 * 2 - 2);
  try {
    io::read_record((dir / "A1.hea").string(), (dir / "A1.dat").string());
    FAIL("expected SizeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SizeMismatch);
  }
  fs::remove_all(dir);
}

TEST_CASE("read_record rejects non-12-lead records at assembly") {
  fs::path dir = temp_dir("leads");
  write_file(dir / "A2.hea", "A2 3 500 10\n" + lead_lines("A2", 3));
  write_int16_signal(dir / "A2.dat", 3 * 10, 1);
  try {
    io::read_record((dir / "A2.hea").string(), (dir / "A2.dat").string());
    FAIL("expected UnsupportedLeadCount");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnsupportedLeadCount);
  }
  fs::remove_all(dir);
}

TEST_CASE("portable round trip is exact and sized as documented") {
  fs::path dir = temp_dir("portable");
  io::EcgRecord rec = random_record(11, "P1", 500, 5000);
  io::PortablePaths paths = io::write_portable(rec, dir.string());
  // 20-byte binary header + float32 payload
  CHECK(fs::file_size(paths.signal_path) == 20 + 12u * 5000u * 4u);

  io::EcgRecord back = io::read_portable(paths.header_path);
  CHECK(back.id == rec.id);
  CHECK(back.fs == rec.fs);
  CHECK(back.num_samples == rec.num_samples);
  CHECK(back.labels == rec.labels);
  CHECK(back.domain == rec.domain);
  CHECK(back.age == rec.age);
  CHECK(back.sex == rec.sex);
  CHECK(back.leads == rec.leads);  // bit-exact float32
  fs::remove_all(dir);
}

TEST_CASE("portable round trip property over random records") {
  fs::path dir = temp_dir("portable_prop");
  for (int i = 0; i < 20; ++i) {
    io::EcgRecord rec = random_record(100 + static_cast<uint64_t>(i), "R" + std::to_string(i),
                                      i % 2 ? 257 : 500, 50 + 13 * i);
    io::PortablePaths paths = io::write_portable(rec, dir.string());
    io::EcgRecord back = io::read_portable(paths.header_path);
    CHECK(back.leads == rec.leads);
    CHECK(back.labels == rec.labels);
  }
  fs::remove_all(dir);
}

TEST_CASE("write_portable to an unwritable path raises IoFailure") {
  fs::path dir = temp_dir("unwritable");
  write_file(dir / "blocker", "x");
  io::EcgRecord rec = random_record(5, "U1", 500, 10);
  try {
    io::write_portable(rec, (dir / "blocker").string());  // a file, not a directory
    FAIL("expected IoFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoFailure);
  }
  fs::remove_all(dir);
}

TEST_CASE("scan_dataset skips corrupt files, orders by id, and is repeatable") {
  fs::path dir = temp_dir("scan");
  // Created deliberately out of lexicographic order.
  for (const char* id : {"Z9", "A1", "M5"}) {
    write_file(dir / (std::string(id) + ".hea"),
               std::string(id) + " 12 500 20\n" + lead_lines(id, 12) + "#Dx: 164889003\n");
    write_int16_signal(dir / (std::string(id) + ".dat"), 12 * 20, 7);
  }
  write_file(dir / "BAD.hea", "BAD twelve 500 20\n");

  io::ScanResult scan = io::scan_dataset(dir.string(), "CPSC");
  REQUIRE(scan.manifest.entries.size() == 3);
  CHECK(scan.manifest.entries[0].id == "A1");
  CHECK(scan.manifest.entries[1].id == "M5");
  CHECK(scan.manifest.entries[2].id == "Z9");
  CHECK(scan.manifest.entries[0].domain == "CPSC");
  CHECK(scan.manifest.entries[0].fs == 500);
  CHECK(scan.manifest.entries[0].num_samples == 20);
  REQUIRE(scan.skipped.size() == 1);
  CHECK(scan.skipped[0].path.find("BAD.hea") != std::string::npos);

  io::ScanResult again = io::scan_dataset(dir.string(), "CPSC");
  CHECK(io::same_entries(scan.manifest, again.manifest));
  fs::remove_all(dir);
}

TEST_CASE("scan_dataset on an empty directory raises EmptyDataset") {
  fs::path dir = temp_dir("scan_empty");
  try {
    io::scan_dataset(dir.string(), "X");
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDataset);
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest CSV round trip preserves entries") {
  fs::path dir = temp_dir("manifest");
  io::DatasetManifest m;
  m.created_at = "2026-01-01T00:00:00Z";
  m.entries.push_back({"A1", "/tmp/a1.hea", "PTB", {"10370003", "164889003"}, 500, 5000});
  m.entries.push_back({"A2", "/tmp/a2.hea", "PTB", {}, 257, 77000});
  std::string path = (dir / "m.csv").string();
  io::write_manifest(m, path);
  io::DatasetManifest back = io::read_manifest(path);
  CHECK(io::same_entries(m, back));
  CHECK(back.created_at == m.created_at);
  fs::remove_all(dir);
}
