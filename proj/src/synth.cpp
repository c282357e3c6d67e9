#include "ecgdg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ecgdg/dataset.hpp"
#include "ecgdg/errors.hpp"
#include "ecgdg/portable.hpp"

namespace fs = std::filesystem;

namespace ecgdg::synth {

namespace {

constexpr double kTwoPi = 6.283185307179586;

// Lead projections are a fixed property of each synthetic class, shared by
// every domain, so class identity survives domain shift.
std::vector<double> lead_projection(int class_index) {
  Philox rng(0x5EC5u, stream_id("leadproj/" + std::to_string(class_index)));
  std::vector<double> w(io::kNumLeads);
  for (auto& v : w) {
    double mag = rng.uniform(0.25, 1.0);
    v = rng.next_double() < 0.5 ? -mag : mag;
  }
  return w;
}

struct Morphology {
  double rate_hz;
  double qrs_width;
  double t_amp;
};

Morphology class_morphology(int class_index, const SynthDomainSpec& spec) {
  Morphology m;
  m.rate_hz = 0.8 + 0.3 * class_index + spec.rate_offset;
  m.qrs_width = (0.012 + 0.004 * (class_index % 3)) * spec.qrs_width_factor;
  m.t_amp = 0.25 * (class_index % 2 == 0 ? 1.0 : -1.0) * (spec.t_flip ? -1.0 : 1.0);
  return m;
}

double bump(double t, double mu, double sigma, double amp) {
  double d = (t - mu) / sigma;
  return amp * std::exp(-0.5 * d * d);
}

}  // namespace

void SynthDomainSpec::validate(size_t num_classes) const {
  bool fs_ok = fs == 250 || fs == 257 || fs == 500 || fs == 1000;
  if (!fs_ok) fail(ErrorCode::InvalidConfig, name + ": fs must be one of 250, 257, 500, 1000");
  if (record_count < 1) fail(ErrorCode::InvalidConfig, name + ": record_count must be >= 1");
  if (seconds <= 0.0) fail(ErrorCode::InvalidConfig, name + ": seconds must be positive");
  if (!class_priors.empty() && class_priors.size() != num_classes)
    fail(ErrorCode::InvalidConfig, name + ": class_priors length must match the label map");
  if (co_occurrence < 0.0 || co_occurrence > 1.0)
    fail(ErrorCode::InvalidConfig, name + ": co_occurrence must be in [0,1]");
}

dg::LabelMap synthetic_label_map(int num_classes) {
  std::vector<dg::LabelClass> classes;
  for (int k = 0; k < num_classes; ++k) {
    char code[16];
    std::snprintf(code, sizeof(code), "SYN%03d", k + 1);
    classes.push_back({code, "synthetic class " + std::to_string(k + 1)});
  }
  return dg::LabelMap::from_classes(std::move(classes));
}

io::EcgRecord generate_record(const SynthDomainSpec& spec, const std::vector<std::string>& codes,
                              int64_t index, const dg::LabelMap& map) {
  if (codes.empty()) fail(ErrorCode::UnknownClass, "record needs at least one class code");
  std::vector<int> class_indices;
  for (const auto& code : codes) {
    int idx = map.index_of(code);
    if (idx < 0) fail(ErrorCode::UnknownClass, "code not in the synthetic label map: " + code);
    class_indices.push_back(idx);
  }

  int64_t n = static_cast<int64_t>(std::llround(spec.seconds * spec.fs));
  Philox rng(spec.seed, stream_id("record/" + spec.name + "/" + std::to_string(index)));

  io::EcgRecord rec;
  char id[64];
  std::snprintf(id, sizeof(id), "%s_%05lld", spec.name.c_str(), static_cast<long long>(index));
  rec.id = id;
  rec.fs = spec.fs;
  rec.num_samples = n;
  rec.domain = spec.name;
  rec.labels.assign(codes.begin(), codes.end());
  std::sort(rec.labels.begin(), rec.labels.end());
  rec.labels.erase(std::unique(rec.labels.begin(), rec.labels.end()), rec.labels.end());
  rec.leads.assign(static_cast<size_t>(io::kNumLeads) * n, 0.0f);

  double dt = 1.0 / spec.fs;

  for (int idx : class_indices) {
    Morphology m = class_morphology(idx, spec);
    if (m.rate_hz <= 0.05) m.rate_hz = 0.05;
    std::vector<double> proj = lead_projection(idx);
    double period = 1.0 / m.rate_hz;
    double phase0 = rng.next_double() * period;

    // One shared waveform per class, projected into each lead.
    std::vector<double> wave(static_cast<size_t>(n), 0.0);
    for (double beat = phase0; beat < spec.seconds + 0.4; beat += period) {
      // Bumps reach ~4 sigma; only touch nearby samples.
      int64_t lo = std::max<int64_t>(0, static_cast<int64_t>((beat - 0.45) / dt));
      int64_t hi = std::min<int64_t>(n, static_cast<int64_t>((beat + 0.6) / dt) + 1);
      for (int64_t i = lo; i < hi; ++i) {
        double t = i * dt;
        double v = bump(t, beat - 0.16, 0.02, 0.12) + bump(t, beat, m.qrs_width, 1.0) +
                   bump(t, beat + 0.28, 0.06, m.t_amp);
        wave[static_cast<size_t>(i)] += v;
      }
    }
    for (int lead = 0; lead < io::kNumLeads; ++lead) {
      float* dst = rec.lead(lead);
      double w = proj[static_cast<size_t>(lead)];
      for (int64_t i = 0; i < n; ++i)
        dst[i] += static_cast<float>(w * wave[static_cast<size_t>(i)]);
    }
  }

  double wander_phase = rng.next_double() * kTwoPi;
  for (int lead = 0; lead < io::kNumLeads; ++lead) {
    float* dst = rec.lead(lead);
    for (int64_t i = 0; i < n; ++i) {
      double t = i * dt;
      double v = static_cast<double>(dst[i]);
      if (spec.wander_amplitude != 0.0)
        v += spec.wander_amplitude * std::sin(kTwoPi * spec.wander_freq * t + wander_phase);
      if (spec.noise_std != 0.0) v += spec.noise_std * rng.normal();
      dst[i] = static_cast<float>(spec.amplitude_scale * v);
    }
  }
  return rec;
}

std::vector<io::DatasetManifest> generate_dataset(const std::vector<SynthDomainSpec>& specs,
                                                  const dg::LabelMap& map,
                                                  const std::string& out_dir) {
  if (specs.empty()) fail(ErrorCode::InvalidConfig, "no synthetic domains configured");
  for (const auto& spec : specs) spec.validate(map.size());

  fs::create_directories(out_dir);
  map.save_csv((fs::path(out_dir) / "labels.csv").string());

  std::vector<io::DatasetManifest> manifests;
  for (const auto& spec : specs) {
    std::string domain_dir = (fs::path(out_dir) / spec.name).string();
    fs::create_directories(domain_dir);

    std::vector<double> priors = spec.class_priors;
    if (priors.empty()) priors.assign(map.size(), 1.0);
    double prior_sum = 0.0;
    for (double p : priors) {
      if (p < 0.0) fail(ErrorCode::InvalidConfig, spec.name + ": negative class prior");
      prior_sum += p;
    }
    if (prior_sum <= 0.0) fail(ErrorCode::InvalidConfig, spec.name + ": all-zero class priors");

    auto sample_class = [&](Philox& rng, int exclude) {
      double total = 0.0;
      for (size_t k = 0; k < priors.size(); ++k)
        if (static_cast<int>(k) != exclude) total += priors[k];
      if (total <= 0.0) return -1;
      double u = rng.next_double() * total;
      double acc = 0.0;
      for (size_t k = 0; k < priors.size(); ++k) {
        if (static_cast<int>(k) == exclude) continue;
        acc += priors[k];
        if (u < acc) return static_cast<int>(k);
      }
      for (size_t k = priors.size(); k-- > 0;)
        if (static_cast<int>(k) != exclude && priors[k] > 0.0) return static_cast<int>(k);
      return -1;
    };

    Philox label_rng(spec.seed, stream_id("labels/" + spec.name));
    io::DatasetManifest manifest;
    for (int64_t i = 0; i < spec.record_count; ++i) {
      std::vector<std::string> codes;
      int primary = sample_class(label_rng, -1);
      codes.push_back(map.at(static_cast<size_t>(primary)).code);
      if (label_rng.next_double() < spec.co_occurrence) {
        int second = sample_class(label_rng, primary);
        if (second >= 0) codes.push_back(map.at(static_cast<size_t>(second)).code);
      }
      io::EcgRecord rec = generate_record(spec, codes, i, map);
      io::PortablePaths paths = io::write_portable(rec, domain_dir);

      io::ManifestEntry entry;
      entry.id = rec.id;
      entry.path = paths.header_path;
      entry.domain = spec.name;
      entry.labels = rec.labels;
      entry.fs = rec.fs;
      entry.num_samples = rec.num_samples;
      manifest.entries.push_back(std::move(entry));
    }
    std::sort(manifest.entries.begin(), manifest.entries.end(),
              [](const io::ManifestEntry& a, const io::ManifestEntry& b) { return a.id < b.id; });
    io::write_manifest(manifest, (fs::path(domain_dir) / "manifest.csv").string());
    manifests.push_back(std::move(manifest));
  }
  return manifests;
}

}  // namespace ecgdg::synth
