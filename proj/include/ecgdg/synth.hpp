#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecgdg/labels.hpp"
#include "ecgdg/record.hpp"

namespace ecgdg::synth {

// One synthetic acquisition domain. Shift axes mirror the real corpora:
// sampling rate, amplitude scale, baseline wander, noise level, class priors
// and per-class morphology offsets (beat rate, QRS width, T-wave polarity).
struct SynthDomainSpec {
  std::string name = "D1";
  int fs = 500;
  double seconds = 10.0;
  double amplitude_scale = 1.0;
  double wander_amplitude = 0.1;
  double wander_freq = 0.3;
  double noise_std = 0.02;
  double rate_offset = 0.0;      // added to every class beat rate, Hz
  double qrs_width_factor = 1.0;
  bool t_flip = false;           // invert every T wave
  int record_count = 100;
  uint64_t seed = 0;
  std::vector<double> class_priors;  // empty = uniform over the label map
  double co_occurrence = 0.2;        // probability of a second label

  void validate(size_t num_classes) const;
};

// Codes SYN001.. with generic names.
dg::LabelMap synthetic_label_map(int num_classes);

// Sum of periodic Gaussian-bump beat templates (P/QRS/T per class), fixed
// per-class lead projections, domain baseline wander and Gaussian noise.
// Deterministic per (spec.seed, record index).
io::EcgRecord generate_record(const SynthDomainSpec& spec, const std::vector<std::string>& codes,
                              int64_t index, const dg::LabelMap& map);

// Writes portable records plus a manifest per domain under out_dir/<name>/,
// and the label map as out_dir/labels.csv. Label sampling follows the
// domain's class priors with the configured co-occurrence probability.
std::vector<io::DatasetManifest> generate_dataset(const std::vector<SynthDomainSpec>& specs,
                                                  const dg::LabelMap& map,
                                                  const std::string& out_dir);

}  // namespace ecgdg::synth
