#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "ecgdg/record.hpp"

namespace ecgdg::dsp {

struct FilterDesign {
  std::string kind;  // butterworth_lowpass | butterworth_highpass | notch | identity
  int order = 0;
  double cutoff_hz = 0.0;
  double fs_hz = 0.0;
  double q = 0.0;  // notch only
};

// Direct-form IIR coefficients, a[0] normalized to 1, all poles strictly
// inside the unit circle.
struct IirFilter {
  std::vector<double> b;
  std::vector<double> a;
  FilterDesign design;
};

// Analog Butterworth prototype mapped through the bilinear transform with
// frequency pre-warping. Unity DC gain, -3.01 dB at the cutoff.
IirFilter design_butterworth_lowpass(int order, double cutoff_hz, double fs_hz);

// High-pass companion (s -> omega/s prototype transform), unity Nyquist gain.
// Exposed for the --hp-alternative preprocessing switch.
IirFilter design_butterworth_highpass(int order, double cutoff_hz, double fs_hz);

// Second-order notch biquad: bilinear transform of
// (s^2 + w0^2) / (s^2 + w0/Q s + w0^2) with pre-warped w0. Exact zero at the
// center frequency, unity gain at DC and Nyquist.
IirFilter design_notch(double center_hz, double q, double fs_hz);

// Schur-Cohn test on the feedback polynomial.
bool is_stable(const std::vector<double>& a);

std::complex<double> frequency_response(const IirFilter& filter, double freq_hz);

inline double gain_db(const IirFilter& filter, double freq_hz) {
  return 20.0 * std::log10(std::abs(frequency_response(filter, freq_hz)));
}

// Direct-form transposed-II, zero initial conditions, forward pass only.
std::vector<double> apply_filter(const IirFilter& filter, const std::vector<double>& signal);

// Rational-ratio polyphase resampling: upsample by L, windowed-sinc
// anti-alias low-pass (Kaiser beta 8, cutoff 0.9 * min(fs)/2), downsample by
// M, with L/M = fs_out/fs_in reduced. Output length ceil(n * fs_out / fs_in);
// equal rates are an exact no-op.
std::vector<double> resample(const std::vector<double>& signal, int fs_in, int fs_out);

// Head truncation / zero tail padding to exactly target_len samples.
std::vector<double> fix_length(const std::vector<double>& signal, int64_t target_len);

// Joint min-max mapping across all leads (preserves inter-lead amplitude
// ratios); a constant record maps to all zeros.
void normalize_leads(std::vector<float>& leads, double lo, double hi);

struct PreprocessConfig {
  int target_fs = 500;
  int64_t target_len = 5000;
  int lp_order = 3;
  double lp_cutoff = 20.0;
  double notch_freq = 0.01;
  double notch_q = 0.707;
  double norm_lo = -1.0;
  double norm_hi = 1.0;
  bool hp_alternative = false;  // replace the notch with a 2nd-order high-pass

  void validate() const;
};

// Full chain, in order: resample -> fix_length -> low-pass -> notch ->
// normalize. Deterministic; leads are processed independently.
io::EcgRecord preprocess_record(const io::EcgRecord& record, const PreprocessConfig& cfg);

}  // namespace ecgdg::dsp
