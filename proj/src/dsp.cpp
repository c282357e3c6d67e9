#include "ecgdg/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecgdg/errors.hpp"
#include "ecgdg/parallel.hpp"

namespace ecgdg::dsp {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_cutoff(double cutoff_hz, double fs_hz) {
  if (fs_hz <= 0.0) fail(ErrorCode::InvalidCutoff, "fs must be positive");
  if (cutoff_hz <= 0.0 || cutoff_hz >= fs_hz / 2.0)
    fail(ErrorCode::InvalidCutoff, "cutoff must lie in (0, fs/2), got " +
                                       std::to_string(cutoff_hz) + " at fs " +
                                       std::to_string(fs_hz));
}

// Expands a monic polynomial from its roots. Roots come in conjugate pairs
// (or are real), so imaginary parts cancel; they are dropped at the end.
std::vector<double> poly_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> c(roots.size() + 1, {0.0, 0.0});
  c[0] = {1.0, 0.0};
  for (size_t k = 0; k < roots.size(); ++k) {
    for (size_t i = k + 1; i > 0; --i) c[i] = c[i] - roots[k] * c[i - 1];
  }
  std::vector<double> out(c.size());
  for (size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

// Left-half-plane poles of the analog Butterworth prototype (cutoff 1 rad/s).
std::vector<std::complex<double>> butterworth_prototype_poles(int order) {
  std::vector<std::complex<double>> poles;
  poles.reserve(static_cast<size_t>(order));
  for (int k = 0; k < order; ++k) {
    double theta = kPi * (2.0 * k + order + 1.0) / (2.0 * order);
    poles.emplace_back(std::cos(theta), std::sin(theta));
  }
  return poles;
}

std::complex<double> bilinear_pole(std::complex<double> s_pole, double fs2) {
  return (fs2 + s_pole) / (fs2 - s_pole);
}

double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  double half = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half / k) * (half / k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

int64_t ceil_div(int64_t a, int64_t b) {  // b > 0
  return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

}  // namespace

bool is_stable(const std::vector<double>& a) {
  if (a.empty() || a[0] == 0.0) return false;
  std::vector<double> c(a.begin(), a.end());
  for (auto& v : c)
    if (!std::isfinite(v)) return false;
  for (double& v : c) v /= a[0];
  // Schur-Cohn recursion: |reflection coefficient| < 1 at every step.
  while (c.size() > 1) {
    size_t n = c.size() - 1;
    double r = c[n];
    if (std::abs(r) >= 1.0) return false;
    double denom = 1.0 - r * r;
    std::vector<double> next(n);
    for (size_t i = 0; i < n; ++i) next[i] = (c[i] - r * c[n - i]) / denom;
    c = std::move(next);
  }
  return true;
}

std::complex<double> frequency_response(const IirFilter& filter, double freq_hz) {
  double omega = 2.0 * kPi * freq_hz / filter.design.fs_hz;
  std::complex<double> z_inv = std::exp(std::complex<double>(0.0, -omega));
  std::complex<double> num{0.0, 0.0}, den{0.0, 0.0}, zk{1.0, 0.0};
  size_t n = std::max(filter.b.size(), filter.a.size());
  for (size_t k = 0; k < n; ++k) {
    if (k < filter.b.size()) num += filter.b[k] * zk;
    if (k < filter.a.size()) den += filter.a[k] * zk;
    zk *= z_inv;
  }
  return num / den;
}

IirFilter design_butterworth_lowpass(int order, double cutoff_hz, double fs_hz) {
  if (order < 1) fail(ErrorCode::InvalidCutoff, "order must be >= 1");
  check_cutoff(cutoff_hz, fs_hz);

  double warped = 2.0 * fs_hz * std::tan(kPi * cutoff_hz / fs_hz);
  double fs2 = 2.0 * fs_hz;

  std::vector<std::complex<double>> zpoles;
  for (auto p : butterworth_prototype_poles(order)) zpoles.push_back(bilinear_pole(p * warped, fs2));
  std::vector<std::complex<double>> zzeros(static_cast<size_t>(order),
                                           std::complex<double>(-1.0, 0.0));

  IirFilter f;
  f.a = poly_from_roots(zpoles);
  f.b = poly_from_roots(zzeros);

  // Unity gain at z = 1 (DC).
  std::complex<double> num{1.0, 0.0}, den{1.0, 0.0};
  for (auto z : zzeros) num *= (std::complex<double>(1.0, 0.0) - z);
  for (auto p : zpoles) den *= (std::complex<double>(1.0, 0.0) - p);
  double k = (den / num).real();
  for (auto& v : f.b) v *= k;

  f.design = {"butterworth_lowpass", order, cutoff_hz, fs_hz, 0.0};
  return f;
}

IirFilter design_butterworth_highpass(int order, double cutoff_hz, double fs_hz) {
  if (order < 1) fail(ErrorCode::InvalidCutoff, "order must be >= 1");
  check_cutoff(cutoff_hz, fs_hz);

  double warped = 2.0 * fs_hz * std::tan(kPi * cutoff_hz / fs_hz);
  double fs2 = 2.0 * fs_hz;

  // s -> warped / s maps the low-pass prototype to a high-pass.
  std::vector<std::complex<double>> zpoles;
  for (auto p : butterworth_prototype_poles(order)) zpoles.push_back(bilinear_pole(warped / p, fs2));
  std::vector<std::complex<double>> zzeros(static_cast<size_t>(order),
                                           std::complex<double>(1.0, 0.0));

  IirFilter f;
  f.a = poly_from_roots(zpoles);
  f.b = poly_from_roots(zzeros);

  // Unity gain at z = -1 (Nyquist).
  std::complex<double> num{1.0, 0.0}, den{1.0, 0.0};
  for (auto z : zzeros) num *= (std::complex<double>(-1.0, 0.0) - z);
  for (auto p : zpoles) den *= (std::complex<double>(-1.0, 0.0) - p);
  double k = (den / num).real();
  for (auto& v : f.b) v *= k;

  f.design = {"butterworth_highpass", order, cutoff_hz, fs_hz, 0.0};
  return f;
}

IirFilter design_notch(double center_hz, double q, double fs_hz) {
  check_cutoff(center_hz, fs_hz);
  if (q <= 0.0) fail(ErrorCode::InvalidCutoff, "notch Q must be positive");

  // Bilinear transform of (s^2 + 1) / (s^2 + s/Q + 1) with the prototype
  // frequency mapped so the zero lands exactly on e^{+-j w0}. With
  // c = cot(w0/2) the substitution s = c (z-1)/(z+1) gives, after clearing
  // (z+1)^2:
  //   num: (c^2+1) z^2 + 2(1-c^2) z + (c^2+1)
  //   den: (c^2+c/Q+1) z^2 + 2(1-c^2) z + (c^2-c/Q+1)
  double w0 = 2.0 * kPi * center_hz / fs_hz;
  double c = 1.0 / std::tan(w0 / 2.0);
  double c2 = c * c;
  double cq = c / q;
  double d0 = c2 + cq + 1.0;

  IirFilter f;
  f.b = {(c2 + 1.0) / d0, 2.0 * (1.0 - c2) / d0, (c2 + 1.0) / d0};
  f.a = {1.0, 2.0 * (1.0 - c2) / d0, (c2 - cq + 1.0) / d0};
  f.design = {"notch", 2, center_hz, fs_hz, q};
  return f;
}

std::vector<double> apply_filter(const IirFilter& filter, const std::vector<double>& signal) {
  if (signal.empty()) fail(ErrorCode::NonFiniteInput, "empty signal");
  if (filter.b.empty() || filter.a.empty() || filter.a[0] != 1.0)
    fail(ErrorCode::InvalidConfig, "filter coefficients not normalized");
  if (!is_stable(filter.a)) fail(ErrorCode::InvalidConfig, "unstable filter");
  for (double v : signal)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "signal contains NaN or Inf");

  size_t order = std::max(filter.b.size(), filter.a.size()) - 1;
  std::vector<double> b(filter.b), a(filter.a);
  b.resize(order + 1, 0.0);
  a.resize(order + 1, 0.0);

  std::vector<double> state(order, 0.0);
  std::vector<double> out(signal.size());
  for (size_t n = 0; n < signal.size(); ++n) {
    double x = signal[n];
    double y = b[0] * x + (order > 0 ? state[0] : 0.0);
    for (size_t i = 0; i + 1 < order; ++i) state[i] = state[i + 1] + b[i + 1] * x - a[i + 1] * y;
    if (order > 0) state[order - 1] = b[order] * x - a[order] * y;
    out[n] = y;
  }
  return out;
}

std::vector<double> resample(const std::vector<double>& signal, int fs_in, int fs_out) {
  if (fs_in <= 0 || fs_out <= 0) fail(ErrorCode::InvalidRate, "sampling rates must be positive");
  if (fs_in == fs_out) return signal;
  if (signal.empty()) return {};

  int64_t g = std::gcd(static_cast<int64_t>(fs_in), static_cast<int64_t>(fs_out));
  int64_t up = fs_out / g;
  int64_t down = fs_in / g;

  // Windowed-sinc low-pass at the upsampled rate fs_in * up.
  double cutoff_hz = 0.9 * 0.5 * std::min(fs_in, fs_out);
  double fc = cutoff_hz / (static_cast<double>(fs_in) * static_cast<double>(up));
  int64_t half = 10 * std::max(up, down);
  int64_t taps = 2 * half + 1;

  constexpr double kBeta = 8.0;
  double i0_beta = bessel_i0(kBeta);
  std::vector<double> h(static_cast<size_t>(taps));
  for (int64_t i = 0; i < taps; ++i) {
    double t = static_cast<double>(i - half);
    double sinc = t == 0.0 ? 2.0 * fc : std::sin(2.0 * kPi * fc * t) / (kPi * t);
    double frac = t / static_cast<double>(half);
    double win = bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) / i0_beta;
    h[static_cast<size_t>(i)] = sinc * win;
  }
  // Overall gain up (compensates zero insertion); normalized so the kernel
  // sums to exactly up.
  double sum = std::accumulate(h.begin(), h.end(), 0.0);
  double scale = static_cast<double>(up) / sum;
  for (auto& v : h) v *= scale;

  int64_t n = static_cast<int64_t>(signal.size());
  int64_t out_len = (n * up + down - 1) / down;  // ceil(n * fs_out / fs_in)
  std::vector<double> out(static_cast<size_t>(out_len));
  for (int64_t j = 0; j < out_len; ++j) {
    int64_t t = j * down;  // output instant on the upsampled grid
    int64_t kmin = std::max<int64_t>(ceil_div(t - half, up), 0);
    int64_t kmax = std::min<int64_t>((t + half) / up, n - 1);
    double acc = 0.0;
    for (int64_t k = kmin; k <= kmax; ++k)
      acc += signal[static_cast<size_t>(k)] * h[static_cast<size_t>(t - k * up + half)];
    out[static_cast<size_t>(j)] = acc;
  }
  return out;
}

std::vector<double> fix_length(const std::vector<double>& signal, int64_t target_len) {
  if (target_len <= 0) fail(ErrorCode::InvalidConfig, "target_len must be positive");
  std::vector<double> out(static_cast<size_t>(target_len), 0.0);
  size_t keep = std::min<size_t>(signal.size(), static_cast<size_t>(target_len));
  std::copy(signal.begin(), signal.begin() + static_cast<int64_t>(keep), out.begin());
  return out;
}

void normalize_leads(std::vector<float>& leads, double lo, double hi) {
  if (leads.empty()) return;
  double mn = leads[0], mx = leads[0];
  for (float v : leads) {
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, "leads contain NaN or Inf");
    mn = std::min(mn, static_cast<double>(v));
    mx = std::max(mx, static_cast<double>(v));
  }
  if (mx == mn) {
    std::fill(leads.begin(), leads.end(), 0.0f);
    return;
  }
  double span = mx - mn;
  double width = hi - lo;
  for (float& v : leads) {
    double t = (static_cast<double>(v) - mn) / span;  // exactly 1 at the max
    v = static_cast<float>(lo + t * width);
  }
}

void PreprocessConfig::validate() const {
  if (target_fs <= 0) fail(ErrorCode::InvalidConfig, "target_fs must be positive");
  if (target_len <= 0) fail(ErrorCode::InvalidConfig, "target_len must be positive");
  if (static_cast<double>(target_fs) <= 2.0 * lp_cutoff)
    fail(ErrorCode::InvalidConfig, "target_fs must exceed twice the low-pass cutoff");
  if (norm_hi <= norm_lo) fail(ErrorCode::InvalidConfig, "norm range is empty");
}

io::EcgRecord preprocess_record(const io::EcgRecord& record, const PreprocessConfig& cfg) {
  cfg.validate();
  if (record.fs <= 0) fail(ErrorCode::InvalidRate, record.id + ": fs must be positive");
  for (float v : record.leads)
    if (!std::isfinite(v)) fail(ErrorCode::NonFiniteInput, record.id + ": NaN/Inf sample");

  IirFilter lowpass = design_butterworth_lowpass(cfg.lp_order, cfg.lp_cutoff,
                                                 static_cast<double>(cfg.target_fs));
  IirFilter second = cfg.hp_alternative
                         ? design_butterworth_highpass(2, cfg.notch_freq,
                                                       static_cast<double>(cfg.target_fs))
                         : design_notch(cfg.notch_freq, cfg.notch_q,
                                        static_cast<double>(cfg.target_fs));

  io::EcgRecord out;
  out.id = record.id;
  out.fs = cfg.target_fs;
  out.num_samples = cfg.target_len;
  out.labels = record.labels;
  out.domain = record.domain;
  out.age = record.age;
  out.sex = record.sex;
  out.leads.resize(static_cast<size_t>(io::kNumLeads) * cfg.target_len);

  for (int lead = 0; lead < io::kNumLeads; ++lead) {
    std::vector<double> x(record.lead(lead), record.lead(lead) + record.num_samples);
    x = resample(x, record.fs, cfg.target_fs);
    x = fix_length(x, cfg.target_len);
    x = apply_filter(lowpass, x);
    x = apply_filter(second, x);
    float* dst = out.lead(lead);
    for (int64_t i = 0; i < cfg.target_len; ++i) dst[i] = static_cast<float>(x[static_cast<size_t>(i)]);
  }
  normalize_leads(out.leads, cfg.norm_lo, cfg.norm_hi);
  return out;
}

}  // namespace ecgdg::dsp
