#pragma once

// Test-side oracles, kept independent of the library implementation paths
// they check.

#include <cstdint>
#include <vector>

#include "ecgdg/matrix.hpp"
#include "ecgdg/tensor.hpp"

namespace oracles {

// Plain nested-loop cross-correlation, no blocking or parallelism.
ecgdg::nn::Tensor<double> conv1d_naive(const ecgdg::nn::Tensor<double>& input,
                                       const ecgdg::nn::Tensor<double>& weight,
                                       const ecgdg::nn::Tensor<double>& bias, int stride,
                                       int padding);

struct BiquadOrBa {
  std::vector<double> b, a;
};

// Low-pass Butterworth via the coefficient recurrence for the analog
// polynomial and a purely polynomial bilinear substitution (no pole
// arithmetic anywhere).
BiquadOrBa butterworth_lowpass_poly(int order, double cutoff_hz, double fs_hz);

// Literal RBJ cookbook notch: alpha = sin(w0) / (2 Q).
BiquadOrBa rbj_notch(double center_hz, double q, double fs_hz);

// Whittaker-Shannon interpolation with a Kaiser taper, half-width in input
// samples. Evaluates the signal resampled from fs_in to fs_out.
std::vector<double> sinc_resample(const std::vector<double>& x, int fs_in, int fs_out,
                                  int half_width = 64, double beta = 8.0);

struct ClassCounts {
  int64_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Brute-force confusion counting over every (record, class) cell.
std::vector<ClassCounts> count_metrics(const ecgdg::BinaryMatrix& predictions,
                                       const ecgdg::BinaryMatrix& truths);

// Expected conv/pool output length, restated from the shape formula.
inline int64_t out_len(int64_t len, int64_t kernel, int64_t stride, int64_t padding) {
  return (len + 2 * padding - kernel) / stride + 1;
}

}  // namespace oracles
