#include "oracles.hpp"

#include <cmath>

namespace oracles {

ecgdg::nn::Tensor<double> conv1d_naive(const ecgdg::nn::Tensor<double>& input,
                                       const ecgdg::nn::Tensor<double>& weight,
                                       const ecgdg::nn::Tensor<double>& bias, int stride,
                                       int padding) {
  int64_t N = input.dim(0), Ci = input.dim(1), L = input.dim(2);
  int64_t Co = weight.dim(0), K = weight.dim(2);
  int64_t Lo = (L + 2 * padding - K) / stride + 1;
  ecgdg::nn::Tensor<double> out({N, Co, Lo});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t co = 0; co < Co; ++co)
      for (int64_t j = 0; j < Lo; ++j) {
        double acc = bias[co];
        for (int64_t ci = 0; ci < Ci; ++ci)
          for (int64_t k = 0; k < K; ++k) {
            int64_t l = j * stride - padding + k;
            if (l < 0 || l >= L) continue;
            acc += weight.at3(co, ci, k) * input.at3(n, ci, l);
          }
        out.at3(n, co, j) = acc;
      }
  return out;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

// Normalized Butterworth polynomial coefficients (ascending powers,
// a_0 = a_n = 1) from the product-form recurrence.
std::vector<double> butterworth_poly_coeffs(int order) {
  std::vector<double> a(static_cast<size_t>(order) + 1, 0.0);
  a[0] = 1.0;
  double gamma = kPi / (2.0 * order);
  for (int k = 0; k < order; ++k)
    a[static_cast<size_t>(k) + 1] =
        a[static_cast<size_t>(k)] * std::cos(k * gamma) / std::sin((k + 1) * gamma);
  return a;
}

// Coefficients of (1-x)^j (1+x)^m, ascending powers of x.
std::vector<double> binomial_mix(int j, int m) {
  std::vector<double> poly{1.0};
  for (int i = 0; i < j; ++i) {
    std::vector<double> next(poly.size() + 1, 0.0);
    for (size_t t = 0; t < poly.size(); ++t) {
      next[t] += poly[t];
      next[t + 1] -= poly[t];
    }
    poly = std::move(next);
  }
  for (int i = 0; i < m; ++i) {
    std::vector<double> next(poly.size() + 1, 0.0);
    for (size_t t = 0; t < poly.size(); ++t) {
      next[t] += poly[t];
      next[t + 1] += poly[t];
    }
    poly = std::move(next);
  }
  return poly;
}

}  // namespace

BiquadOrBa butterworth_lowpass_poly(int order, double cutoff_hz, double fs_hz) {
  // H(s) = 1 / B_n(s / warped); substitute s = 2 fs (1 - x) / (1 + x) with
  // x = z^{-1} and clear (1 + x)^n.
  std::vector<double> analog = butterworth_poly_coeffs(order);
  double warped = 2.0 * fs_hz * std::tan(kPi * cutoff_hz / fs_hz);
  double c = 2.0 * fs_hz / warped;

  std::vector<double> num = binomial_mix(0, order);  // (1+x)^n
  std::vector<double> den(static_cast<size_t>(order) + 1, 0.0);
  double ck = 1.0;
  for (int k = 0; k <= order; ++k) {
    std::vector<double> term = binomial_mix(k, order - k);
    for (size_t t = 0; t < term.size(); ++t) den[t] += analog[static_cast<size_t>(k)] * ck * term[t];
    ck *= c;
  }

  BiquadOrBa out;
  double norm = den[0];
  out.b.resize(num.size());
  out.a.resize(den.size());
  for (size_t i = 0; i < num.size(); ++i) out.b[i] = num[i] / norm;
  for (size_t i = 0; i < den.size(); ++i) out.a[i] = den[i] / norm;
  return out;
}

BiquadOrBa rbj_notch(double center_hz, double q, double fs_hz) {
  double w0 = 2.0 * kPi * center_hz / fs_hz;
  double alpha = std::sin(w0) / (2.0 * q);
  double cosw0 = std::cos(w0);
  double a0 = 1.0 + alpha;
  BiquadOrBa out;
  out.b = {1.0 / a0, -2.0 * cosw0 / a0, 1.0 / a0};
  out.a = {1.0, -2.0 * cosw0 / a0, (1.0 - alpha) / a0};
  return out;
}

namespace {

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

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

}  // namespace

std::vector<double> sinc_resample(const std::vector<double>& x, int fs_in, int fs_out,
                                  int half_width, double beta) {
  int64_t n = static_cast<int64_t>(x.size());
  int64_t out_len = (n * fs_out + fs_in - 1) / fs_in;
  double i0b = bessel_i0(beta);
  std::vector<double> y(static_cast<size_t>(out_len));
  for (int64_t j = 0; j < out_len; ++j) {
    double t = static_cast<double>(j) * fs_in / fs_out;  // input-sample units
    int64_t k0 = static_cast<int64_t>(std::floor(t)) - half_width;
    int64_t k1 = static_cast<int64_t>(std::floor(t)) + half_width + 1;
    double acc = 0.0;
    for (int64_t k = std::max<int64_t>(k0, 0); k < std::min<int64_t>(k1, n); ++k) {
      double d = t - static_cast<double>(k);
      double frac = d / half_width;
      double w = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) / i0b;
      acc += x[static_cast<size_t>(k)] * sinc(d) * w;
    }
    y[static_cast<size_t>(j)] = acc;
  }
  return y;
}

std::vector<ClassCounts> count_metrics(const ecgdg::BinaryMatrix& predictions,
                                       const ecgdg::BinaryMatrix& truths) {
  std::vector<ClassCounts> out(static_cast<size_t>(predictions.cols));
  for (int64_t r = 0; r < predictions.rows; ++r)
    for (int64_t c = 0; c < predictions.cols; ++c) {
      auto& cc = out[static_cast<size_t>(c)];
      if (predictions.at(r, c) && truths.at(r, c)) ++cc.tp;
      if (predictions.at(r, c) && !truths.at(r, c)) ++cc.fp;
      if (!predictions.at(r, c) && truths.at(r, c)) ++cc.fn;
    }
  for (auto& cc : out) {
    cc.precision = cc.tp + cc.fp > 0 ? double(cc.tp) / double(cc.tp + cc.fp) : 0.0;
    cc.recall = cc.tp + cc.fn > 0 ? double(cc.tp) / double(cc.tp + cc.fn) : 0.0;
    cc.f1 = cc.precision + cc.recall > 0.0
                ? 2.0 * cc.precision * cc.recall / (cc.precision + cc.recall)
                : 0.0;
  }
  return out;
}

}  // namespace oracles
