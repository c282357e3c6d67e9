#pragma once

#include <map>
#include <string>
#include <vector>

#include "ecgdg/matrix.hpp"
#include "ecgdg/tape.hpp"

namespace ecgdg::nn {

enum class HeadMode { Sigmoid, Softmax };

inline const char* head_mode_name(HeadMode m) {
  return m == HeadMode::Sigmoid ? "sigmoid" : "softmax";
}

HeadMode parse_head_mode(const std::string& text);

// Architecture knobs. The default is the full model: 4 stages x 2 basic
// blocks of the 1-D ResNet-18 backbone, a tap pipeline (1x1 conv -> spatial
// dropout -> GAP) on each of the 16 block convolutions, concat width
// 16 * 32 = 512, and a dense head. Reduced variants shrink channels or
// stages for desk-scale runs; tap count always tracks 2 per block.
struct ModelConfig {
  int in_leads = 12;
  int num_classes = 24;
  int stem_kernel = 15;
  int stem_stride = 2;
  int stem_channels = 64;
  int pool_kernel = 3;
  int pool_stride = 2;
  int pool_padding = 1;
  std::vector<int> stage_channels = {64, 128, 256, 512};
  std::vector<int> blocks_per_stage = {2, 2, 2, 2};
  int tap_projection_channels = 32;
  double dropout_rate = 0.1;
  HeadMode head_mode = HeadMode::Sigmoid;
  double decision_threshold = 0.5;
  bool multiscale = true;
  // Tap placement, block-conv ids like "s1b1c1"; empty means every block
  // conv (the 16-tap default on the full backbone).
  std::vector<std::string> tap_points;

  void validate() const;
  int total_blocks() const;
  // Every block conv id, in forward order.
  std::vector<std::string> all_conv_points() const;
  std::vector<std::string> effective_tap_points() const;

  std::map<std::string, std::string> to_key_values() const;
  static ModelConfig from_key_values(const std::map<std::string, std::string>& kv);
};

struct TraceRow {
  std::string name;
  std::vector<int64_t> shape;
};
using ForwardTrace = std::vector<TraceRow>;

// The assembled network: all parameters and batchnorm running stats live in
// one ParamSet; dropout draws from one named substream per tap so adding or
// removing taps never perturbs the others.
template <typename T>
struct ModelGraph {
  ModelConfig cfg;
  uint64_t seed = 0;
  ParamSet<T> params;
  std::vector<Philox> dropout_streams;  // parallel to effective_tap_points()
  std::vector<std::string> taps;

  int64_t param_count() const { return params.param_count(true); }
};

template <typename T>
ModelGraph<T> build_model(const ModelConfig& cfg, uint64_t seed);

// Runs the backbone, routes each tapped activation through its pipeline,
// concatenates and applies the head (multiscale) or pools the final stage
// into the head (baseline). Dropout is active only in train mode. Optional
// trace/stage capture are observers for structural tests.
template <typename T>
ValueId forward(Tape<T>& tape, ModelGraph<T>& model, const Tensor<T>& batch, bool train,
                ForwardTrace* trace = nullptr, std::vector<Tensor<T>>* stage_outputs = nullptr);

// Thresholded per-class decisions. Sigmoid mode: positive iff sigmoid(z) >=
// threshold. Softmax mode: positive iff probability >= threshold, with an
// argmax fallback so no row is left empty.
template <typename T>
BinaryMatrix predict(const Tensor<T>& logits, HeadMode mode, double threshold);

// --- implementation ----------------------------------------------------------

inline int ModelConfig::total_blocks() const {
  int n = 0;
  for (int b : blocks_per_stage) n += b;
  return n;
}

inline std::vector<std::string> ModelConfig::all_conv_points() const {
  std::vector<std::string> out;
  for (size_t s = 0; s < blocks_per_stage.size(); ++s)
    for (int b = 1; b <= blocks_per_stage[s]; ++b) {
      std::string base = "s" + std::to_string(s + 1) + "b" + std::to_string(b);
      out.push_back(base + "c1");
      out.push_back(base + "c2");
    }
  return out;
}

inline std::vector<std::string> ModelConfig::effective_tap_points() const {
  return tap_points.empty() ? all_conv_points() : tap_points;
}

inline void ModelConfig::validate() const {
  if (in_leads != 12) fail(ErrorCode::InvalidConfig, "in_leads is fixed at 12");
  if (num_classes < 1) fail(ErrorCode::InvalidConfig, "num_classes must be >= 1");
  if (stage_channels.empty() || stage_channels.size() != blocks_per_stage.size())
    fail(ErrorCode::InvalidConfig, "stage_channels and blocks_per_stage must align");
  for (int c : stage_channels)
    if (c < 1) fail(ErrorCode::InvalidConfig, "stage channels must be positive");
  for (int b : blocks_per_stage)
    if (b < 1) fail(ErrorCode::InvalidConfig, "blocks per stage must be positive");
  if (stem_channels != stage_channels[0])
    fail(ErrorCode::InvalidConfig, "stem_channels must equal the first stage width");
  if (stem_kernel < 1 || stem_stride < 1) fail(ErrorCode::InvalidConfig, "bad stem geometry");
  if (tap_projection_channels < 1)
    fail(ErrorCode::InvalidConfig, "tap_projection_channels must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    fail(ErrorCode::InvalidConfig, "dropout_rate must be in [0,1)");
  if (decision_threshold < 0.0 || decision_threshold > 1.0)
    fail(ErrorCode::InvalidConfig, "decision_threshold must be in [0,1]");
  auto valid = all_conv_points();
  for (const auto& t : tap_points) {
    bool known = false;
    for (const auto& v : valid) known = known || v == t;
    if (!known) fail(ErrorCode::InvalidConfig, "unknown tap point: " + t);
  }
}

namespace detail {

template <typename T>
void init_conv(ParamSet<T>& params, Philox rng, const std::string& name, int64_t co, int64_t ci,
               int64_t k, double gain) {
  Tensor<T>& w = params.create(name + ".weight", {co, ci, k});
  double bound = gain * std::sqrt(3.0 / static_cast<double>(ci * k));
  for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
  params.create(name + ".bias", {co});
}

template <typename T>
void init_bn(ParamSet<T>& params, const std::string& name, int64_t c) {
  Tensor<T>& gamma = params.create(name + ".gamma", {c});
  std::fill(gamma.data.begin(), gamma.data.end(), T(1));
  params.create(name + ".beta", {c});
  params.create(name + ".running_mean", {c}, false);
  Tensor<T>& rv = params.create(name + ".running_var", {c}, false);
  std::fill(rv.data.begin(), rv.data.end(), T(1));
}

inline constexpr double kReluGain = 1.4142135623730951;  // sqrt(2)
inline constexpr double kBnMomentum = 0.1;
inline constexpr double kBnEps = 1e-5;

}  // namespace detail

template <typename T>
ModelGraph<T> build_model(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ModelGraph<T> m;
  m.cfg = cfg;
  m.seed = seed;
  m.taps = cfg.effective_tap_points();

  auto conv_stream = [&](const std::string& name) { return named_stream(seed, "init/" + name); };

  detail::init_conv(m.params, conv_stream("stem.conv"), "stem.conv", cfg.stem_channels,
                    cfg.in_leads, cfg.stem_kernel, detail::kReluGain);
  detail::init_bn(m.params, "stem.bn", cfg.stem_channels);

  int in_ch = cfg.stem_channels;
  for (size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    int out_ch = cfg.stage_channels[s];
    for (int b = 1; b <= cfg.blocks_per_stage[s]; ++b) {
      std::string base = "s" + std::to_string(s + 1) + "b" + std::to_string(b);
      bool down = (s > 0 && b == 1);
      detail::init_conv(m.params, conv_stream(base + ".conv1"), base + ".conv1", out_ch, in_ch, 3,
                        detail::kReluGain);
      detail::init_bn(m.params, base + ".bn1", out_ch);
      detail::init_conv(m.params, conv_stream(base + ".conv2"), base + ".conv2", out_ch, out_ch, 3,
                        detail::kReluGain);
      detail::init_bn(m.params, base + ".bn2", out_ch);
      if (down) {
        detail::init_conv(m.params, conv_stream(base + ".down.conv"), base + ".down.conv", out_ch,
                          in_ch, 1, detail::kReluGain);
        detail::init_bn(m.params, base + ".down.bn", out_ch);
      }
      in_ch = out_ch;
    }
  }

  int64_t head_in;
  if (cfg.multiscale) {
    // Tap input widths depend on placement: c1/c2 both see the block's
    // output channel count.
    for (const auto& tp : m.taps) {
      int stage = tp[1] - '0';
      int ch = cfg.stage_channels[static_cast<size_t>(stage - 1)];
      detail::init_conv(m.params, conv_stream("tap." + tp + ".conv"), "tap." + tp + ".conv",
                        cfg.tap_projection_channels, ch, 1, 1.0);
      m.dropout_streams.push_back(named_stream(seed, "dropout/" + tp));
    }
    head_in = static_cast<int64_t>(m.taps.size()) * cfg.tap_projection_channels;
  } else {
    head_in = cfg.stage_channels.back();
  }

  {
    Tensor<T>& w = m.params.create("head.weight", {cfg.num_classes, head_in});
    Philox rng = conv_stream("head");
    double bound = std::sqrt(3.0 / static_cast<double>(head_in));
    for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
    m.params.create("head.bias", {cfg.num_classes});
  }
  return m;
}

namespace detail {

template <typename T>
ValueId conv_bn(Tape<T>& tape, ModelGraph<T>& model, ValueId x, const std::string& conv,
                const std::string& bn, int stride, int padding, bool train, ForwardTrace* trace) {
  ValueId w = tape.param(model.params, conv + ".weight");
  ValueId b = tape.param(model.params, conv + ".bias");
  ValueId y = tape.conv1d(x, w, b, stride, padding);
  if (trace) trace->push_back({conv, tape.value(y).shape});
  ValueId gamma = tape.param(model.params, bn + ".gamma");
  ValueId beta = tape.param(model.params, bn + ".beta");
  y = tape.batchnorm1d(y, gamma, beta, model.params.value(bn + ".running_mean"),
                       model.params.value(bn + ".running_var"), kBnMomentum, kBnEps, train);
  return y;
}

}  // namespace detail

template <typename T>
ValueId forward(Tape<T>& tape, ModelGraph<T>& model, const Tensor<T>& batch, bool train,
                ForwardTrace* trace, std::vector<Tensor<T>>* stage_outputs) {
  const ModelConfig& cfg = model.cfg;
  if (batch.rank() != 3 || batch.dim(1) != cfg.in_leads)
    fail(ErrorCode::ShapeMismatch,
         "forward expects (N, " + std::to_string(cfg.in_leads) + ", L), got " +
             shape_str(batch.shape));
  // Single-record batches normalize with running stats and skip the stat
  // update; dropout still follows the train flag.
  bool bn_train = train && batch.dim(0) > 1;

  ValueId x = tape.leaf(batch, false);
  if (trace) trace->push_back({"input", batch.shape});

  x = detail::conv_bn(tape, model, x, "stem.conv", "stem.bn", cfg.stem_stride,
                      (cfg.stem_kernel - 1) / 2, bn_train, trace);
  x = tape.relu(x);
  x = tape.maxpool1d(x, cfg.pool_kernel, cfg.pool_stride, cfg.pool_padding);
  if (trace) trace->push_back({"stem.pool", tape.value(x).shape});

  auto tap_index = [&](const std::string& point) -> int {
    for (size_t i = 0; i < model.taps.size(); ++i)
      if (model.taps[i] == point) return static_cast<int>(i);
    return -1;
  };

  std::vector<ValueId> tap_vectors(model.taps.size());
  auto run_tap = [&](const std::string& point, ValueId activation) {
    if (!cfg.multiscale) return;
    int idx = tap_index(point);
    if (idx < 0) return;
    ValueId w = tape.param(model.params, "tap." + point + ".conv.weight");
    ValueId b = tape.param(model.params, "tap." + point + ".conv.bias");
    ValueId y = tape.conv1d(activation, w, b, 1, 0);
    if (trace) trace->push_back({"tap." + point + ".conv", tape.value(y).shape});
    y = tape.spatial_dropout(y, cfg.dropout_rate, train,
                             model.dropout_streams[static_cast<size_t>(idx)]);
    y = tape.global_avg_pool(y);
    if (trace) trace->push_back({"tap." + point + ".gap", tape.value(y).shape});
    tap_vectors[static_cast<size_t>(idx)] = y;
  };

  for (size_t s = 0; s < cfg.stage_channels.size(); ++s) {
    for (int b = 1; b <= cfg.blocks_per_stage[s]; ++b) {
      std::string base = "s" + std::to_string(s + 1) + "b" + std::to_string(b);
      bool down = (s > 0 && b == 1);
      int stride = down ? 2 : 1;

      ValueId identity = x;
      ValueId y = detail::conv_bn(tape, model, x, base + ".conv1", base + ".bn1", stride, 1,
                                  bn_train, trace);
      y = tape.relu(y);
      run_tap(base + "c1", y);

      y = detail::conv_bn(tape, model, y, base + ".conv2", base + ".bn2", 1, 1, bn_train, trace);
      if (down)
        identity = detail::conv_bn(tape, model, identity, base + ".down.conv", base + ".down.bn",
                                   stride, 0, bn_train, trace);
      x = tape.relu(tape.add(y, identity));
      run_tap(base + "c2", x);
    }
    if (stage_outputs) stage_outputs->push_back(tape.value(x));
    if (trace)
      trace->push_back({"stage" + std::to_string(s + 1) + ".out", tape.value(x).shape});
  }

  ValueId feat;
  if (cfg.multiscale) {
    feat = tape.concat(tap_vectors);
  } else {
    feat = tape.global_avg_pool(x);
  }
  if (trace) trace->push_back({"features", tape.value(feat).shape});

  ValueId hw = tape.param(model.params, "head.weight");
  ValueId hb = tape.param(model.params, "head.bias");
  ValueId logits = tape.dense(feat, hw, hb);
  if (trace) trace->push_back({"logits", tape.value(logits).shape});
  return logits;
}

template <typename T>
BinaryMatrix predict(const Tensor<T>& logits, HeadMode mode, double threshold) {
  if (logits.rank() != 2) fail(ErrorCode::ShapeMismatch, "predict expects (N,C) logits");
  int64_t N = logits.dim(0), C = logits.dim(1);
  BinaryMatrix out(N, C);
  for (int64_t n = 0; n < N; ++n) {
    if (mode == HeadMode::Sigmoid) {
      for (int64_t c = 0; c < C; ++c) {
        double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logits.at2(n, c))));
        out.at(n, c) = p >= threshold ? 1 : 0;
      }
    } else {
      double zmax = static_cast<double>(logits.at2(n, 0));
      int64_t argmax = 0;
      for (int64_t c = 1; c < C; ++c) {
        if (static_cast<double>(logits.at2(n, c)) > zmax) {
          zmax = static_cast<double>(logits.at2(n, c));
          argmax = c;
        }
      }
      double se = 0.0;
      for (int64_t c = 0; c < C; ++c) se += std::exp(static_cast<double>(logits.at2(n, c)) - zmax);
      bool any = false;
      for (int64_t c = 0; c < C; ++c) {
        double p = std::exp(static_cast<double>(logits.at2(n, c)) - zmax) / se;
        out.at(n, c) = p >= threshold ? 1 : 0;
        any = any || out.at(n, c);
      }
      if (!any) out.at(n, argmax) = 1;  // guarantee a non-empty prediction
    }
  }
  return out;
}

}  // namespace ecgdg::nn
