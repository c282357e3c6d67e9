#pragma once

#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecgdg/errors.hpp"
#include "ecgdg/tensor.hpp"

namespace ecgdg::nn {

// Named parameter tensors with matching gradient accumulators and Adam state.
// Non-trainable entries (batchnorm running stats) ride along so checkpoints
// capture the full model state.
template <typename T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> m, v;  // Adam moments, trainable entries only
    bool trainable = true;
  };

  Tensor<T>& create(const std::string& name, std::vector<int64_t> shape, bool trainable = true) {
    if (index_.count(name)) fail(ErrorCode::InvalidConfig, "duplicate parameter: " + name);
    Entry e;
    e.name = name;
    e.value = Tensor<T>(shape);
    e.grad = Tensor<T>(shape);
    if (trainable) {
      e.m = Tensor<T>(shape);
      e.v = Tensor<T>(shape);
    }
    e.trainable = trainable;
    index_[name] = entries_.size();
    entries_.push_back(std::move(e));
    return entries_.back().value;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Entry& entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCode::InvalidConfig, "unknown parameter: " + name);
    return entries_[it->second];
  }
  const Entry& entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCode::InvalidConfig, "unknown parameter: " + name);
    return entries_[it->second];
  }

  Tensor<T>& value(const std::string& name) { return entry(name).value; }
  const Tensor<T>& value(const std::string& name) const { return entry(name).value; }
  Tensor<T>& grad(const std::string& name) { return entry(name).grad; }

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  int64_t param_count(bool trainable_only = true) const {
    int64_t n = 0;
    for (const auto& e : entries_)
      if (e.trainable || !trainable_only) n += e.value.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), T(0));
    grads_populated_ = false;
  }

  void mark_grads_populated() { grads_populated_ = true; }
  bool grads_populated() const { return grads_populated_; }

  int64_t step_count() const { return step_count_; }

  // Bias-corrected Adam. One step count increment per call, shared by every
  // parameter.
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (!grads_populated_)
      fail(ErrorCode::NoGradients, "adam_step called before backward populated gradients");
    ++step_count_;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count_));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count_));
    for (auto& e : entries_) {
      if (!e.trainable) continue;
      for (size_t i = 0; i < e.value.data.size(); ++i) {
        double g = static_cast<double>(e.grad.data[i]);
        double m = beta1 * static_cast<double>(e.m.data[i]) + (1.0 - beta1) * g;
        double v = beta2 * static_cast<double>(e.v.data[i]) + (1.0 - beta2) * g * g;
        e.m.data[i] = static_cast<T>(m);
        e.v.data[i] = static_cast<T>(v);
        double update = lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        e.value.data[i] = static_cast<T>(static_cast<double>(e.value.data[i]) - update);
      }
    }
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> index_;
  bool grads_populated_ = false;
  int64_t step_count_ = 0;
};

// Checkpoint file: magic "EDGW", then per entry (u32 name length, name bytes,
// u32 rank, u64 dims..., float32 payload), all little-endian. Exactly the
// entries of the ParamSet, in registration order.
namespace detail {

inline void put_u32(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

inline bool get_u32(std::istream& in, uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
      static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
  return true;
}

inline bool get_u64(std::istream& in, uint64_t& v) {
  uint32_t lo, hi;
  if (!get_u32(in, lo) || !get_u32(in, hi)) return false;
  v = (static_cast<uint64_t>(hi) << 32) | lo;
  return true;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const ParamSet<T>& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write checkpoint: " + path);
  out.write("EDGW", 4);
  for (const auto& e : params.entries()) {
    detail::put_u32(out, static_cast<uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_u32(out, static_cast<uint32_t>(e.value.rank()));
    for (int64_t d : e.value.shape) detail::put_u64(out, static_cast<uint64_t>(d));
    for (const T& v : e.value.data) {
      float f = static_cast<float>(v);
      static_assert(sizeof(float) == 4);
      out.write(reinterpret_cast<const char*>(&f), 4);
    }
  }
  if (!out) fail(ErrorCode::IoFailure, "checkpoint write failed: " + path);
}

template <typename T>
void load_checkpoint(ParamSet<T>& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "EDGW", 4) != 0)
    fail(ErrorCode::CheckpointMismatch, path + ": bad magic, expected EDGW");

  std::unordered_map<std::string, Tensor<float>> loaded;
  uint32_t name_len;
  while (detail::get_u32(in, name_len)) {
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      fail(ErrorCode::CheckpointMismatch, path + ": truncated entry name");
    uint32_t rank;
    if (!detail::get_u32(in, rank))
      fail(ErrorCode::CheckpointMismatch, path + ": truncated entry rank");
    std::vector<int64_t> shape(rank);
    for (uint32_t i = 0; i < rank; ++i) {
      uint64_t d;
      if (!detail::get_u64(in, d))
        fail(ErrorCode::CheckpointMismatch, path + ": truncated entry dims");
      shape[i] = static_cast<int64_t>(d);
    }
    Tensor<float> t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * 4)))
      fail(ErrorCode::CheckpointMismatch, path + ": truncated payload for " + name);
    if (loaded.count(name)) fail(ErrorCode::CheckpointMismatch, path + ": duplicate entry " + name);
    loaded.emplace(std::move(name), std::move(t));
  }

  for (auto& e : params.entries()) {
    auto it = loaded.find(e.name);
    if (it == loaded.end())
      fail(ErrorCode::CheckpointMismatch, path + ": missing parameter " + e.name);
    if (it->second.shape != e.value.shape)
      fail(ErrorCode::CheckpointMismatch,
           path + ": shape mismatch for " + e.name + ": checkpoint " +
               shape_str(it->second.shape) + " vs model " + shape_str(e.value.shape));
    for (size_t i = 0; i < e.value.data.size(); ++i)
      e.value.data[i] = static_cast<T>(it->second.data[i]);
    loaded.erase(it);
  }
  if (!loaded.empty())
    fail(ErrorCode::CheckpointMismatch,
         path + ": checkpoint has entries unknown to the model, e.g. " + loaded.begin()->first);
}

}  // namespace ecgdg::nn
