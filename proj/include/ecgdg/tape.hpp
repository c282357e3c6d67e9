#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ecgdg/errors.hpp"
#include "ecgdg/parallel.hpp"
#include "ecgdg/params.hpp"
#include "ecgdg/rng.hpp"
#include "ecgdg/tensor.hpp"

namespace ecgdg::nn {

// When set, every op output is scanned for NaN/Inf (slow; used by tests).
void set_finite_checks(bool on);
bool finite_checks();

struct ValueId {
  int64_t tape = -1;
  int32_t index = -1;
};

// Reverse-mode differentiation record. Ops append nodes in execution order;
// backward() replays them in exact reverse, accumulating gradients. Values
// are immutable once recorded. Single-writer: one thread builds and consumes
// a tape (ops may parallelize internally over disjoint output ranges).
template <typename T>
class Tape {
 public:
  Tape() : id_(next_id_.fetch_add(1)) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  ValueId leaf(Tensor<T> value, bool requires_grad = false) {
    return push(std::move(value), requires_grad, {});
  }

  // Stages a named parameter; backward() adds its gradient into the set.
  ValueId param(ParamSet<T>& params, const std::string& name) {
    auto& e = params.entry(name);
    ValueId id = push(e.value, e.trainable, {});
    if (e.trainable) param_links_.push_back({id.index, &params, name});
    return id;
  }

  const Tensor<T>& value(ValueId id) const { return values_[check(id)]; }

  const Tensor<T>& grad(ValueId id) const {
    if (grads_.empty()) fail(ErrorCode::NoGradients, "backward has not run");
    return grads_[check(id)];
  }

  // --- ops -----------------------------------------------------------------

  ValueId conv1d(ValueId input, ValueId weight, ValueId bias, int stride, int padding);
  ValueId batchnorm1d(ValueId input, ValueId gamma, ValueId beta, Tensor<T>& running_mean,
                      Tensor<T>& running_var, double momentum, double eps, bool train);
  ValueId relu(ValueId x);
  ValueId add(ValueId a, ValueId b);
  ValueId maxpool1d(ValueId x, int kernel, int stride, int padding);
  ValueId global_avg_pool(ValueId x);
  ValueId dense(ValueId x, ValueId weight, ValueId bias);
  ValueId concat(const std::vector<ValueId>& xs);
  ValueId slice_cols(ValueId x, int64_t begin, int64_t end);
  ValueId spatial_dropout(ValueId x, double rate, bool train, Philox& rng);
  ValueId softmax_ce(ValueId logits, ValueId targets);
  ValueId sigmoid_bce(ValueId logits, ValueId targets);
  ValueId sum(ValueId x);
  ValueId mul(ValueId a, ValueId b);

  // Reverse traversal from a scalar loss. Gradients of staged parameters are
  // accumulated additively into their ParamSet (repeat calls without
  // zero_grad() keep adding).
  void backward(ValueId loss) {
    size_t loss_idx = 0;
    if (loss.tape != id_ || loss.index < 0 || loss.index >= static_cast<int32_t>(values_.size()))
      fail(ErrorCode::DetachedLoss, "loss value does not belong to this tape");
    loss_idx = static_cast<size_t>(loss.index);
    if (values_[loss_idx].numel() != 1)
      fail(ErrorCode::NotScalar, "backward requires a scalar loss, got shape " +
                                     shape_str(values_[loss_idx].shape));

    grads_.clear();
    grads_.resize(values_.size());
    for (size_t i = 0; i < values_.size(); ++i) grads_[i] = Tensor<T>(values_[i].shape);
    grads_[loss_idx].data[0] = T(1);

    for (size_t i = nodes_.size(); i-- > 0;) {
      if (nodes_[i].needs_grad && nodes_[i].backprop) nodes_[i].backprop();
    }

    for (const auto& link : param_links_) {
      auto& entry = link.params->entry(link.name);
      const Tensor<T>& g = grads_[static_cast<size_t>(link.index)];
      for (size_t i = 0; i < entry.grad.data.size(); ++i) entry.grad.data[i] += g.data[i];
      link.params->mark_grads_populated();
    }
  }

  size_t size() const { return values_.size(); }

 private:
  struct Node {
    bool needs_grad = false;
    std::function<void()> backprop;  // empty for leaves
  };
  struct ParamLink {
    int32_t index;
    ParamSet<T>* params;
    std::string name;
  };

  size_t check(ValueId id) const {
    if (id.tape != id_ || id.index < 0 || id.index >= static_cast<int32_t>(values_.size()))
      fail(ErrorCode::DetachedLoss, "value does not belong to this tape");
    return static_cast<size_t>(id.index);
  }

  ValueId push(Tensor<T> value, bool needs_grad, std::function<void()> backprop) {
    if (finite_checks()) {
      for (const T& v : value.data)
        if (!std::isfinite(static_cast<double>(v)))
          fail(ErrorCode::NonFiniteInput, "non-finite value recorded on tape");
    }
    values_.push_back(std::move(value));
    Node n;
    n.needs_grad = needs_grad;
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return ValueId{id_, static_cast<int32_t>(values_.size() - 1)};
  }

  bool needs(ValueId id) const { return nodes_[check(id)].needs_grad; }

  Tensor<T>& grad_mut(int32_t index) { return grads_[static_cast<size_t>(index)]; }
  const Tensor<T>& val(int32_t index) const { return values_[static_cast<size_t>(index)]; }

  static std::atomic<int64_t> next_id_;
  int64_t id_;
  std::vector<Tensor<T>> values_;
  std::vector<Node> nodes_;
  std::vector<Tensor<T>> grads_;
  std::vector<ParamLink> param_links_;
};

template <typename T>
std::atomic<int64_t> Tape<T>::next_id_{1};

// --- shape helpers ----------------------------------------------------------

inline int64_t conv_out_len(int64_t len, int64_t kernel, int64_t stride, int64_t padding) {
  return (len + 2 * padding - kernel) / stride + 1;
}

// --- op implementations -----------------------------------------------------

template <typename T>
ValueId Tape<T>::conv1d(ValueId input, ValueId weight, ValueId bias, int stride, int padding) {
  const Tensor<T>& x = value(input);
  const Tensor<T>& w = value(weight);
  const Tensor<T>& bv = value(bias);
  if (x.rank() != 3 || w.rank() != 3 || bv.rank() != 1)
    fail(ErrorCode::ShapeMismatch, "conv1d expects input (N,C,L), weight (Co,Ci,K), bias (Co)");
  int64_t N = x.dim(0), Ci = x.dim(1), L = x.dim(2);
  int64_t Co = w.dim(0), K = w.dim(2);
  if (w.dim(1) != Ci)
    fail(ErrorCode::ShapeMismatch, "conv1d channel mismatch: input " + shape_str(x.shape) +
                                       " vs weight " + shape_str(w.shape));
  if (bv.dim(0) != Co) fail(ErrorCode::ShapeMismatch, "conv1d bias length != out channels");
  if (stride < 1 || padding < 0) fail(ErrorCode::ShapeMismatch, "conv1d bad stride/padding");
  if (K > L + 2 * padding) fail(ErrorCode::ShapeMismatch, "conv1d kernel longer than padded input");
  int64_t Lo = conv_out_len(L, K, stride, padding);

  Tensor<T> y({N, Co, Lo});
  const T* xd = x.data.data();
  const T* wd = w.data.data();
  const T* bd = bv.data.data();
  T* yd = y.data.data();
  // Cross-correlation, zero padding. Parallel over output rows (n, co).
  parallel_for(N * Co, [&](int64_t begin, int64_t end) {
    for (int64_t row = begin; row < end; ++row) {
      int64_t n = row / Co, co = row % Co;
      const T* xn = xd + n * Ci * L;
      const T* wc = wd + co * Ci * K;
      T* yr = yd + row * Lo;
      for (int64_t j = 0; j < Lo; ++j) {
        T acc = bd[co];
        int64_t start = j * stride - padding;
        int64_t k0 = start < 0 ? -start : 0;
        int64_t k1 = std::min<int64_t>(K, L - start);
        for (int64_t ci = 0; ci < Ci; ++ci) {
          const T* xrow = xn + ci * L + start;
          const T* wrow = wc + ci * K;
          for (int64_t k = k0; k < k1; ++k) acc += wrow[k] * xrow[k];
        }
        yr[j] = acc;
      }
    }
  });

  bool ng = needs(input) || needs(weight) || needs(bias);
  int32_t xi = input.index, wi = weight.index, bi = bias.index;
  auto bp = [this, xi, wi, bi, N, Ci, L, Co, K, Lo, stride, padding](int32_t out) {
    const Tensor<T>& go = grad_mut(out);
    const Tensor<T>& xv = val(xi);
    const Tensor<T>& wv = val(wi);
    if (nodes_[static_cast<size_t>(xi)].needs_grad) {
      Tensor<T>& gx = grad_mut(xi);
      parallel_for(N * Ci, [&](int64_t begin, int64_t end) {
        for (int64_t row = begin; row < end; ++row) {
          int64_t n = row / Ci, ci = row % Ci;
          T* gxr = gx.data.data() + row * L;
          for (int64_t l = 0; l < L; ++l) {
            T acc = T(0);
            // positions j with j*stride - padding + k == l
            for (int64_t k = 0; k < K; ++k) {
              int64_t num = l + padding - k;
              if (num < 0 || num % stride != 0) continue;
              int64_t j = num / stride;
              if (j < 0 || j >= Lo) continue;
              for (int64_t co = 0; co < Co; ++co)
                acc += go.at3(n, co, j) * wv.at3(co, ci, k);
            }
            gxr[l] += acc;
          }
        }
      });
    }
    if (nodes_[static_cast<size_t>(wi)].needs_grad) {
      Tensor<T>& gw = grad_mut(wi);
      parallel_for(Co * Ci, [&](int64_t begin, int64_t end) {
        for (int64_t row = begin; row < end; ++row) {
          int64_t co = row / Ci, ci = row % Ci;
          for (int64_t k = 0; k < K; ++k) {
            T acc = T(0);
            for (int64_t n = 0; n < N; ++n) {
              for (int64_t j = 0; j < Lo; ++j) {
                int64_t l = j * stride - padding + k;
                if (l < 0 || l >= L) continue;
                acc += go.at3(n, co, j) * xv.at3(n, ci, l);
              }
            }
            gw.at3(co, ci, k) += acc;
          }
        }
      });
    }
    if (nodes_[static_cast<size_t>(bi)].needs_grad) {
      Tensor<T>& gb = grad_mut(bi);
      for (int64_t co = 0; co < Co; ++co) {
        T acc = T(0);
        for (int64_t n = 0; n < N; ++n)
          for (int64_t j = 0; j < Lo; ++j) acc += go.at3(n, co, j);
        gb[co] += acc;
      }
    }
  };

  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [bp, oi] { bp(oi); };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::batchnorm1d(ValueId input, ValueId gamma, ValueId beta, Tensor<T>& running_mean,
                             Tensor<T>& running_var, double momentum, double eps, bool train) {
  const Tensor<T>& x = value(input);
  const Tensor<T>& g = value(gamma);
  const Tensor<T>& b = value(beta);
  if (x.rank() != 3) fail(ErrorCode::ShapeMismatch, "batchnorm1d expects (N,C,L)");
  int64_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
  if (g.rank() != 1 || g.dim(0) != C || b.rank() != 1 || b.dim(0) != C ||
      running_mean.dim(0) != C || running_var.dim(0) != C)
    fail(ErrorCode::ShapeMismatch, "batchnorm1d parameter shapes must be (C)");
  if (train && N * L <= 1)
    fail(ErrorCode::ShapeMismatch, "batchnorm1d train mode needs N*L > 1");

  int64_t count = N * L;
  std::vector<double> mean(static_cast<size_t>(C)), inv_std(static_cast<size_t>(C));
  if (train) {
    parallel_for(C, [&](int64_t begin, int64_t end) {
      for (int64_t c = begin; c < end; ++c) {
        double s = 0.0;
        for (int64_t n = 0; n < N; ++n)
          for (int64_t l = 0; l < L; ++l) s += static_cast<double>(x.at3(n, c, l));
        double mu = s / static_cast<double>(count);
        double sq = 0.0;
        for (int64_t n = 0; n < N; ++n)
          for (int64_t l = 0; l < L; ++l) {
            double d = static_cast<double>(x.at3(n, c, l)) - mu;
            sq += d * d;
          }
        double var = sq / static_cast<double>(count);  // biased, for normalization
        mean[static_cast<size_t>(c)] = mu;
        inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(var + eps);
        double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
        running_mean[c] = static_cast<T>((1.0 - momentum) * static_cast<double>(running_mean[c]) +
                                         momentum * mu);
        running_var[c] = static_cast<T>((1.0 - momentum) * static_cast<double>(running_var[c]) +
                                        momentum * unbiased);
      }
    });
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mean[static_cast<size_t>(c)] = static_cast<double>(running_mean[c]);
      inv_std[static_cast<size_t>(c)] =
          1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
    }
  }

  Tensor<T> y({N, C, L});
  Tensor<T> xhat({N, C, L});  // saved for backward
  parallel_for(N * C, [&](int64_t begin, int64_t end) {
    for (int64_t row = begin; row < end; ++row) {
      int64_t n = row / C, c = row % C;
      double mu = mean[static_cast<size_t>(c)];
      double is = inv_std[static_cast<size_t>(c)];
      double gc = static_cast<double>(g[c]), bc = static_cast<double>(b[c]);
      for (int64_t l = 0; l < L; ++l) {
        double h = (static_cast<double>(x.at3(n, c, l)) - mu) * is;
        xhat.at3(n, c, l) = static_cast<T>(h);
        y.at3(n, c, l) = static_cast<T>(gc * h + bc);
      }
    }
  });

  bool ng = needs(input) || needs(gamma) || needs(beta);
  ValueId out = push(std::move(y), ng, {});
  if (!ng) return out;

  int32_t xi = input.index, gi = gamma.index, bi = beta.index, oi = out.index;
  auto saved_xhat = std::make_shared<Tensor<T>>(std::move(xhat));
  auto saved_inv_std = std::make_shared<std::vector<double>>(std::move(inv_std));
  nodes_[static_cast<size_t>(oi)].backprop = [this, xi, gi, bi, oi, N, C, L, train, saved_xhat,
                                              saved_inv_std] {
    const Tensor<T>& go = grad_mut(oi);
    const Tensor<T>& gv = val(gi);
    const Tensor<T>& xh = *saved_xhat;
    int64_t count = N * L;
    if (nodes_[static_cast<size_t>(gi)].needs_grad || nodes_[static_cast<size_t>(bi)].needs_grad) {
      Tensor<T>& gg = grad_mut(gi);
      Tensor<T>& gb = grad_mut(bi);
      for (int64_t c = 0; c < C; ++c) {
        double sg = 0.0, sb = 0.0;
        for (int64_t n = 0; n < N; ++n)
          for (int64_t l = 0; l < L; ++l) {
            double d = static_cast<double>(go.at3(n, c, l));
            sg += d * static_cast<double>(xh.at3(n, c, l));
            sb += d;
          }
        gg[c] += static_cast<T>(sg);
        gb[c] += static_cast<T>(sb);
      }
    }
    if (nodes_[static_cast<size_t>(xi)].needs_grad) {
      Tensor<T>& gx = grad_mut(xi);
      parallel_for(C, [&](int64_t begin, int64_t end) {
        for (int64_t c = begin; c < end; ++c) {
          double is = (*saved_inv_std)[static_cast<size_t>(c)];
          double gc = static_cast<double>(gv[c]);
          if (train) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int64_t n = 0; n < N; ++n)
              for (int64_t l = 0; l < L; ++l) {
                double d = static_cast<double>(go.at3(n, c, l));
                sum_dy += d;
                sum_dy_xhat += d * static_cast<double>(xh.at3(n, c, l));
              }
            double m_dy = sum_dy / static_cast<double>(count);
            double m_dyx = sum_dy_xhat / static_cast<double>(count);
            for (int64_t n = 0; n < N; ++n)
              for (int64_t l = 0; l < L; ++l) {
                double d = static_cast<double>(go.at3(n, c, l));
                double h = static_cast<double>(xh.at3(n, c, l));
                gx.at3(n, c, l) += static_cast<T>(gc * is * (d - m_dy - h * m_dyx));
              }
          } else {
            for (int64_t n = 0; n < N; ++n)
              for (int64_t l = 0; l < L; ++l)
                gx.at3(n, c, l) += static_cast<T>(static_cast<double>(go.at3(n, c, l)) * gc * is);
          }
        }
      });
    }
  };
  return out;
}

template <typename T>
ValueId Tape<T>::relu(ValueId x) {
  const Tensor<T>& xv = value(x);
  Tensor<T> y(xv.shape);
  for (size_t i = 0; i < xv.data.size(); ++i) y.data[i] = xv.data[i] > T(0) ? xv.data[i] : T(0);
  bool ng = needs(x);
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t xi = x.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, xi, oi] {
      const Tensor<T>& go = grad_mut(oi);
      const Tensor<T>& xv2 = val(xi);
      Tensor<T>& gx = grad_mut(xi);
      for (size_t i = 0; i < gx.data.size(); ++i)
        if (xv2.data[i] > T(0)) gx.data[i] += go.data[i];
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::add(ValueId a, ValueId b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (!av.same_shape(bv))
    fail(ErrorCode::ShapeMismatch,
         "add shape mismatch: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor<T> y(av.shape);
  for (size_t i = 0; i < av.data.size(); ++i) y.data[i] = av.data[i] + bv.data[i];
  bool ng = needs(a) || needs(b);
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t ai = a.index, bi = b.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, ai, bi, oi] {
      const Tensor<T>& go = grad_mut(oi);
      if (nodes_[static_cast<size_t>(ai)].needs_grad) {
        Tensor<T>& ga = grad_mut(ai);
        for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += go.data[i];
      }
      if (nodes_[static_cast<size_t>(bi)].needs_grad) {
        Tensor<T>& gb = grad_mut(bi);
        for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += go.data[i];
      }
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::mul(ValueId a, ValueId b) {
  const Tensor<T>& av = value(a);
  const Tensor<T>& bv = value(b);
  if (!av.same_shape(bv))
    fail(ErrorCode::ShapeMismatch,
         "mul shape mismatch: " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
  Tensor<T> y(av.shape);
  for (size_t i = 0; i < av.data.size(); ++i) y.data[i] = av.data[i] * bv.data[i];
  bool ng = needs(a) || needs(b);
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t ai = a.index, bi = b.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, ai, bi, oi] {
      const Tensor<T>& go = grad_mut(oi);
      const Tensor<T>& av2 = val(ai);
      const Tensor<T>& bv2 = val(bi);
      if (nodes_[static_cast<size_t>(ai)].needs_grad) {
        Tensor<T>& ga = grad_mut(ai);
        for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += go.data[i] * bv2.data[i];
      }
      if (nodes_[static_cast<size_t>(bi)].needs_grad) {
        Tensor<T>& gb = grad_mut(bi);
        for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += go.data[i] * av2.data[i];
      }
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::maxpool1d(ValueId x, int kernel, int stride, int padding) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 3) fail(ErrorCode::ShapeMismatch, "maxpool1d expects (N,C,L)");
  if (kernel < 1 || stride < 1 || padding < 0 || padding >= kernel)
    fail(ErrorCode::ShapeMismatch, "maxpool1d bad kernel/stride/padding");
  int64_t N = xv.dim(0), C = xv.dim(1), L = xv.dim(2);
  int64_t Lo = conv_out_len(L, kernel, stride, padding);
  if (Lo < 1) fail(ErrorCode::ShapeMismatch, "maxpool1d output would be empty");

  Tensor<T> y({N, C, Lo});
  auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(N * C * Lo));
  parallel_for(N * C, [&](int64_t begin, int64_t end) {
    for (int64_t row = begin; row < end; ++row) {
      const T* xr = xv.data.data() + row * L;
      T* yr = y.data.data() + row * Lo;
      int64_t* am = argmax->data() + row * Lo;
      for (int64_t j = 0; j < Lo; ++j) {
        int64_t start = j * stride - padding;
        int64_t k0 = start < 0 ? -start : 0;
        int64_t k1 = std::min<int64_t>(kernel, L - start);
        // Padded positions are -inf: the window always holds a real sample
        // because Lo was computed from the padded length.
        int64_t best = start + k0;
        T bestv = xr[best];
        for (int64_t k = k0 + 1; k < k1; ++k) {
          if (xr[start + k] > bestv) {
            bestv = xr[start + k];
            best = start + k;
          }
        }
        yr[j] = bestv;
        am[j] = best;
      }
    }
  });

  bool ng = needs(x);
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t xi = x.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, xi, oi, argmax, N, C, L, Lo] {
      const Tensor<T>& go = grad_mut(oi);
      Tensor<T>& gx = grad_mut(xi);
      parallel_for(N * C, [&](int64_t begin, int64_t end) {
        for (int64_t row = begin; row < end; ++row) {
          const T* gr = go.data.data() + row * Lo;
          T* gxr = gx.data.data() + row * L;
          const int64_t* am = argmax->data() + row * Lo;
          for (int64_t j = 0; j < Lo; ++j) gxr[am[j]] += gr[j];
        }
      });
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::global_avg_pool(ValueId x) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 3) fail(ErrorCode::ShapeMismatch, "global_avg_pool expects (N,C,L)");
  int64_t N = xv.dim(0), C = xv.dim(1), L = xv.dim(2);
  Tensor<T> y({N, C});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (int64_t l = 0; l < L; ++l) s += static_cast<double>(xv.at3(n, c, l));
      y.at2(n, c) = static_cast<T>(s / static_cast<double>(L));
    }
  bool ng = needs(x);
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t xi = x.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, xi, oi, N, C, L] {
      const Tensor<T>& go = grad_mut(oi);
      Tensor<T>& gx = grad_mut(xi);
      T inv = T(1) / static_cast<T>(L);
      for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c) {
          T g = go.at2(n, c) * inv;
          for (int64_t l = 0; l < L; ++l) gx.at3(n, c, l) += g;
        }
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::dense(ValueId x, ValueId weight, ValueId bias) {
  const Tensor<T>& xv = value(x);
  const Tensor<T>& wv = value(weight);
  const Tensor<T>& bv = value(bias);
  if (xv.rank() != 2 || wv.rank() != 2 || bv.rank() != 1)
    fail(ErrorCode::ShapeMismatch, "dense expects x (N,D), weight (C,D), bias (C)");
  int64_t N = xv.dim(0), D = xv.dim(1), C = wv.dim(0);
  if (wv.dim(1) != D || bv.dim(0) != C)
    fail(ErrorCode::ShapeMismatch, "dense shape mismatch: x " + shape_str(xv.shape) +
                                       ", weight " + shape_str(wv.shape));
  Tensor<T> y({N, C});
  parallel_for(N * C, [&](int64_t begin, int64_t end) {
    for (int64_t row = begin; row < end; ++row) {
      int64_t n = row / C, c = row % C;
      const T* xr = xv.data.data() + n * D;
      const T* wr = wv.data.data() + c * D;
      T acc = bv[c];
      for (int64_t d = 0; d < D; ++d) acc += xr[d] * wr[d];
      y.at2(n, c) = acc;
    }
  });
  bool ng = needs(x) || needs(weight) || needs(bias);
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t xi = x.index, wi = weight.index, bi = bias.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, xi, wi, bi, oi, N, D, C] {
      const Tensor<T>& go = grad_mut(oi);
      const Tensor<T>& xv2 = val(xi);
      const Tensor<T>& wv2 = val(wi);
      if (nodes_[static_cast<size_t>(xi)].needs_grad) {
        Tensor<T>& gx = grad_mut(xi);
        for (int64_t n = 0; n < N; ++n)
          for (int64_t d = 0; d < D; ++d) {
            T acc = T(0);
            for (int64_t c = 0; c < C; ++c) acc += go.at2(n, c) * wv2.at2(c, d);
            gx.at2(n, d) += acc;
          }
      }
      if (nodes_[static_cast<size_t>(wi)].needs_grad) {
        Tensor<T>& gw = grad_mut(wi);
        for (int64_t c = 0; c < C; ++c)
          for (int64_t d = 0; d < D; ++d) {
            T acc = T(0);
            for (int64_t n = 0; n < N; ++n) acc += go.at2(n, c) * xv2.at2(n, d);
            gw.at2(c, d) += acc;
          }
      }
      if (nodes_[static_cast<size_t>(bi)].needs_grad) {
        Tensor<T>& gb = grad_mut(bi);
        for (int64_t c = 0; c < C; ++c) {
          T acc = T(0);
          for (int64_t n = 0; n < N; ++n) acc += go.at2(n, c);
          gb[c] += acc;
        }
      }
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::concat(const std::vector<ValueId>& xs) {
  if (xs.empty()) fail(ErrorCode::ShapeMismatch, "concat of nothing");
  int64_t N = value(xs[0]).dim(0);
  int64_t total = 0;
  bool ng = false;
  for (ValueId id : xs) {
    const Tensor<T>& v = value(id);
    if (v.rank() != 2 || v.dim(0) != N)
      fail(ErrorCode::ShapeMismatch, "concat expects (N,Ci) tensors with equal N");
    total += v.dim(1);
    ng = ng || needs(id);
  }
  Tensor<T> y({N, total});
  int64_t off = 0;
  for (ValueId id : xs) {
    const Tensor<T>& v = value(id);
    int64_t c = v.dim(1);
    for (int64_t n = 0; n < N; ++n)
      std::copy(v.data.begin() + n * c, v.data.begin() + (n + 1) * c,
                y.data.begin() + n * total + off);
    off += c;
  }
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    std::vector<int32_t> idxs;
    for (ValueId id : xs) idxs.push_back(id.index);
    int32_t oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, idxs, oi, N, total] {
      const Tensor<T>& go = grad_mut(oi);
      int64_t off2 = 0;
      for (int32_t xi : idxs) {
        int64_t c = val(xi).dim(1);
        if (nodes_[static_cast<size_t>(xi)].needs_grad) {
          Tensor<T>& gx = grad_mut(xi);
          for (int64_t n = 0; n < N; ++n)
            for (int64_t j = 0; j < c; ++j) gx.at2(n, j) += go.data[static_cast<size_t>(n * total + off2 + j)];
        }
        off2 += c;
      }
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::slice_cols(ValueId x, int64_t begin_col, int64_t end_col) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 2) fail(ErrorCode::ShapeMismatch, "slice_cols expects (N,C)");
  int64_t N = xv.dim(0), C = xv.dim(1);
  if (begin_col < 0 || end_col > C || begin_col >= end_col)
    fail(ErrorCode::ShapeMismatch, "slice_cols range out of bounds");
  int64_t W = end_col - begin_col;
  Tensor<T> y({N, W});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t j = 0; j < W; ++j) y.at2(n, j) = xv.at2(n, begin_col + j);
  bool ng = needs(x);
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t xi = x.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, xi, oi, N, W, begin_col] {
      const Tensor<T>& go = grad_mut(oi);
      Tensor<T>& gx = grad_mut(xi);
      for (int64_t n = 0; n < N; ++n)
        for (int64_t j = 0; j < W; ++j) gx.at2(n, begin_col + j) += go.at2(n, j);
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::spatial_dropout(ValueId x, double rate, bool train, Philox& rng) {
  const Tensor<T>& xv = value(x);
  if (xv.rank() != 3) fail(ErrorCode::ShapeMismatch, "spatial_dropout expects (N,C,L)");
  if (rate < 0.0 || rate >= 1.0) fail(ErrorCode::InvalidRate, "dropout rate must be in [0,1)");
  int64_t N = xv.dim(0), C = xv.dim(1), L = xv.dim(2);

  if (!train || rate == 0.0) {
    // Identity; reuses the forward value, gradient passes through.
    Tensor<T> y = xv;
    bool ng = needs(x);
    ValueId out = push(std::move(y), ng, {});
    if (ng) {
      int32_t xi = x.index, oi = out.index;
      nodes_[static_cast<size_t>(oi)].backprop = [this, xi, oi] {
        const Tensor<T>& go = grad_mut(oi);
        Tensor<T>& gx = grad_mut(xi);
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += go.data[i];
      };
    }
    return out;
  }

  // Inverted dropout over whole channels: drawn per (n, c), survivors scaled
  // by 1/(1-rate) so eval needs no compensation.
  T scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(static_cast<size_t>(N * C));
  for (int64_t i = 0; i < N * C; ++i)
    (*mask)[static_cast<size_t>(i)] = rng.next_double() < rate ? T(0) : scale;

  Tensor<T> y({N, C, L});
  for (int64_t row = 0; row < N * C; ++row) {
    T m = (*mask)[static_cast<size_t>(row)];
    const T* xr = xv.data.data() + row * L;
    T* yr = y.data.data() + row * L;
    for (int64_t l = 0; l < L; ++l) yr[l] = xr[l] * m;
  }
  bool ng = needs(x);
  ValueId out = push(std::move(y), ng, {});
  if (ng) {
    int32_t xi = x.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, xi, oi, mask, N, C, L] {
      const Tensor<T>& go = grad_mut(oi);
      Tensor<T>& gx = grad_mut(xi);
      for (int64_t row = 0; row < N * C; ++row) {
        T m = (*mask)[static_cast<size_t>(row)];
        const T* gr = go.data.data() + row * L;
        T* gxr = gx.data.data() + row * L;
        for (int64_t l = 0; l < L; ++l) gxr[l] += gr[l] * m;
      }
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::softmax_ce(ValueId logits, ValueId targets) {
  const Tensor<T>& z = value(logits);
  const Tensor<T>& t = value(targets);
  if (z.rank() != 2 || !z.same_shape(t))
    fail(ErrorCode::ShapeMismatch, "softmax_ce expects matching (N,C)");
  int64_t N = z.dim(0), C = z.dim(1);

  auto probs = std::make_shared<Tensor<T>>(std::vector<int64_t>{N, C});
  auto norm_targets = std::make_shared<Tensor<T>>(std::vector<int64_t>{N, C});
  double loss = 0.0;
  for (int64_t n = 0; n < N; ++n) {
    double tsum = 0.0;
    for (int64_t c = 0; c < C; ++c) tsum += static_cast<double>(t.at2(n, c));
    if (tsum <= 0.0)
      fail(ErrorCode::EmptyTarget, "softmax_ce target row " + std::to_string(n) + " is empty");
    double zmax = static_cast<double>(z.at2(n, 0));
    for (int64_t c = 1; c < C; ++c) zmax = std::max(zmax, static_cast<double>(z.at2(n, c)));
    double se = 0.0;
    for (int64_t c = 0; c < C; ++c) se += std::exp(static_cast<double>(z.at2(n, c)) - zmax);
    double lse = std::log(se) + zmax;
    for (int64_t c = 0; c < C; ++c) {
      double th = static_cast<double>(t.at2(n, c)) / tsum;
      double logp = static_cast<double>(z.at2(n, c)) - lse;
      probs->at2(n, c) = static_cast<T>(std::exp(logp));
      norm_targets->at2(n, c) = static_cast<T>(th);
      loss -= th * logp;
    }
  }
  loss /= static_cast<double>(N);

  bool ng = needs(logits);
  ValueId out = push(Tensor<T>::scalar(static_cast<T>(loss)), ng, {});
  if (ng) {
    int32_t zi = logits.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, zi, oi, probs, norm_targets, N, C] {
      T g = grad_mut(oi).data[0];
      Tensor<T>& gz = grad_mut(zi);
      T invn = T(1) / static_cast<T>(N);
      for (int64_t n = 0; n < N; ++n)
        for (int64_t c = 0; c < C; ++c)
          gz.at2(n, c) += g * invn * (probs->at2(n, c) - norm_targets->at2(n, c));
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::sigmoid_bce(ValueId logits, ValueId targets) {
  const Tensor<T>& z = value(logits);
  const Tensor<T>& t = value(targets);
  if (z.rank() != 2 || !z.same_shape(t))
    fail(ErrorCode::ShapeMismatch, "sigmoid_bce expects matching (N,C)");
  int64_t N = z.dim(0), C = z.dim(1);

  double loss = 0.0;
  for (int64_t i = 0; i < N * C; ++i) {
    double zv = static_cast<double>(z.data[static_cast<size_t>(i)]);
    double tv = static_cast<double>(t.data[static_cast<size_t>(i)]);
    // max(z,0) - z t + log(1 + exp(-|z|)), stable in logit space
    loss += std::max(zv, 0.0) - zv * tv + std::log1p(std::exp(-std::abs(zv)));
  }
  loss /= static_cast<double>(N * C);

  bool ng = needs(logits);
  ValueId out = push(Tensor<T>::scalar(static_cast<T>(loss)), ng, {});
  if (ng) {
    int32_t zi = logits.index, ti = targets.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, zi, ti, oi, N, C] {
      T g = grad_mut(oi).data[0];
      const Tensor<T>& zv = val(zi);
      const Tensor<T>& tv = val(ti);
      Tensor<T>& gz = grad_mut(zi);
      double invn = 1.0 / static_cast<double>(N * C);
      for (int64_t i = 0; i < N * C; ++i) {
        double s = 1.0 / (1.0 + std::exp(-static_cast<double>(zv.data[static_cast<size_t>(i)])));
        gz.data[static_cast<size_t>(i)] +=
            g * static_cast<T>((s - static_cast<double>(tv.data[static_cast<size_t>(i)])) * invn);
      }
    };
  }
  return out;
}

template <typename T>
ValueId Tape<T>::sum(ValueId x) {
  const Tensor<T>& xv = value(x);
  double s = 0.0;
  for (const T& v : xv.data) s += static_cast<double>(v);
  bool ng = needs(x);
  ValueId out = push(Tensor<T>::scalar(static_cast<T>(s)), ng, {});
  if (ng) {
    int32_t xi = x.index, oi = out.index;
    nodes_[static_cast<size_t>(oi)].backprop = [this, xi, oi] {
      T g = grad_mut(oi).data[0];
      Tensor<T>& gx = grad_mut(xi);
      for (auto& v : gx.data) v += g;
    };
  }
  return out;
}

}  // namespace ecgdg::nn
