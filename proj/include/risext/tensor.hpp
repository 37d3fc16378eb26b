// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace risext {

using Shape = std::vector<std::size_t>;

/// Allocator whose value-less construct() leaves doubles uninitialised, so
/// buffers that are about to be overwritten skip the zero fill.
template <class T>
struct DefaultInitAllocator : std::allocator<T> {
  template <class U>
  struct rebind {
    using other = DefaultInitAllocator<U>;
  };
  using std::allocator<T>::allocator;
  template <class U>
  void construct(U* p) noexcept(std::is_nothrow_default_constructible_v<U>) {
    ::new (static_cast<void*>(p)) U;
  }
  template <class U, class... Args>
  void construct(U* p, Args&&... args) {
    ::new (static_cast<void*>(p)) U(std::forward<Args>(args)...);
  }
};

using Storage = std::vector<double, DefaultInitAllocator<double>>;

inline std::size_t shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

/// Dense row-major array of doubles. Layer activations are stored as
/// [batch, height, width, channels].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  Tensor(Shape shape, const std::vector<double>& data)
      : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_length();
  }
  Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_length();
  }

  /// Tensor whose contents are unspecified until written.
  static Tensor uninit(Shape shape) {
    Tensor t;
    const std::size_t n = shape_size(shape);
    t.shape_ = std::move(shape);
    t.data_.resize(n);
    return t;
  }

 private:
  void check_length() const {
    if (data_.size() != shape_size(shape_))
      throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_str(shape_));
  }

 public:

  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  Storage& storage() { return data_; }
  const Storage& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
  double at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  /// Same data, new shape of identical element count.
  Tensor reshaped(Shape s) const { return Tensor(std::move(s), data_); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size()) throw std::out_of_range("Tensor::at: rank mismatch");
    std::size_t off = 0;
    std::size_t d = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[d]) throw std::out_of_range("Tensor::at: index out of range");
      off = off * shape_[d++] + i;
    }
    return off;
  }

  Shape shape_;
  Storage data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

/// Trainable tensor with its gradient and Adam moment estimates.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;
  Tensor v;
  long step = 0;

  Parameter() = default;
  Parameter(std::string n, Tensor init)
      : name(std::move(n)),
        value(std::move(init)),
        grad(value.shape()),
        m(value.shape()),
        v(value.shape()) {}

  void zero_grad() { grad.fill(0.0); }
  std::size_t size() const { return value.size(); }
};

// Elementwise arithmetic. Gradients of these are trivial and routed inline by
// the callers (blocks and the loss), so no tape is needed.

inline Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::uninit(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::uninit(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

/// a += s * b
inline void axpy(Tensor& a, double s, const Tensor& b) {
  require_same_shape(a, b, "axpy");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += s * pb[i];
}

/// Linear combination sum_i coeffs[i] * terms[i].
inline Tensor combine(std::initializer_list<std::pair<double, const Tensor*>> terms) {
  if (terms.size() == 0) throw std::invalid_argument("combine: no terms");
  Tensor out = scale(*terms.begin()->second, terms.begin()->first);
  for (auto it = terms.begin() + 1; it != terms.end(); ++it) axpy(out, it->first, *it->second);
  return out;
}

inline double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace debug {
/// When set, relu_forward appends the activation pattern (x > 0) of every
/// input it sees on this thread. Used by the gradient checker.
inline thread_local std::vector<std::uint8_t>* relu_pattern_log = nullptr;
}  // namespace debug

inline Tensor relu_forward(const Tensor& x) {
  Tensor out = Tensor::uninit(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  if (auto* log = debug::relu_pattern_log)
    for (std::size_t i = 0; i < x.size(); ++i) log->push_back(x[i] > 0.0);
  return out;
}

/// Masks `upstream` in place where the activation was not positive. `act` may
/// be either the ReLU input or its output; the sign test agrees for both.
/// Subgradient at exactly zero is taken as 0.
inline Tensor relu_backward(Tensor upstream, const Tensor& act) {
  require_same_shape(upstream, act, "relu_backward");
  for (std::size_t i = 0; i < act.size(); ++i)
    if (!(act[i] > 0.0)) upstream[i] = 0.0;
  return upstream;
}

struct LossResult {
  double loss = 0.0;
  Tensor grad;
};

/// Mean squared error normalised by M_b * M * L * K, i.e. by every entry except
/// the trailing real/imag axis. outputs/targets are [M_b, M*L, K, 2].
inline LossResult mse_loss(const Tensor& outputs, const Tensor& targets, std::size_t M,
                           std::size_t L, std::size_t K, std::size_t batch) {
  require_same_shape(outputs, targets, "mse_loss");
  if (outputs.size() != batch * M * L * K * 2)
    throw std::invalid_argument("mse_loss: tensor size " + std::to_string(outputs.size()) +
                                " does not equal M_b*M*L*K*2");
  const double norm = 1.0 / static_cast<double>(batch * M * L * K);
  LossResult r;
  r.grad = Tensor(outputs.shape());
  double sum = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double diff = targets[i] - outputs[i];
    sum += diff * diff;
    r.grad[i] = -2.0 * diff * norm;
  }
  r.loss = sum * norm;
  return r;
}

/// Convenience overload for [B, H, W, 2] tensors where H = M*L, W = K.
inline LossResult mse_loss(const Tensor& outputs, const Tensor& targets) {
  if (outputs.rank() != 4) throw std::invalid_argument("mse_loss: expected rank-4 tensors");
  return mse_loss(outputs, targets, 1, outputs.dim(1), outputs.dim(2), outputs.dim(0));
}

}  // namespace risext
