// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "risext/conv.hpp"
#include "risext/tensor.hpp"

namespace risext {

/// Tensors a sub-operation keeps from its forward pass for its backward pass.
struct Trace {
  std::vector<Tensor> saved;
};

/// A channel-preserving map y = G(x) used as the building step of a block.
/// forward() is const and records everything it needs in `trace`, so one
/// instance may be evaluated several times per block (shared weights).
class SubOperator {
 public:
  virtual ~SubOperator() = default;
  virtual Tensor forward(const Tensor& x, Trace& trace) const = 0;
  /// Accumulates parameter gradients and returns dL/dx.
  virtual Tensor backward(const Tensor& upstream, const Trace& trace) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::size_t conv_count() const { return 0; }
  virtual void init(std::mt19937_64& /*rng*/) {}
};

/// ReLU followed by a 3x3 convolution; one stage of the plain cascaded CNN.
class ReluConvOp final : public SubOperator {
 public:
  ReluConvOp(const std::string& name, std::size_t channels, std::size_t kernel = 3)
      : conv_(name + ".conv", kernel, kernel, channels, channels) {}

  Tensor forward(const Tensor& x, Trace& trace) const override {
    Tensor r = relu_forward(x);
    Tensor out = conv_.forward(r);
    trace.saved = {std::move(r)};
    return out;
  }
  Tensor backward(const Tensor& upstream, const Trace& trace) override {
    const Tensor& r = trace.saved.at(0);
    return relu_backward(conv_.backward(upstream, r), r);
  }
  std::vector<Parameter*> parameters() override { return {&conv_.kernels(), &conv_.bias()}; }
  std::size_t conv_count() const override { return 1; }
  void init(std::mt19937_64& rng) override { conv_.init_uniform(rng); }
  ConvLayer& conv() { return conv_; }

 private:
  ConvLayer conv_;
};

/// ReLU, one convolution, then a learnable scalar multiplier (initialised to 1).
/// The step-size factor of the leapfrog and Euler updates lives in the multiplier.
class GOp final : public SubOperator {
 public:
  GOp(const std::string& name, std::size_t channels, std::size_t kernel = 3)
      : conv_(name + ".conv", kernel, kernel, channels, channels),
        multiplier_(name + ".mult", Tensor({1}, 1.0)) {}

  Tensor forward(const Tensor& x, Trace& trace) const override {
    Tensor r = relu_forward(x);
    Tensor c = conv_.forward(r);
    Tensor out = scale(c, multiplier_.value[0]);
    trace.saved = {std::move(r), std::move(c)};
    return out;
  }
  Tensor backward(const Tensor& upstream, const Trace& trace) override {
    const Tensor& r = trace.saved.at(0);
    multiplier_.grad[0] += dot(upstream, trace.saved.at(1));
    Tensor dc = scale(upstream, multiplier_.value[0]);
    return relu_backward(conv_.backward(dc, r), r);
  }
  std::vector<Parameter*> parameters() override {
    return {&conv_.kernels(), &conv_.bias(), &multiplier_};
  }
  std::size_t conv_count() const override { return 1; }
  void init(std::mt19937_64& rng) override {
    conv_.init_uniform(rng);
    multiplier_.value[0] = 1.0;
  }
  ConvLayer& conv() { return conv_; }
  Parameter& multiplier() { return multiplier_; }

 private:
  ConvLayer conv_;
  Parameter multiplier_;
};

/// Two (ReLU -> 3x3 conv) stages in sequence; the Runge-Kutta stage map.
class GPrimeOp final : public SubOperator {
 public:
  GPrimeOp(const std::string& name, std::size_t channels, std::size_t kernel = 3)
      : first_(name + ".conv0", kernel, kernel, channels, channels),
        second_(name + ".conv1", kernel, kernel, channels, channels) {}

  Tensor forward(const Tensor& x, Trace& trace) const override {
    Tensor r1 = relu_forward(x);
    Tensor r2 = relu_forward(first_.forward(r1));
    Tensor out = second_.forward(r2);
    trace.saved = {std::move(r1), std::move(r2)};
    return out;
  }
  Tensor backward(const Tensor& upstream, const Trace& trace) override {
    const Tensor& r1 = trace.saved.at(0);
    const Tensor& r2 = trace.saved.at(1);
    Tensor d = relu_backward(second_.backward(upstream, r2), r2);
    return relu_backward(first_.backward(d, r1), r1);
  }
  std::vector<Parameter*> parameters() override {
    return {&first_.kernels(), &first_.bias(), &second_.kernels(), &second_.bias()};
  }
  std::size_t conv_count() const override { return 2; }
  void init(std::mt19937_64& rng) override {
    first_.init_uniform(rng);
    second_.init_uniform(rng);
  }

 private:
  ConvLayer first_;
  ConvLayer second_;
};

/// Parameter-free stand-in built from plain functions. Used to drive blocks
/// with known vector fields (y -> c, y -> A y) in integrator tests.
class FunctionOp final : public SubOperator {
 public:
  using Fn = std::function<Tensor(const Tensor&)>;
  FunctionOp(Fn forward, Fn backward) : fwd_(std::move(forward)), bwd_(std::move(backward)) {}

  Tensor forward(const Tensor& x, Trace& /*trace*/) const override { return fwd_(x); }
  Tensor backward(const Tensor& upstream, const Trace& /*trace*/) override { return bwd_(upstream); }

  static std::unique_ptr<SubOperator> linear(double lambda) {
    return std::make_unique<FunctionOp>([lambda](const Tensor& x) { return scale(x, lambda); },
                                        [lambda](const Tensor& u) { return scale(u, lambda); });
  }
  static std::unique_ptr<SubOperator> constant(double c) {
    return std::make_unique<FunctionOp>([c](const Tensor& x) { return Tensor(x.shape(), c); },
                                        [](const Tensor& u) { return Tensor(u.shape()); });
  }

 private:
  Fn fwd_;
  Fn bwd_;
};

enum class BlockKind { cascaded, euler, lf, rk3 };

inline std::string_view to_string(BlockKind k) {
  switch (k) {
    case BlockKind::cascaded: return "cascaded";
    case BlockKind::euler: return "euler";
    case BlockKind::lf: return "lf";
    case BlockKind::rk3: return "rk3";
  }
  return "?";
}

inline BlockKind parse_block_kind(std::string_view s) {
  if (s == "cascaded" || s == "cnn") return BlockKind::cascaded;
  if (s == "euler") return BlockKind::euler;
  if (s == "lf") return BlockKind::lf;
  if (s == "rk3") return BlockKind::rk3;
  throw std::invalid_argument("unknown architecture '" + std::string(s) +
                              "' (expected cascaded, euler, lf or rk3)");
}

/// Number of sub-operation evaluations one forward pass of a block performs.
inline std::size_t stage_count(BlockKind k) { return k == BlockKind::rk3 ? 3 : 6; }

/// Per-call traces of one block forward pass, in evaluation order.
struct BlockTrace {
  std::vector<Trace> calls;
};

/// A six-convolution block whose sub-operations are wired as
///   cascaded: D <- G_n(D)                          (no skips)
///   euler:    D_{n+1} = D_n + G_n(D_n)             (ResNet-style)
///   lf:       D_n = D_{n-2} + G_n(D_{n-1}),  D_1 = D_2 = input
///   rk3:      D1 = D0 + G1/2,  D2 = D0 - G1 + 2 G2,  D3 = D0 + (G1 + 4 G2 + G3)/6
/// where G1 = G'(D0), G2 = G'(D1), G3 = G'(D2).
class Block {
 public:
  Block(BlockKind kind, std::vector<std::unique_ptr<SubOperator>> ops)
      : kind_(kind), ops_(std::move(ops)) {
    if (ops_.empty()) throw std::invalid_argument("Block: no sub-operations");
    if (ops_.size() != 1 && ops_.size() != stage_count(kind))
      throw std::invalid_argument("Block: " + std::string(to_string(kind)) + " needs 1 or " +
                                  std::to_string(stage_count(kind)) + " sub-operations, got " +
                                  std::to_string(ops_.size()));
  }

  /// Standard block of the given kind; `share_stages` reuses one sub-operation
  /// for every stage (only meaningful for comparison runs).
  static Block make(BlockKind kind, std::size_t channels, const std::string& name,
                    bool share_stages = false) {
    const std::size_t n = share_stages ? 1 : stage_count(kind);
    std::vector<std::unique_ptr<SubOperator>> ops;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string sub = name + ".g" + std::to_string(i);
      switch (kind) {
        case BlockKind::cascaded: ops.push_back(std::make_unique<ReluConvOp>(sub, channels)); break;
        case BlockKind::euler:
        case BlockKind::lf: ops.push_back(std::make_unique<GOp>(sub, channels)); break;
        case BlockKind::rk3: ops.push_back(std::make_unique<GPrimeOp>(sub, channels)); break;
      }
    }
    return Block(kind, std::move(ops));
  }

  BlockKind kind() const { return kind_; }

  Tensor forward(const Tensor& x, BlockTrace& trace) const {
    trace.calls.assign(stage_count(kind_), Trace{});
    switch (kind_) {
      case BlockKind::cascaded: {
        Tensor d = x;
        for (std::size_t n = 0; n < 6; ++n) d = op(n).forward(d, trace.calls[n]);
        return d;
      }
      case BlockKind::euler: {
        Tensor d = x;
        for (std::size_t n = 0; n < 6; ++n) {
          Tensor g = op(n).forward(d, trace.calls[n]);
          axpy(d, 1.0, g);
        }
        return d;
      }
      case BlockKind::lf: {
        Tensor prev = x;  // D_{n-2}
        Tensor cur = x;   // D_{n-1}
        for (std::size_t n = 0; n < 6; ++n) {
          Tensor next = op(n).forward(cur, trace.calls[n]);
          axpy(next, 1.0, prev);
          prev = std::move(cur);
          cur = std::move(next);
        }
        return cur;
      }
      case BlockKind::rk3: {
        const Tensor g1 = op(0).forward(x, trace.calls[0]);
        const Tensor d1 = combine({{1.0, &x}, {0.5, &g1}});
        const Tensor g2 = op(1).forward(d1, trace.calls[1]);
        const Tensor d2 = combine({{1.0, &x}, {-1.0, &g1}, {2.0, &g2}});
        const Tensor g3 = op(2).forward(d2, trace.calls[2]);
        return combine({{1.0, &x}, {1.0 / 6.0, &g1}, {4.0 / 6.0, &g2}, {1.0 / 6.0, &g3}});
      }
    }
    throw std::logic_error("Block::forward: bad kind");
  }

  Tensor forward(const Tensor& x) const {
    BlockTrace t;
    return forward(x, t);
  }

  /// Reverse-mode pass through the skip topology. Accumulates parameter grads.
  Tensor backward(const Tensor& upstream, const BlockTrace& trace) {
    if (trace.calls.size() != stage_count(kind_))
      throw std::logic_error("Block::backward: trace does not come from this block's forward");
    switch (kind_) {
      case BlockKind::cascaded: {
        Tensor a = upstream;
        for (std::size_t n = 6; n-- > 0;) a = op(n).backward(a, trace.calls[n]);
        return a;
      }
      case BlockKind::euler: {
        Tensor a = upstream;
        for (std::size_t n = 6; n-- > 0;) {
          Tensor through = op(n).backward(a, trace.calls[n]);
          axpy(a, 1.0, through);
        }
        return a;
      }
      case BlockKind::lf: {
        // adj[j] is the adjoint of D_{j+1}; D_1 and D_2 both equal the input.
        std::vector<Tensor> adj(8, Tensor(upstream.shape()));
        adj[7] = upstream;
        for (std::size_t n = 8; n >= 3; --n) {
          const Tensor& a = adj[n - 1];
          axpy(adj[n - 3], 1.0, a);
          Tensor through = op(n - 3).backward(a, trace.calls[n - 3]);
          axpy(adj[n - 2], 1.0, through);
        }
        return add(adj[0], adj[1]);
      }
      case BlockKind::rk3: {
        const Tensor dg3 = scale(upstream, 1.0 / 6.0);
        const Tensor dd2 = op(2).backward(dg3, trace.calls[2]);
        const Tensor dg2 = combine({{4.0 / 6.0, &upstream}, {2.0, &dd2}});
        const Tensor dd1 = op(1).backward(dg2, trace.calls[1]);
        const Tensor dg1 = combine({{1.0 / 6.0, &upstream}, {-1.0, &dd2}, {0.5, &dd1}});
        const Tensor dx1 = op(0).backward(dg1, trace.calls[0]);
        return combine({{1.0, &upstream}, {1.0, &dd2}, {1.0, &dd1}, {1.0, &dx1}});
      }
    }
    throw std::logic_error("Block::backward: bad kind");
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto& o : ops_)
      for (Parameter* p : o->parameters()) out.push_back(p);
    return out;
  }

  std::size_t conv_count() const {
    std::size_t n = 0;
    for (const auto& o : ops_) n += o->conv_count();
    return n;
  }

  void init(std::mt19937_64& rng) {
    for (auto& o : ops_) o->init(rng);
  }

  std::size_t op_count() const { return ops_.size(); }
  SubOperator& sub_operator(std::size_t i) { return *ops_.at(i); }

 private:
  SubOperator& op(std::size_t stage) const { return *ops_[ops_.size() == 1 ? 0 : stage]; }

  BlockKind kind_;
  std::vector<std::unique_ptr<SubOperator>> ops_;
};

}  // namespace risext
