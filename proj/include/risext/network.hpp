// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "risext/blocks.hpp"
#include "risext/conv.hpp"

namespace risext {

struct ModelSpec {
  BlockKind arch = BlockKind::rk3;
  std::size_t channels = 128;
  std::size_t blocks = 4;
  std::size_t head_kernel = 5;
  std::size_t inner_kernel = 3;
  std::size_t tail_kernel = 3;
  std::size_t io_channels = 2;  // real / imaginary planes
  bool share_rk3_stages = false;

  void validate() const {
    if (channels == 0) throw std::invalid_argument("ModelSpec: channels must be >= 1");
    if (blocks == 0) throw std::invalid_argument("ModelSpec: blocks must be >= 1");
    if (io_channels == 0) throw std::invalid_argument("ModelSpec: io_channels must be >= 1");
    for (std::size_t k : {head_kernel, inner_kernel, tail_kernel})
      if (k % 2 == 0) throw std::invalid_argument("ModelSpec: kernel sizes must be odd");
    if (inner_kernel != 3) throw std::invalid_argument("ModelSpec: block kernels are fixed at 3x3");
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ModelTrace {
  Tensor head_in;
  std::vector<Tensor> block_in;
  std::vector<BlockTrace> blocks;
  Tensor tail_in;
};

/// Head conv (no activation) -> blocks -> tail conv (no activation).
class Model {
 public:
  explicit Model(const ModelSpec& spec) : spec_(spec) {
    spec_.validate();
    head_ = ConvLayer("head", spec_.head_kernel, spec_.head_kernel, spec_.io_channels,
                      spec_.channels);
    for (std::size_t b = 0; b < spec_.blocks; ++b) {
      blocks_.push_back(Block::make(spec_.arch, spec_.channels, "block" + std::to_string(b),
                                    spec_.share_rk3_stages && spec_.arch == BlockKind::rk3));
    }
    tail_ = ConvLayer("tail", spec_.tail_kernel, spec_.tail_kernel, spec_.channels,
                      spec_.io_channels);
  }

  /// Deterministic initialisation; layers draw from one stream in forward order.
  void init(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    head_.init_uniform(rng);
    for (auto& b : blocks_) b.init(rng);
    tail_.init_uniform(rng);
    zero_grad();
  }

  const ModelSpec& spec() const { return spec_; }

  Tensor forward(const Tensor& x, ModelTrace& trace) const {
    trace.head_in = x;
    Tensor d = head_.forward(x);
    trace.block_in.resize(blocks_.size());
    trace.blocks.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      trace.block_in[b] = d;
      d = blocks_[b].forward(d, trace.blocks[b]);
    }
    trace.tail_in = d;
    return tail_.forward(d);
  }

  Tensor forward(const Tensor& x) const {
    Tensor d = head_.forward(x);
    BlockTrace scratch;
    for (const auto& b : blocks_) d = b.forward(d, scratch);
    return tail_.forward(d);
  }

  /// Accumulates all parameter gradients. Returns dL/dinput when `input_grad`
  /// is set, otherwise an empty tensor.
  Tensor backward(const Tensor& upstream, const ModelTrace& trace, bool input_grad = false) {
    if (trace.blocks.size() != blocks_.size())
      throw std::logic_error("Model::backward: trace does not match this model");
    Tensor a = tail_.backward(upstream, trace.tail_in);
    for (std::size_t b = blocks_.size(); b-- > 0;) a = blocks_[b].backward(a, trace.blocks[b]);
    return head_.backward(a, trace.head_in, input_grad);
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out{&head_.kernels(), &head_.bias()};
    for (auto& b : blocks_)
      for (Parameter* p : b.parameters()) out.push_back(p);
    out.push_back(&tail_.kernels());
    out.push_back(&tail_.bias());
    return out;
  }

  std::vector<const Parameter*> parameters() const {
    std::vector<const Parameter*> out;
    for (Parameter* p : const_cast<Model*>(this)->parameters()) out.push_back(p);
    return out;
  }

  void zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
  }

  std::size_t conv_layer_count() const {
    std::size_t n = 2;
    for (const auto& b : blocks_) n += b.conv_count();
    return n;
  }

  /// Weights and biases of every convolution.
  std::size_t conv_param_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters())
      if (p->value.rank() == 4 || p->name.ends_with(".b")) n += p->size();
    return n;
  }

  /// Scalar step multipliers carried by euler / lf blocks.
  std::size_t multiplier_count() const { return param_count() - conv_param_count(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Parameter* p : parameters()) n += p->size();
    return n;
  }

  Block& block(std::size_t i) { return blocks_.at(i); }
  ConvLayer& head() { return head_; }
  ConvLayer& tail() { return tail_; }

 private:
  ModelSpec spec_;
  ConvLayer head_;
  std::vector<Block> blocks_;
  ConvLayer tail_;
};

}  // namespace risext
