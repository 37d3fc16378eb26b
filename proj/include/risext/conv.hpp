// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "risext/tensor.hpp"

namespace risext {

namespace debug {
/// When set, ConvLayer::backward reports a wrong bias gradient. Exists so the
/// gradient checker can be shown to catch a broken backward pass.
inline std::atomic<bool> corrupt_conv_backward{false};
}  // namespace debug

namespace detail {

struct ConvGeometry {
  long batch, height, width, cin, cout, kh, kw;
  long ph() const { return kh / 2; }
  long pw() const { return kw / 2; }
};

// Eight doubles; compiles to one AVX-512 register or two AVX2 registers.
typedef double vec8 __attribute__((vector_size(64)));
constexpr long kLanes = 8;

inline vec8 load8(const double* p) {
  vec8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}
inline void store8(double* p, vec8 v) { std::memcpy(p, &v, sizeof v); }

// out[b,y,x,o] = bias[o] + sum_{dy,dx,c} in[b, y+dy-ph, x+dx-pw, c] * w[dy,dx,c,o]
// with zero padding. Output channels are handled NV vectors at a time and
// interior pixels four at a time so the accumulators stay in registers.
template <long NV>
void conv_same_vec(const double* in, const double* w, const double* bias, double* out,
                   const ConvGeometry& g) {
  constexpr long OB = NV * kLanes;
  const long H = g.height, W = g.width, cin = g.cin, cout = g.cout, ph = g.ph(), pw = g.pw();
  auto init = [&](vec8* acc, long ob) {
    for (long v = 0; v < NV; ++v) acc[v] = bias ? load8(bias + ob + v * kLanes) : vec8{};
  };
  for (long b = 0; b < g.batch; ++b) {
    for (long y = 0; y < H; ++y) {
      const long dy_lo = std::max(0L, ph - y), dy_hi = std::min(g.kh, H + ph - y);
      long xx = 0;
      while (xx < W) {
        if (xx >= pw && xx + 3 + pw < W) {
          for (long ob = 0; ob < cout; ob += OB) {
            vec8 a0[NV], a1[NV], a2[NV], a3[NV];
            init(a0, ob);
            init(a1, ob);
            init(a2, ob);
            init(a3, ob);
            for (long dy = dy_lo; dy < dy_hi; ++dy) {
              const double* row = in + ((b * H + y + dy - ph) * W) * cin;
              for (long dx = 0; dx < g.kw; ++dx) {
                const double* px = row + (xx + dx - pw) * cin;
                const double* wk = w + ((dy * g.kw + dx) * cin) * cout + ob;
                for (long c = 0; c < cin; ++c) {
                  const double* wr = wk + c * cout;
                  const double x0 = px[c], x1 = px[cin + c], x2 = px[2 * cin + c],
                               x3 = px[3 * cin + c];
                  for (long v = 0; v < NV; ++v) {
                    const vec8 wv = load8(wr + v * kLanes);
                    a0[v] += x0 * wv;
                    a1[v] += x1 * wv;
                    a2[v] += x2 * wv;
                    a3[v] += x3 * wv;
                  }
                }
              }
            }
            double* dst = out + ((b * H + y) * W + xx) * cout + ob;
            for (long v = 0; v < NV; ++v) {
              store8(dst + v * kLanes, a0[v]);
              store8(dst + cout + v * kLanes, a1[v]);
              store8(dst + 2 * cout + v * kLanes, a2[v]);
              store8(dst + 3 * cout + v * kLanes, a3[v]);
            }
          }
          xx += 4;
        } else {
          const long dx_lo = std::max(0L, pw - xx), dx_hi = std::min(g.kw, W + pw - xx);
          for (long ob = 0; ob < cout; ob += OB) {
            vec8 acc[NV];
            init(acc, ob);
            for (long dy = dy_lo; dy < dy_hi; ++dy) {
              for (long dx = dx_lo; dx < dx_hi; ++dx) {
                const double* px = in + ((b * H + y + dy - ph) * W + xx + dx - pw) * cin;
                const double* wk = w + ((dy * g.kw + dx) * cin) * cout + ob;
                for (long c = 0; c < cin; ++c)
                  for (long v = 0; v < NV; ++v) acc[v] += px[c] * load8(wk + c * cout + v * kLanes);
              }
            }
            double* dst = out + ((b * H + y) * W + xx) * cout + ob;
            for (long v = 0; v < NV; ++v) store8(dst + v * kLanes, acc[v]);
          }
          xx += 1;
        }
      }
    }
  }
}

// Scalar variant for output widths that are not a multiple of eight.
inline void conv_same_scalar(const double* in, const double* w, const double* bias, double* out,
                             const ConvGeometry& g) {
  const long H = g.height, W = g.width, cin = g.cin, cout = g.cout, ph = g.ph(), pw = g.pw();
  for (long b = 0; b < g.batch; ++b)
    for (long y = 0; y < H; ++y) {
      const long dy_lo = std::max(0L, ph - y), dy_hi = std::min(g.kh, H + ph - y);
      for (long xx = 0; xx < W; ++xx) {
        const long dx_lo = std::max(0L, pw - xx), dx_hi = std::min(g.kw, W + pw - xx);
        double* dst = out + ((b * H + y) * W + xx) * cout;
        for (long o = 0; o < cout; ++o) dst[o] = bias ? bias[o] : 0.0;
        for (long dy = dy_lo; dy < dy_hi; ++dy)
          for (long dx = dx_lo; dx < dx_hi; ++dx) {
            const double* px = in + ((b * H + y + dy - ph) * W + xx + dx - pw) * cin;
            const double* wk = w + ((dy * g.kw + dx) * cin) * cout;
            for (long c = 0; c < cin; ++c)
              for (long o = 0; o < cout; ++o) dst[o] += px[c] * wk[c * cout + o];
          }
      }
    }
}

// Narrow outputs (cout < 8): vectorised over input channels against kernels
// laid out as wt[o][dy][dx][c]; cin must be a multiple of eight.
template <long CO>
void conv_same_narrow(const double* in, const double* w, const double* bias, double* out,
                      const ConvGeometry& g) {
  const long H = g.height, W = g.width, cin = g.cin, ph = g.ph(), pw = g.pw();
  const long taps = g.kh * g.kw * cin;
  std::vector<double> wt(static_cast<std::size_t>(CO * taps));
  for (long t = 0; t < taps; ++t)
    for (long o = 0; o < CO; ++o) wt[o * taps + t] = w[t * CO + o];
  for (long b = 0; b < g.batch; ++b)
    for (long y = 0; y < H; ++y) {
      const long dy_lo = std::max(0L, ph - y), dy_hi = std::min(g.kh, H + ph - y);
      for (long xx = 0; xx < W; ++xx) {
        const long dx_lo = std::max(0L, pw - xx), dx_hi = std::min(g.kw, W + pw - xx);
        vec8 acc[CO] = {};
        for (long dy = dy_lo; dy < dy_hi; ++dy)
          for (long dx = dx_lo; dx < dx_hi; ++dx) {
            const double* px = in + ((b * H + y + dy - ph) * W + xx + dx - pw) * cin;
            const long t0 = (dy * g.kw + dx) * cin;
            for (long c = 0; c < cin; c += kLanes) {
              const vec8 xv = load8(px + c);
              for (long o = 0; o < CO; ++o) acc[o] += xv * load8(wt.data() + o * taps + t0 + c);
            }
          }
        double* dst = out + ((b * H + y) * W + xx) * CO;
        for (long o = 0; o < CO; ++o) {
          double s = bias ? bias[o] : 0.0;
          for (long l = 0; l < kLanes; ++l) s += acc[o][l];
          dst[o] = s;
        }
      }
    }
}

// dw[dy,dx,c,o] += sum_{b,y,x} in[b, y+dy-ph, x+dx-pw, c] * up[b,y,x,o]
template <long CB, long NV>
void conv_weight_grad_vec(const double* in, const double* up, double* dw, const ConvGeometry& g) {
  constexpr long OB = NV * kLanes;
  const long H = g.height, W = g.width, cin = g.cin, cout = g.cout, ph = g.ph(), pw = g.pw();
  for (long b = 0; b < g.batch; ++b) {
    for (long y = 0; y < H; ++y) {
      const double* up_row = up + ((b * H + y) * W) * cout;
      for (long dy = 0; dy < g.kh; ++dy) {
        const long iy = y + dy - ph;
        if (iy < 0 || iy >= H) continue;
        const double* in_row = in + ((b * H + iy) * W) * cin;
        for (long dx = 0; dx < g.kw; ++dx) {
          const long x_lo = std::max(0L, pw - dx), x_hi = std::min(W, W + pw - dx);
          for (long c0 = 0; c0 < cin; c0 += CB) {
            for (long ob = 0; ob < cout; ob += OB) {
              double* dst = dw + ((dy * g.kw + dx) * cin + c0) * cout + ob;
              vec8 acc[CB][NV];
              for (long cb = 0; cb < CB; ++cb)
                for (long v = 0; v < NV; ++v) acc[cb][v] = load8(dst + cb * cout + v * kLanes);
              for (long xx = x_lo; xx < x_hi; ++xx) {
                const double* xr = in_row + (xx + dx - pw) * cin + c0;
                const double* ur = up_row + xx * cout + ob;
                vec8 uv[NV];
                for (long v = 0; v < NV; ++v) uv[v] = load8(ur + v * kLanes);
                for (long cb = 0; cb < CB; ++cb)
                  for (long v = 0; v < NV; ++v) acc[cb][v] += xr[cb] * uv[v];
              }
              for (long cb = 0; cb < CB; ++cb)
                for (long v = 0; v < NV; ++v) store8(dst + cb * cout + v * kLanes, acc[cb][v]);
            }
          }
        }
      }
    }
  }
}

inline void conv_weight_grad_scalar(const double* in, const double* up, double* dw,
                                    const ConvGeometry& g) {
  const long H = g.height, W = g.width, cin = g.cin, cout = g.cout, ph = g.ph(), pw = g.pw();
  for (long b = 0; b < g.batch; ++b)
    for (long y = 0; y < H; ++y)
      for (long xx = 0; xx < W; ++xx) {
        const double* ur = up + ((b * H + y) * W + xx) * cout;
        for (long dy = 0; dy < g.kh; ++dy) {
          const long iy = y + dy - ph;
          if (iy < 0 || iy >= H) continue;
          for (long dx = 0; dx < g.kw; ++dx) {
            const long ix = xx + dx - pw;
            if (ix < 0 || ix >= W) continue;
            const double* xr = in + ((b * H + iy) * W + ix) * cin;
            double* dst = dw + ((dy * g.kw + dx) * cin) * cout;
            for (long c = 0; c < cin; ++c)
              for (long o = 0; o < cout; ++o) dst[c * cout + o] += xr[c] * ur[o];
          }
        }
      }
}

// Narrow-output weight gradient, vectorised over input channels into a
// transposed [o][dy][dx][c] buffer that is added back at the end.
inline void conv_weight_grad_narrow(const double* in, const double* up, double* dw,
                                    const ConvGeometry& g) {
  const long H = g.height, W = g.width, cin = g.cin, cout = g.cout, ph = g.ph(), pw = g.pw();
  const long taps = g.kh * g.kw * cin;
  std::vector<double> dwt(static_cast<std::size_t>(cout * taps), 0.0);
  for (long b = 0; b < g.batch; ++b)
    for (long y = 0; y < H; ++y)
      for (long xx = 0; xx < W; ++xx) {
        const double* ur = up + ((b * H + y) * W + xx) * cout;
        for (long dy = 0; dy < g.kh; ++dy) {
          const long iy = y + dy - ph;
          if (iy < 0 || iy >= H) continue;
          for (long dx = 0; dx < g.kw; ++dx) {
            const long ix = xx + dx - pw;
            if (ix < 0 || ix >= W) continue;
            const double* xr = in + ((b * H + iy) * W + ix) * cin;
            const long t0 = (dy * g.kw + dx) * cin;
            for (long c = 0; c < cin; c += kLanes) {
              const vec8 xv = load8(xr + c);
              for (long o = 0; o < cout; ++o) {
                double* d = dwt.data() + o * taps + t0 + c;
                store8(d, load8(d) + ur[o] * xv);
              }
            }
          }
        }
      }
  for (long t = 0; t < taps; ++t)
    for (long o = 0; o < cout; ++o) dw[t * cout + o] += dwt[o * taps + t];
}

inline void conv_same_dispatch(const double* in, const double* w, const double* bias, double* out,
                               const ConvGeometry& g) {
  if (g.cout % 16 == 0) return conv_same_vec<2>(in, w, bias, out, g);
  if (g.cout % 8 == 0) return conv_same_vec<1>(in, w, bias, out, g);
  if (g.cin % kLanes == 0) {
    switch (g.cout) {
      case 1: return conv_same_narrow<1>(in, w, bias, out, g);
      case 2: return conv_same_narrow<2>(in, w, bias, out, g);
      case 3: return conv_same_narrow<3>(in, w, bias, out, g);
      case 4: return conv_same_narrow<4>(in, w, bias, out, g);
      default: break;
    }
  }
  conv_same_scalar(in, w, bias, out, g);
}

inline void conv_weight_grad_dispatch(const double* in, const double* up, double* dw,
                                      const ConvGeometry& g) {
  if (g.cout % 8 != 0)
    return g.cin % kLanes == 0 ? conv_weight_grad_narrow(in, up, dw, g)
                               : conv_weight_grad_scalar(in, up, dw, g);
  const bool wide = g.cout % 16 == 0;
  if (g.cin % 8 == 0)
    return wide ? conv_weight_grad_vec<8, 2>(in, up, dw, g) : conv_weight_grad_vec<8, 1>(in, up, dw, g);
  if (g.cin % 4 == 0)
    return wide ? conv_weight_grad_vec<4, 2>(in, up, dw, g) : conv_weight_grad_vec<4, 1>(in, up, dw, g);
  if (g.cin % 2 == 0)
    return wide ? conv_weight_grad_vec<2, 2>(in, up, dw, g) : conv_weight_grad_vec<2, 1>(in, up, dw, g);
  wide ? conv_weight_grad_vec<1, 2>(in, up, dw, g) : conv_weight_grad_vec<1, 1>(in, up, dw, g);
}

}  // namespace detail

/// Stride-1, zero-padded "same" 2-D cross-correlation with bias.
///
/// Kernels have shape [kh, kw, cin, cout]; inputs are [B, H, W, cin] (a rank-3
/// [H, W, cin] input is treated as a batch of one). Kernel sizes must be odd so
/// the padding is symmetric and the output keeps the input's spatial size.
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(std::string name, std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout)
      : kernels_(name + ".w", Tensor({kh, kw, cin, cout})), bias_(name + ".b", Tensor({cout})) {
    if (kh % 2 == 0 || kw % 2 == 0)
      throw std::invalid_argument("ConvLayer: kernel sizes must be odd, got " +
                                  std::to_string(kh) + "x" + std::to_string(kw));
    if (cin == 0 || cout == 0) throw std::invalid_argument("ConvLayer: zero channel count");
  }

  std::size_t kernel_h() const { return kernels_.value.dim(0); }
  std::size_t kernel_w() const { return kernels_.value.dim(1); }
  std::size_t in_channels() const { return kernels_.value.dim(2); }
  std::size_t out_channels() const { return kernels_.value.dim(3); }
  std::size_t param_count() const { return kernels_.size() + bias_.size(); }

  Parameter& kernels() { return kernels_; }
  Parameter& bias() { return bias_; }
  const Parameter& kernels() const { return kernels_; }
  const Parameter& bias() const { return bias_; }

  /// Symmetric fan-based uniform init on +-sqrt(6 / (fan_in + fan_out)), zero bias.
  template <class Rng>
  void init_uniform(Rng& rng) {
    const double area = static_cast<double>(kernel_h() * kernel_w());
    const double bound =
        std::sqrt(6.0 / (area * static_cast<double>(in_channels()) +
                         area * static_cast<double>(out_channels())));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : kernels_.value.storage()) w = dist(rng);
    bias_.value.fill(0.0);
  }

  Tensor forward(const Tensor& input) const {
    const auto g = geometry(input);
    Shape out_shape = input.shape();
    out_shape.back() = out_channels();
    Tensor out = Tensor::uninit(out_shape);
    detail::conv_same_dispatch(input.data(), kernels_.value.data(), bias_.value.data(),
                               out.data(), g);
    return out;
  }

  /// Accumulates kernel and bias gradients; returns the input gradient, or an
  /// empty tensor when `input_grad` is false. `input` must be the tensor that
  /// was passed to forward().
  Tensor backward(const Tensor& upstream, const Tensor& input, bool input_grad = true) {
    if (input.empty()) throw std::logic_error("ConvLayer::backward: no cached forward input");
    const auto g = geometry(input);
    if (upstream.size() != static_cast<std::size_t>(g.batch * g.height * g.width * g.cout))
      throw std::invalid_argument("ConvLayer::backward: upstream shape " +
                                  shape_str(upstream.shape()) + " does not match output");
    detail::conv_weight_grad_dispatch(input.data(), upstream.data(), kernels_.grad.data(), g);
    const std::size_t pixels = upstream.size() / out_channels();
    for (std::size_t p = 0; p < pixels; ++p)
      for (std::size_t o = 0; o < out_channels(); ++o)
        bias_.grad[o] += upstream[p * out_channels() + o];
    if (debug::corrupt_conv_backward) bias_.grad[0] += 1e-3;
    if (!input_grad) return {};

    // Input gradient: same-padded correlation of the upstream gradient with the
    // spatially flipped, channel-transposed kernels.
    const std::size_t kh = kernel_h(), kw = kernel_w(), ci = in_channels(), co = out_channels();
    Tensor flipped({kh, kw, co, ci});
    for (std::size_t dy = 0; dy < kh; ++dy)
      for (std::size_t dx = 0; dx < kw; ++dx)
        for (std::size_t c = 0; c < ci; ++c)
          for (std::size_t o = 0; o < co; ++o)
            flipped[((dy * kw + dx) * co + o) * ci + c] =
                kernels_.value[(((kh - 1 - dy) * kw + (kw - 1 - dx)) * ci + c) * co + o];
    detail::ConvGeometry gt = g;
    gt.cin = g.cout;
    gt.cout = g.cin;
    Tensor dx = Tensor::uninit(input.shape());
    detail::conv_same_dispatch(upstream.data(), flipped.data(), nullptr, dx.data(), gt);
    return dx;
  }

 private:
  detail::ConvGeometry geometry(const Tensor& input) const {
    detail::ConvGeometry g{};
    if (input.rank() == 4) {
      g.batch = static_cast<long>(input.dim(0));
      g.height = static_cast<long>(input.dim(1));
      g.width = static_cast<long>(input.dim(2));
      g.cin = static_cast<long>(input.dim(3));
    } else if (input.rank() == 3) {
      g.batch = 1;
      g.height = static_cast<long>(input.dim(0));
      g.width = static_cast<long>(input.dim(1));
      g.cin = static_cast<long>(input.dim(2));
    } else {
      throw std::invalid_argument("ConvLayer: expected rank-3 or rank-4 input, got " +
                                  shape_str(input.shape()));
    }
    if (static_cast<std::size_t>(g.cin) != in_channels())
      throw std::invalid_argument("ConvLayer: input has " + std::to_string(g.cin) +
                                  " channels, layer expects " + std::to_string(in_channels()));
    g.cout = static_cast<long>(out_channels());
    g.kh = static_cast<long>(kernel_h());
    g.kw = static_cast<long>(kernel_w());
    return g;
  }

  Parameter kernels_;
  Parameter bias_;
};

}  // namespace risext
