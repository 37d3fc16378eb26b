// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "risext/network.hpp"
#include "risext/tensor.hpp"

namespace risext {

struct GradCheckOptions {
  double eps = 1e-5;
  double tolerance = 1e-6;
  /// Denominator floor of the relative error. Rounding in the central
  /// difference is about 1e-16 * |objective| / eps, i.e. ~1e-10 absolute here;
  /// below the floor gradients are compared absolutely.
  double floor = 1e-3;
  std::uint64_t seed = 7;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;        // coordinate with the largest error
  std::size_t checked = 0;  // coordinates compared
  std::size_t skipped = 0;  // coordinates whose +-eps probe crossed a ReLU kink

  bool passed(double tol) const { return checked > 0 && max_rel_error < tol; }
};

/// Something differentiable: forward maps x to an output; backward runs a
/// traced forward on x, pushes `upstream` back, accumulates into the
/// parameters' grads and returns dL/dx.
struct GradCheckTarget {
  std::function<Tensor(const Tensor&)> forward;
  std::function<Tensor(const Tensor&, const Tensor&)> backward;
  std::vector<Parameter*> params;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences of the scalar objective sum(w * f(x)), w a fixed random
/// weighting, against the analytic gradient for every parameter and input
/// coordinate. A coordinate is skipped only if one of its probes changes the
/// activation pattern of some ReLU, i.e. the difference straddles a kink.
inline GradCheckReport grad_check(const GradCheckTarget& t, Tensor x,
                                  const GradCheckOptions& opt = {}) {
  GradCheckReport rep;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  std::vector<std::uint8_t> base_pattern;
  debug::relu_pattern_log = &base_pattern;
  const Tensor y0 = t.forward(x);
  debug::relu_pattern_log = nullptr;

  Tensor w(y0.shape());
  for (double& v : w.storage()) v = u(rng);

  for (Parameter* p : t.params) p->zero_grad();
  const Tensor dx = t.backward(x, w);

  std::vector<std::uint8_t> probe;
  auto objective = [&](const Tensor& in, bool& same_pattern) {
    probe.clear();
    debug::relu_pattern_log = &probe;
    const Tensor y = t.forward(in);
    debug::relu_pattern_log = nullptr;
    same_pattern = same_pattern && probe == base_pattern;
    return dot(w, y);
  };

  auto check = [&](double& coord, double analytic, const std::string& name) {
    const double keep = coord;
    bool same = true;
    coord = keep + opt.eps;
    const double fp = objective(x, same);
    coord = keep - opt.eps;
    const double fm = objective(x, same);
    coord = keep;
    if (!same) {
      ++rep.skipped;
      return;
    }
    const double numeric = (fp - fm) / (2.0 * opt.eps);
    const double err = relative_error(analytic, numeric, opt.floor);
    if (++rep.checked == 1 || err > rep.max_rel_error) {
      rep.max_rel_error = err;
      rep.worst = name;
    }
  };

  for (Parameter* p : t.params)
    for (std::size_t i = 0; i < p->size(); ++i)
      check(p->value[i], p->grad[i], p->name + "[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < x.size(); ++i)
    check(x[i], dx[i], "input[" + std::to_string(i) + "]");
  return rep;
}

inline GradCheckTarget grad_target(Model& m) {
  return {[&m](const Tensor& x) { return m.forward(x); },
          [&m](const Tensor& x, const Tensor& up) {
            ModelTrace tr;
            m.forward(x, tr);
            return m.backward(up, tr, true);
          },
          m.parameters()};
}

inline GradCheckTarget grad_target(Block& b) {
  return {[&b](const Tensor& x) { return b.forward(x); },
          [&b](const Tensor& x, const Tensor& up) {
            BlockTrace tr;
            b.forward(x, tr);
            return b.backward(up, tr);
          },
          b.parameters()};
}

inline GradCheckTarget grad_target(ConvLayer& c) {
  return {[&c](const Tensor& x) { return c.forward(x); },
          [&c](const Tensor& x, const Tensor& up) { return c.backward(up, x); },
          {&c.kernels(), &c.bias()}};
}

/// Random tensor with entries uniform on +-[margin, 1], so no entry sits
/// within `margin` of a ReLU kink.
inline Tensor random_tensor_away_from_zero(const Shape& s, std::uint64_t seed, double margin) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(margin, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(s);
  for (double& v : t.storage()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

}  // namespace risext
