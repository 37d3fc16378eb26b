// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <span>

#include "risext/tensor.hpp"

namespace risext {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update, in place. Increments each parameter's step.
inline void adam_step(std::span<Parameter* const> params, double lr, const AdamConfig& cfg = {}) {
  for (Parameter* p : params) {
    ++p->step;
    const double t = static_cast<double>(p->step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    double* w = p->value.data();
    double* m = p->m.data();
    double* v = p->v.data();
    const double* g = p->grad.data();
    for (std::size_t i = 0; i < p->size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace risext
