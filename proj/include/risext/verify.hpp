// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "risext/blocks.hpp"
#include "risext/channel_model.hpp"
#include "risext/grad_check.hpp"
#include "risext/network.hpp"

namespace risext {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  double worst_grad_error = 0.0;
  std::string worst_grad_where;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

namespace detail {

inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

inline Tensor scalar_tensor(double v) { return Tensor({1, 1, 1}, v); }

/// Block whose every stage is the given stub.
inline Block stub_block(BlockKind kind, const std::function<std::unique_ptr<SubOperator>()>& make) {
  std::vector<std::unique_ptr<SubOperator>> ops;
  for (std::size_t i = 0; i < stage_count(kind); ++i) ops.push_back(make());
  return Block(kind, std::move(ops));
}

}  // namespace detail

/// y(1) for dy/dx = lambda y, integrated with n RK3 blocks of step 1/n.
inline double rk3_integrate(double lambda, std::size_t n) {
  const double h = 1.0 / static_cast<double>(n);
  Block b = detail::stub_block(BlockKind::rk3, [&] { return FunctionOp::linear(h * lambda); });
  Tensor y = detail::scalar_tensor(1.0);
  for (std::size_t i = 0; i < n; ++i) y = b.forward(y);
  return y[0];
}

inline VerifyReport run_verify_suite() {
  VerifyReport rep;
  auto add = [&](std::string name, bool ok, std::string detail) {
    rep.checks.push_back({std::move(name), ok, std::move(detail)});
  };

  {  // steering vectors
    double worst = 0.0;
    for (double psi : {-1.2, -0.3, 0.0, 0.7, 1.5}) {
      const CVector a = ula_steering(psi, 6, 0.5);
      double n2 = 0.0;
      for (const cplx& v : a) n2 += std::norm(v);
      worst = std::max(worst, std::abs(n2 - 1.0));
      for (std::size_t m = 0; m < a.size(); ++m) {
        const cplx ref = std::exp(cplx(0.0, std::numbers::pi * static_cast<double>(m) *
                                                 std::sin(psi))) /
                         std::sqrt(6.0);
        worst = std::max(worst, std::abs(a[m] - ref));
      }
    }
    add("ula steering: unit norm and closed form", worst < 1e-13, "max dev " + detail::sci(worst));
  }
  {
    double worst = 0.0;
    for (auto [phi, theta] : {std::pair{0.9, -0.4}, {1.6, 1.1}, {2.2, 0.0}}) {
      const CVector a = upa_steering(phi, theta, 5, 3, 0.5);
      for (std::size_t v = 0; v < 3; ++v)
        for (std::size_t h = 0; h < 5; ++h) {
          const double arg = -std::numbers::pi * (static_cast<double>(v) * std::cos(phi) +
                                                  static_cast<double>(h) * std::sin(phi) *
                                                      std::cos(theta));
          worst = std::max(worst, std::abs(a[v * 5 + h] - std::polar(1.0, arg)));
        }
    }
    add("upa steering: Kronecker structure", worst < 1e-13, "max dev " + detail::sci(worst));
  }

  {  // integrator oracles
    const double lambda = 0.1;
    Block rk = detail::stub_block(BlockKind::rk3, [&] { return FunctionOp::linear(lambda); });
    const double got = rk.forward(detail::scalar_tensor(1.0))[0];
    const double want = 1.0 + lambda + lambda * lambda / 2.0 + lambda * lambda * lambda / 6.0;
    const double rel = std::abs(got - want) / want;
    add("rk3 block: amplification 1 + l + l^2/2 + l^3/6", rel <= 1e-12, "rel err " + detail::sci(rel));

    const double e1 = std::abs(rk3_integrate(1.0, 10) - std::exp(1.0));
    const double e2 = std::abs(rk3_integrate(1.0, 20) - std::exp(1.0));
    add("rk3 block: third-order convergence", e1 / e2 >= 7.0,
        "error ratio " + std::to_string(e1 / e2));

    Block lf = detail::stub_block(BlockKind::lf, [&] { return FunctionOp::linear(lambda); });
    std::vector<double> a{1.0, 1.0};
    for (int n = 2; n < 8; ++n) a.push_back(a[n - 2] + lambda * a[n - 1]);
    const double lf_got = lf.forward(detail::scalar_tensor(1.0))[0];
    add("lf block: two-term recurrence", lf_got == a[7],
        "got " + detail::sci(lf_got) + ", recurrence " + detail::sci(a[7]));

    Block lfc = detail::stub_block(BlockKind::lf, [] { return FunctionOp::constant(0.25); });
    const double c_got = lfc.forward(detail::scalar_tensor(1.0))[0];
    add("lf block: constant field gives x + 3c", c_got == 1.75, "got " + detail::sci(c_got));

    Block eu = detail::stub_block(BlockKind::euler, [&] { return FunctionOp::linear(lambda); });
    const double eu_got = eu.forward(detail::scalar_tensor(1.0))[0];
    const double eu_rel = std::abs(eu_got - std::pow(1.0 + lambda, 6)) / std::pow(1.0 + lambda, 6);
    add("euler block: (1 + l)^6", eu_rel <= 1e-14, "rel err " + detail::sci(eu_rel));
  }

  {  // convolution against a direct loop
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ConvLayer conv("c", 3, 3, 2, 3);
    conv.init_uniform(rng);
    for (double& b : conv.bias().value.storage()) b = u(rng);
    Tensor x({5, 4, 2});
    for (double& v : x.storage()) v = u(rng);
    const Tensor y = conv.forward(x);
    double worst = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 4; ++j)
        for (int o = 0; o < 3; ++o) {
          double s = conv.bias().value[static_cast<std::size_t>(o)];
          for (int di = 0; di < 3; ++di)
            for (int dj = 0; dj < 3; ++dj)
              for (int c = 0; c < 2; ++c) {
                const int ii = i + di - 1, jj = j + dj - 1;
                if (ii < 0 || ii >= 5 || jj < 0 || jj >= 4) continue;
                s += x.at({std::size_t(ii), std::size_t(jj), std::size_t(c)}) *
                     conv.kernels().value.at({std::size_t(di), std::size_t(dj), std::size_t(c),
                                              std::size_t(o)});
              }
          worst = std::max(worst, std::abs(s - y.at({std::size_t(i), std::size_t(j),
                                                     std::size_t(o)})));
        }
    add("conv2d: matches direct loop", worst < 1e-13, "max dev " + detail::sci(worst));
  }

  // Gradient checks on a tiny instance of every architecture.
  for (BlockKind kind : {BlockKind::cascaded, BlockKind::euler, BlockKind::lf, BlockKind::rk3}) {
    ModelSpec spec;
    spec.arch = kind;
    spec.channels = 8;
    spec.blocks = 1;
    Model m(spec);
    m.init(3);
    const Tensor x = random_tensor_away_from_zero({16, 8, 2}, 11, 1e-3);
    const GradCheckReport g = grad_check(grad_target(m), x);
    if (g.max_rel_error >= rep.worst_grad_error) {
      rep.worst_grad_error = g.max_rel_error;
      rep.worst_grad_where = std::string(to_string(kind)) + " " + g.worst;
    }
    add("gradient check: " + std::string(to_string(kind)), g.passed(1e-6),
        "max rel err " + detail::sci(g.max_rel_error) + " at " + g.worst + " (" +
            std::to_string(g.checked) + " coords, " + std::to_string(g.skipped) +
            " skipped at kinks)");
  }
  return rep;
}

}  // namespace risext
