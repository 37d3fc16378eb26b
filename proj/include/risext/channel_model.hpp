// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace risext {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

/// Dense row-major complex matrix.
struct CMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<cplx> data;

  CMatrix() = default;
  CMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  cplx& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const CMatrix&, const CMatrix&) = default;
};

/// Array geometry and OFDM grid of the RIS-assisted link.
struct SystemConfig {
  std::size_t M = 4;          // BS antennas (ULA)
  std::size_t L_h = 8;        // RIS elements, horizontal
  std::size_t L_v = 8;        // RIS elements, vertical
  std::size_t K = 64;         // subcarriers
  double f_c = 2.4e9;         // carrier frequency [Hz]
  double bandwidth = 20e6;    // [Hz]
  double d_over_lambda = 0.5; // element spacing in carrier wavelengths
  std::size_t P_h = 5;        // BS-RIS paths
  std::size_t P_g = 5;        // RIS-user paths

  std::size_t L() const { return L_h * L_v; }
  double T_s() const { return 1.0 / bandwidth; }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("SystemConfig: " + m); };
    if (M < 1) fail("M must be >= 1");
    if (L_h < 1 || L_v < 1) fail("L_h and L_v must be >= 1");
    if (K < 1) fail("K must be >= 1");
    if (!(d_over_lambda > 0.0) || !std::isfinite(d_over_lambda)) fail("d_over_lambda must be > 0");
    if (P_h < 1 || P_g < 1) fail("path counts must be >= 1");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) fail("bandwidth must be > 0");
    if (!(f_c > 0.0) || !std::isfinite(f_c)) fail("f_c must be > 0");
  }

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

struct PathParams {
  cplx gain{};                 // complex path gain at f_c
  double delay = 0.0;          // [s]
  double azimuth = 0.0;        // theta [rad]
  double elevation = 0.0;      // phi [rad]
  double departure_angle = 0.0;  // psi [rad], BS side only

  friend bool operator==(const PathParams&, const PathParams&) = default;
};

struct ScenarioParams {
  std::vector<PathParams> bs_ris_paths;
  std::vector<PathParams> ris_user_paths;

  friend bool operator==(const ScenarioParams&, const ScenarioParams&) = default;
};

/// Cascaded channel C = [c_1 ... c_K], shape (M*L) x K. Column k stacks the M
/// columns of C_k, so entry (m*L + l, k) is C_k[l, m].
struct CascadedChannel {
  SystemConfig config;
  CMatrix data;

  std::size_t row_of(std::size_t l, std::size_t m) const { return m * config.L() + l; }
};

namespace detail {
inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite angle");
}
}  // namespace detail

/// BS-side ULA response, entry m = exp(+j 2pi (d/lambda) m sin psi) / sqrt(M).
inline CVector ula_steering(double psi, std::size_t M, double d_over_lambda) {
  detail::require_finite(psi, "ula_steering");
  if (M < 1) throw std::invalid_argument("ula_steering: M must be >= 1");
  CVector a(M);
  const double step = 2.0 * std::numbers::pi * d_over_lambda * std::sin(psi);
  const double norm = 1.0 / std::sqrt(static_cast<double>(M));
  for (std::size_t m = 0; m < M; ++m) a[m] = std::polar(norm, step * static_cast<double>(m));
  return a;
}

/// RIS-side UPA response a_el(phi) (x) a_az(phi, theta), unnormalised.
/// Entry l_v * L_h + l_h = exp(-j 2pi (d/lambda) (l_v cos phi + l_h sin phi cos theta)).
inline CVector upa_steering(double phi, double theta, std::size_t L_h, std::size_t L_v,
                            double d_over_lambda) {
  detail::require_finite(phi, "upa_steering");
  detail::require_finite(theta, "upa_steering");
  if (L_h < 1 || L_v < 1) throw std::invalid_argument("upa_steering: L_h, L_v must be >= 1");
  const double two_pi_d = 2.0 * std::numbers::pi * d_over_lambda;
  CVector el(L_v), az(L_h);
  for (std::size_t l = 0; l < L_v; ++l)
    el[l] = std::polar(1.0, -two_pi_d * static_cast<double>(l) * std::cos(phi));
  for (std::size_t l = 0; l < L_h; ++l)
    az[l] = std::polar(1.0, -two_pi_d * static_cast<double>(l) * std::sin(phi) * std::cos(theta));
  CVector out(L_v * L_h);
  for (std::size_t v = 0; v < L_v; ++v)
    for (std::size_t h = 0; h < L_h; ++h) out[v * L_h + h] = el[v] * az[h];
  return out;
}

namespace detail {
inline cplx delay_phase(const SystemConfig& c, double delay, std::size_t k) {
  const double K = static_cast<double>(c.K);
  return std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) * delay / (K * c.T_s()));
}
inline void require_subcarrier(const SystemConfig& c, std::size_t k) {
  if (k >= c.K)
    throw std::out_of_range("subcarrier index " + std::to_string(k) + " out of range [0, " +
                            std::to_string(c.K) + ")");
}
}  // namespace detail

/// BS -> RIS channel H_k (L x M) at subcarrier k.
inline CMatrix bs_ris_channel(const SystemConfig& c, const std::vector<PathParams>& paths,
                              std::size_t k) {
  detail::require_subcarrier(c, k);
  const std::size_t L = c.L();
  CMatrix H(L, c.M);
  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(c.K));
  for (const PathParams& p : paths) {
    const cplx coeff = inv_sqrt_k * p.gain * detail::delay_phase(c, p.delay, k);
    const CVector ar = upa_steering(p.elevation, p.azimuth, c.L_h, c.L_v, c.d_over_lambda);
    const CVector at = ula_steering(p.departure_angle, c.M, c.d_over_lambda);
    for (std::size_t l = 0; l < L; ++l) {
      const cplx row = coeff * ar[l];
      for (std::size_t m = 0; m < c.M; ++m) H(l, m) += row * std::conj(at[m]);
    }
  }
  return H;
}

/// RIS -> user channel g_k (length L). The row vector g_k^H is
/// (1/sqrt K) sum_i g_i exp(-j 2pi k tau_i / (K T_s)) a^H(phi_i, theta_i);
/// the column returned here is its conjugate transpose.
inline CVector ris_user_channel(const SystemConfig& c, const std::vector<PathParams>& paths,
                                std::size_t k) {
  detail::require_subcarrier(c, k);
  const std::size_t L = c.L();
  CVector gh(L);
  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(c.K));
  for (const PathParams& p : paths) {
    const cplx coeff = inv_sqrt_k * p.gain * detail::delay_phase(c, p.delay, k);
    const CVector a = upa_steering(p.elevation, p.azimuth, c.L_h, c.L_v, c.d_over_lambda);
    for (std::size_t l = 0; l < L; ++l) gh[l] += coeff * std::conj(a[l]);
  }
  for (cplx& v : gh) v = std::conj(v);
  return gh;
}

/// C_k = diag(g_k) H_k.
inline CMatrix cascaded_channel_k(const CMatrix& H, const CVector& g) {
  if (g.size() != H.rows)
    throw std::invalid_argument("cascaded_channel_k: g has " + std::to_string(g.size()) +
                                " entries, H has " + std::to_string(H.rows) + " rows");
  CMatrix C(H.rows, H.cols);
  for (std::size_t l = 0; l < H.rows; ++l)
    for (std::size_t m = 0; m < H.cols; ++m) C(l, m) = g[l] * H(l, m);
  return C;
}

inline void validate_scenario(const SystemConfig& c, const ScenarioParams& s) {
  if (s.bs_ris_paths.size() != c.P_h || s.ris_user_paths.size() != c.P_g)
    throw std::invalid_argument("scenario path counts (" + std::to_string(s.bs_ris_paths.size()) +
                                ", " + std::to_string(s.ris_user_paths.size()) +
                                ") do not match config (" + std::to_string(c.P_h) + ", " +
                                std::to_string(c.P_g) + ")");
  for (const auto* list : {&s.bs_ris_paths, &s.ris_user_paths})
    for (const PathParams& p : *list) {
      if (!(p.delay >= 0.0)) throw std::invalid_argument("scenario: negative path delay");
      for (double a : {p.azimuth, p.elevation, p.departure_angle})
        detail::require_finite(a, "scenario");
    }
}

inline CascadedChannel assemble_cascaded(const SystemConfig& c, const ScenarioParams& s) {
  c.validate();
  validate_scenario(c, s);
  CascadedChannel out{c, CMatrix(c.M * c.L(), c.K)};
  for (std::size_t k = 0; k < c.K; ++k) {
    const CMatrix Ck = cascaded_channel_k(bs_ris_channel(c, s.bs_ris_paths, k),
                                          ris_user_channel(c, s.ris_user_paths, k));
    for (std::size_t m = 0; m < c.M; ++m)
      for (std::size_t l = 0; l < c.L(); ++l) out.data(out.row_of(l, m), k) = Ck(l, m);
  }
  return out;
}

/// Same geometry observed at carrier f_c + delta_f. The physical element
/// spacing is fixed, so d/lambda scales with frequency; path gains and the
/// baseband subcarrier grid are unchanged.
inline SystemConfig shifted_carrier(const SystemConfig& c, double delta_f) {
  SystemConfig out = c;
  out.f_c = c.f_c + delta_f;
  out.d_over_lambda = c.d_over_lambda * out.f_c / c.f_c;
  out.validate();
  return out;
}

}  // namespace risext
