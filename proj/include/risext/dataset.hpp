// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "risext/binary_io.hpp"
#include "risext/channel_model.hpp"
#include "risext/errors.hpp"
#include "risext/parallel.hpp"
#include "risext/rng.hpp"
#include "risext/tensor.hpp"

namespace risext {

// ---------------------------------------------------------------------------
// Element selection
// ---------------------------------------------------------------------------

/// Regular on/off grid over the L_v x L_h RIS lattice. Element l = v * L_h + h
/// is on iff h % stride_h == 0 and v % stride_v == 0.
struct SamplingPattern {
  std::size_t L_h = 0;
  std::size_t L_v = 0;
  std::size_t stride_h = 1;
  std::size_t stride_v = 1;
  double rate = 1.0;
  std::vector<std::uint8_t> mask;

  std::size_t L() const { return L_h * L_v; }
  std::size_t selected() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  }
  bool on(std::size_t l) const { return mask[l] != 0; }

  friend bool operator==(const SamplingPattern&, const SamplingPattern&) = default;
};

inline SamplingPattern make_pattern(std::size_t L_h, std::size_t L_v, std::size_t stride_h,
                                    std::size_t stride_v) {
  if (stride_h == 0 || stride_v == 0 || L_h % stride_h != 0 || L_v % stride_v != 0)
    throw UnsupportedRateError("strides (" + std::to_string(stride_h) + ", " +
                               std::to_string(stride_v) + ") do not divide the " +
                               std::to_string(L_v) + "x" + std::to_string(L_h) + " array");
  SamplingPattern p;
  p.L_h = L_h;
  p.L_v = L_v;
  p.stride_h = stride_h;
  p.stride_v = stride_v;
  p.rate = 1.0 / static_cast<double>(stride_h * stride_v);
  p.mask.assign(L_h * L_v, 0);
  for (std::size_t v = 0; v < L_v; v += stride_v)
    for (std::size_t h = 0; h < L_h; h += stride_h) p.mask[v * L_h + h] = 1;
  return p;
}

/// Uniform pattern for rate r = 1/n. n is factored as stride_h * stride_v,
/// taking the most balanced factorisation whose strides divide the array and,
/// on ties, the larger stride horizontally: 1/2 -> (2,1), 1/4 -> (2,2),
/// 1/8 -> (4,2), 1/16 -> (4,4).
inline SamplingPattern uniform_pattern(std::size_t L_h, std::size_t L_v, double r) {
  if (L_h == 0 || L_v == 0) throw ConfigError("uniform_pattern: empty array");
  if (!(r > 0.0) || r > 1.0 || !std::isfinite(r))
    throw UnsupportedRateError("sampling rate must lie in (0, 1], got " + std::to_string(r));
  const double inv = 1.0 / r;
  const auto n = static_cast<std::size_t>(std::llround(inv));
  if (n == 0 || std::abs(inv - static_cast<double>(n)) > 1e-9 * inv)
    throw UnsupportedRateError("sampling rate " + std::to_string(r) +
                               " is not the reciprocal of an integer");
  struct Cand { std::size_t sh, sv; };
  std::vector<Cand> cands;
  for (std::size_t sv = 1; sv <= n; ++sv)
    if (n % sv == 0) {
      const std::size_t sh = n / sv;
      if (L_h % sh == 0 && L_v % sv == 0) cands.push_back({sh, sv});
    }
  if (cands.empty())
    throw UnsupportedRateError("sampling rate 1/" + std::to_string(n) +
                               " is not realisable by integer strides on a " +
                               std::to_string(L_v) + "x" + std::to_string(L_h) + " array");
  auto key = [](const Cand& c) {
    const std::size_t gap = c.sh > c.sv ? c.sh - c.sv : c.sv - c.sh;
    return std::pair{gap, c.sh >= c.sv ? 0 : 1};
  };
  const Cand best = *std::min_element(cands.begin(), cands.end(),
                                      [&](const Cand& a, const Cand& b) { return key(a) < key(b); });
  SamplingPattern p = make_pattern(L_h, L_v, best.sh, best.sv);
  p.rate = r;
  return p;
}

// ---------------------------------------------------------------------------
// Scenario synthesis
// ---------------------------------------------------------------------------

/// Distributions of the synthetic multipath draw. Gains are CN(0, 1/P) per
/// link; everything else is uniform on the given interval.
struct SynthParams {
  double delay_max_symbols = 1.0 / 8.0;  // delays on [0, delay_max_symbols * K * T_s]
  double azimuth_min = -std::numbers::pi / 2, azimuth_max = std::numbers::pi / 2;
  double elevation_min = std::numbers::pi / 4, elevation_max = 3 * std::numbers::pi / 4;
  double departure_min = -std::numbers::pi / 2, departure_max = std::numbers::pi / 2;

  friend bool operator==(const SynthParams&, const SynthParams&) = default;
};

inline ScenarioParams sample_scenario(const SystemConfig& c, const SynthParams& sp,
                                      std::mt19937_64& rng) {
  auto draw_link = [&](std::size_t P, bool bs_side) {
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / static_cast<double>(P)));
    std::uniform_real_distribution<double> delay(0.0,
                                                 sp.delay_max_symbols * static_cast<double>(c.K) * c.T_s());
    std::uniform_real_distribution<double> az(sp.azimuth_min, sp.azimuth_max);
    std::uniform_real_distribution<double> el(sp.elevation_min, sp.elevation_max);
    std::uniform_real_distribution<double> dep(sp.departure_min, sp.departure_max);
    std::vector<PathParams> paths(P);
    for (PathParams& p : paths) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      p.gain = {re, im};
      p.delay = delay(rng);
      p.azimuth = az(rng);
      p.elevation = el(rng);
      p.departure_angle = bs_side ? dep(rng) : 0.0;
    }
    return paths;
  };
  ScenarioParams s;
  s.bs_ris_paths = draw_link(c.P_h, true);
  s.ris_user_paths = draw_link(c.P_g, false);
  return s;
}

/// Scenario `index` of the family seeded by `base_seed`.
inline ScenarioParams scenario_at(const SystemConfig& c, const SynthParams& sp,
                                  std::uint64_t base_seed, std::uint64_t index) {
  auto rng = make_stream(base_seed, index);
  return sample_scenario(c, sp, rng);
}

// ---------------------------------------------------------------------------
// Training pairs
// ---------------------------------------------------------------------------

/// Network input / label, each [M*L, K, 2] with the real part in plane 0.
struct SamplePair {
  Tensor z_in;
  Tensor z_ta;
  std::uint64_t scenario_id = 0;
};

inline Tensor channel_to_tensor(const CascadedChannel& C, double scale) {
  const std::size_t R = C.data.rows, K = C.data.cols;
  Tensor t({R, K, 2});
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t k = 0; k < K; ++k) {
      const cplx v = C.data(r, k);
      t[(r * K + k) * 2] = v.real() * scale;
      t[(r * K + k) * 2 + 1] = v.imag() * scale;
    }
  return t;
}

/// Copy of a [M*L, K, 2] tensor with the rows of non-selected RIS elements
/// zeroed in every antenna block; optional white noise on surviving entries.
inline Tensor masked_input(const Tensor& z, const SamplingPattern& pattern, double noise_std,
                           std::mt19937_64* noise_rng) {
  if (z.rank() != 3 || z.dim(0) % pattern.L() != 0)
    throw std::invalid_argument("masked_input: tensor " + shape_str(z.shape()) +
                                " is not [M*L, K, 2] for L = " + std::to_string(pattern.L()));
  if (noise_std < 0.0) throw std::invalid_argument("masked_input: noise_std must be >= 0");
  const std::size_t L = pattern.L();
  const std::size_t row_len = z.dim(1) * z.dim(2);
  Tensor out(z.shape());
  std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
  for (std::size_t r = 0; r < z.dim(0); ++r) {
    if (!pattern.on(r % L)) continue;
    for (std::size_t i = r * row_len; i < (r + 1) * row_len; ++i) {
      out[i] = z[i];
      if (noise_std > 0.0 && noise_rng != nullptr) out[i] += noise(*noise_rng);
    }
  }
  return out;
}

/// Label from `C`, input from the masked `C` (noise_std > 0 requires a stream).
inline SamplePair build_pair(const CascadedChannel& C, const SamplingPattern& pattern, double scale,
                             double noise_std = 0.0, std::mt19937_64* noise_rng = nullptr) {
  if (C.config.L() != pattern.L())
    throw std::invalid_argument("build_pair: pattern has " + std::to_string(pattern.L()) +
                                " elements, channel has " + std::to_string(C.config.L()));
  if (!(scale > 0.0)) throw std::invalid_argument("build_pair: scale must be > 0");
  if (noise_std > 0.0 && noise_rng == nullptr)
    throw std::invalid_argument("build_pair: noise requested without a random stream");
  SamplePair p;
  p.z_ta = channel_to_tensor(C, scale);
  p.z_in = masked_input(p.z_ta, pattern, noise_std, noise_rng);
  return p;
}

/// 1 / RMS(|C|) over every entry of every channel.
inline double compute_scale(const std::vector<CascadedChannel>& channels) {
  if (channels.empty()) throw DegenerateDataError("compute_scale: empty training set");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : channels) {
    for (const cplx& v : c.data.data) sum += std::norm(v);
    n += c.data.data.size();
  }
  if (!(sum > 0.0)) throw DegenerateDataError("compute_scale: training channels are all zero");
  return 1.0 / std::sqrt(sum / static_cast<double>(n));
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Random train/test partition of 0..n-1 in proportion train_parts:test_parts;
/// the train side gets ceil(n * train_parts / total).
inline SplitIndices split(std::size_t n, std::mt19937_64& rng, std::size_t train_parts = 4,
                          std::size_t test_parts = 1) {
  const std::size_t total = train_parts + test_parts;
  if (total == 0) throw ConfigError("split: empty ratio");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n_train = (n * train_parts + total - 1) / total;
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return s;
}

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

/// Everything needed to regenerate a dataset.
struct DatasetSpec {
  SystemConfig config{};
  double rate = 0.25;
  std::size_t samples = 500;
  std::size_t train_parts = 4;
  std::size_t test_parts = 1;
  std::uint64_t base_seed = 1;
  double noise_std = 0.0;
  std::uint64_t noise_seed = 0;
  /// Labels are evaluated at f_c + label_offset_hz; inputs always at f_c.
  double label_offset_hz = 0.0;
  SynthParams synth{};

  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct DatasetManifest {
  static constexpr int kVersion = 1;
  DatasetSpec spec;
  SamplingPattern pattern;
  double scale = 1.0;
  std::vector<std::uint64_t> train_ids;
  std::vector<std::uint64_t> test_ids;

  std::size_t train_count() const { return train_ids.size(); }
  std::size_t test_count() const { return test_ids.size(); }
  std::size_t sample_values() const { return spec.config.M * spec.config.L() * spec.config.K * 2; }
  /// Inputs are stored explicitly when they cannot be rebuilt from labels.
  bool stores_inputs() const { return spec.label_offset_hz != 0.0; }
  std::uint64_t payload_bytes() const {
    const std::uint64_t n = train_count() + test_count();
    return n * sample_values() * sizeof(double) * (stores_inputs() ? 2 : 1) + pattern.L();
  }
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SamplePair> train;
  std::vector<SamplePair> test;
};

inline nlohmann::json to_json(const SystemConfig& c) {
  return {{"M", c.M},       {"L_h", c.L_h},
          {"L_v", c.L_v},   {"K", c.K},
          {"f_c", c.f_c},   {"bandwidth", c.bandwidth},
          {"d_over_lambda", c.d_over_lambda}, {"P_h", c.P_h},
          {"P_g", c.P_g}};
}

inline SystemConfig system_config_from_json(const nlohmann::json& j) {
  SystemConfig c;
  c.M = j.at("M");
  c.L_h = j.at("L_h");
  c.L_v = j.at("L_v");
  c.K = j.at("K");
  c.f_c = j.at("f_c");
  c.bandwidth = j.at("bandwidth");
  c.d_over_lambda = j.at("d_over_lambda");
  c.P_h = j.at("P_h");
  c.P_g = j.at("P_g");
  return c;
}

inline nlohmann::json to_json(const SynthParams& s) {
  return {{"gain", "CN(0,1/P)"},
          {"delay_max_symbols", s.delay_max_symbols},
          {"azimuth", {s.azimuth_min, s.azimuth_max}},
          {"elevation", {s.elevation_min, s.elevation_max}},
          {"departure", {s.departure_min, s.departure_max}}};
}

inline SynthParams synth_from_json(const nlohmann::json& j) {
  SynthParams s;
  s.delay_max_symbols = j.at("delay_max_symbols");
  s.azimuth_min = j.at("azimuth").at(0);
  s.azimuth_max = j.at("azimuth").at(1);
  s.elevation_min = j.at("elevation").at(0);
  s.elevation_max = j.at("elevation").at(1);
  s.departure_min = j.at("departure").at(0);
  s.departure_max = j.at("departure").at(1);
  return s;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  const auto& s = m.spec;
  std::vector<int> mask(m.pattern.mask.begin(), m.pattern.mask.end());
  nlohmann::json payloads = nlohmann::json::array({"z_ta"});
  if (m.stores_inputs()) payloads.push_back("z_in");
  payloads.push_back("mask");
  return {{"format", "RISEXT01"},
          {"version", DatasetManifest::kVersion},
          {"dtype", "f64"},
          {"layout", "row-major ML×K×2"},
          {"payloads", payloads},
          {"config", to_json(s.config)},
          {"pattern",
           {{"rate", m.pattern.rate},
            {"stride_h", m.pattern.stride_h},
            {"stride_v", m.pattern.stride_v},
            {"selected", m.pattern.selected()}}},
          {"scale", m.scale},
          {"base_seed", s.base_seed},
          {"noise_std", s.noise_std},
          {"noise_seed", s.noise_seed},
          {"label_offset_hz", s.label_offset_hz},
          {"ratio", {s.train_parts, s.test_parts}},
          {"counts", {{"samples", s.samples}, {"train", m.train_count()}, {"test", m.test_count()}}},
          {"synth", to_json(s.synth)},
          {"train_ids", m.train_ids},
          {"test_ids", m.test_ids}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  if (j.at("version").get<int>() != DatasetManifest::kVersion)
    throw FormatError("dataset: unsupported version " + j.at("version").dump());
  if (j.at("dtype") != "f64") throw FormatError("dataset: unsupported dtype");
  DatasetManifest m;
  auto& s = m.spec;
  s.config = system_config_from_json(j.at("config"));
  s.config.validate();
  s.rate = j.at("pattern").at("rate");
  s.base_seed = j.at("base_seed");
  s.noise_std = j.at("noise_std");
  s.noise_seed = j.at("noise_seed");
  s.label_offset_hz = j.at("label_offset_hz");
  s.train_parts = j.at("ratio").at(0);
  s.test_parts = j.at("ratio").at(1);
  s.samples = j.at("counts").at("samples");
  s.synth = synth_from_json(j.at("synth"));
  m.scale = j.at("scale");
  m.train_ids = j.at("train_ids").get<std::vector<std::uint64_t>>();
  m.test_ids = j.at("test_ids").get<std::vector<std::uint64_t>>();
  m.pattern = make_pattern(s.config.L_h, s.config.L_v, j.at("pattern").at("stride_h"),
                           j.at("pattern").at("stride_v"));
  m.pattern.rate = s.rate;
  if (m.train_count() + m.test_count() != s.samples)
    throw FormatError("dataset: sample counts do not add up");
  if (!(m.scale > 0.0)) throw FormatError("dataset: scale must be > 0");
  return m;
}

/// Labels are scale * C(f_c + label_offset); inputs are masked scale * C(f_c).
inline Dataset generate_dataset(const DatasetSpec& spec, std::size_t jobs = 1) {
  spec.config.validate();
  if (spec.samples == 0) throw ConfigError("dataset: samples must be >= 1");
  if (spec.noise_std < 0.0) throw ConfigError("dataset: noise_std must be >= 0");
  Dataset ds;
  auto& m = ds.manifest;
  m.spec = spec;
  m.pattern = uniform_pattern(spec.config.L_h, spec.config.L_v, spec.rate);

  const SystemConfig label_cfg =
      spec.label_offset_hz != 0.0 ? shifted_carrier(spec.config, spec.label_offset_hz) : spec.config;
  std::vector<CascadedChannel> inputs(spec.samples), labels(spec.samples);
  parallel_for(spec.samples, jobs, [&](std::size_t i) {
    const ScenarioParams s = scenario_at(spec.config, spec.synth, spec.base_seed, i);
    labels[i] = assemble_cascaded(label_cfg, s);
    if (spec.label_offset_hz != 0.0) inputs[i] = assemble_cascaded(spec.config, s);
  });

  auto rng = make_stream(spec.base_seed, kSplitStream);
  const SplitIndices parts = split(spec.samples, rng, spec.train_parts, spec.test_parts);
  m.train_ids.assign(parts.train.begin(), parts.train.end());
  m.test_ids.assign(parts.test.begin(), parts.test.end());

  std::vector<CascadedChannel> train_labels;
  for (auto id : m.train_ids) train_labels.push_back(labels[id]);
  m.scale = compute_scale(train_labels);

  auto make = [&](std::uint64_t id) {
    auto noise_rng = make_stream(spec.noise_seed, id);
    SamplePair p;
    p.scenario_id = id;
    p.z_ta = channel_to_tensor(labels[id], m.scale);
    if (spec.label_offset_hz != 0.0) {
      const Tensor raw = channel_to_tensor(inputs[id], m.scale);
      p.z_in = masked_input(raw, m.pattern, spec.noise_std, &noise_rng);
    } else {
      p.z_in = masked_input(p.z_ta, m.pattern, spec.noise_std, &noise_rng);
    }
    return p;
  };
  for (auto id : m.train_ids) ds.train.push_back(make(id));
  for (auto id : m.test_ids) ds.test.push_back(make(id));
  return ds;
}

inline void save_dataset(const std::string& path, const Dataset& ds) {
  const auto& m = ds.manifest;
  auto os = io::open_out(path);
  io::write_header(os, "RISEXT01", to_json(m).dump());
  for (const auto* part : {&ds.train, &ds.test})
    for (const auto& p : *part) io::write_doubles(os, p.z_ta.values());
  if (m.stores_inputs())
    for (const auto* part : {&ds.train, &ds.test})
      for (const auto& p : *part) io::write_doubles(os, p.z_in.values());
  os.write(reinterpret_cast<const char*>(m.pattern.mask.data()),
           static_cast<std::streamsize>(m.pattern.mask.size()));
  if (!os) throw IoError("save_dataset: write to '" + path + "' failed");
}

namespace detail {
inline DatasetManifest read_dataset_manifest(std::istream& is, const std::string& path) {
  const std::string text = io::read_header(is, "RISEXT01", "dataset");
  DatasetManifest m;
  try {
    m = manifest_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset '" + path + "': bad manifest: " + e.what());
  }
  if (io::remaining_bytes(is) != m.payload_bytes())
    throw FormatError("dataset '" + path + "': payload is " +
                      std::to_string(io::remaining_bytes(is)) + " bytes, manifest declares " +
                      std::to_string(m.payload_bytes()));
  return m;
}
}  // namespace detail

/// Reads and validates the header only; tensors are not loaded.
inline DatasetManifest load_manifest(const std::string& path) {
  auto is = io::open_in(path);
  return detail::read_dataset_manifest(is, path);
}

inline Dataset load_dataset(const std::string& path) {
  auto is = io::open_in(path);
  Dataset ds;
  ds.manifest = detail::read_dataset_manifest(is, path);
  const auto& m = ds.manifest;
  const auto& c = m.spec.config;
  const Shape shape{c.M * c.L(), c.K, 2};
  auto read_part = [&](const std::vector<std::uint64_t>& ids, std::vector<SamplePair>& out) {
    for (auto id : ids) {
      SamplePair p;
      p.scenario_id = id;
      p.z_ta = Tensor(shape);
      io::read_doubles(is, p.z_ta.values(), "dataset");
      out.push_back(std::move(p));
    }
  };
  read_part(m.train_ids, ds.train);
  read_part(m.test_ids, ds.test);
  if (m.stores_inputs()) {
    for (auto* part : {&ds.train, &ds.test})
      for (auto& p : *part) {
        p.z_in = Tensor(shape);
        io::read_doubles(is, p.z_in.values(), "dataset");
      }
  }
  std::vector<std::uint8_t> mask(m.pattern.L());
  if (!is.read(reinterpret_cast<char*>(mask.data()), static_cast<std::streamsize>(mask.size())))
    throw FormatError("dataset: truncated mask");
  if (mask != m.pattern.mask) throw FormatError("dataset: stored mask disagrees with manifest strides");
  if (!m.stores_inputs()) {
    for (auto* part : {&ds.train, &ds.test})
      for (auto& p : *part) {
        auto noise_rng = make_stream(m.spec.noise_seed, p.scenario_id);
        p.z_in = masked_input(p.z_ta, m.pattern, m.spec.noise_std, &noise_rng);
      }
  }
  return ds;
}

inline std::string manifest_csv_header() {
  return "M,L_h,L_v,K,f_c,bandwidth,d_over_lambda,P_h,P_g,rate,stride_h,stride_v,selected,"
         "samples,train,test,scale,base_seed,noise_std,label_offset_hz";
}

inline std::string manifest_csv_row(const DatasetManifest& m) {
  const auto& s = m.spec;
  const auto& c = s.config;
  std::ostringstream os;
  os.precision(17);
  os << c.M << ',' << c.L_h << ',' << c.L_v << ',' << c.K << ',' << c.f_c << ',' << c.bandwidth
     << ',' << c.d_over_lambda << ',' << c.P_h << ',' << c.P_g << ',' << m.pattern.rate << ','
     << m.pattern.stride_h << ',' << m.pattern.stride_v << ',' << m.pattern.selected() << ','
     << s.samples << ',' << m.train_count() << ',' << m.test_count() << ',' << m.scale << ','
     << s.base_seed << ',' << s.noise_std << ',' << s.label_offset_hz;
  return os.str();
}

}  // namespace risext
