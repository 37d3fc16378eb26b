// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "risext/dataset.hpp"
#include "risext/errors.hpp"
#include "risext/network.hpp"
#include "risext/rng.hpp"
#include "risext/training.hpp"

namespace risext {

/// Grid of a sweep or frequency-gap study.
struct SweepConfig {
  std::vector<BlockKind> archs{BlockKind::rk3, BlockKind::lf, BlockKind::euler,
                               BlockKind::cascaded};
  std::vector<double> rates{0.5, 0.25, 0.125};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> gaps_hz{0.0, 5e6, 10e6, 20e6};

  friend bool operator==(const SweepConfig&, const SweepConfig&) = default;
};

/// Everything one command needs. Defaults are the desk-scale task.
struct ExperimentConfig {
  DatasetSpec dataset;
  ModelSpec model;
  TrainingConfig training;
  SweepConfig sweep;

  ExperimentConfig() {
    dataset.config.M = 2;
    dataset.config.L_h = 4;
    dataset.config.L_v = 4;
    dataset.config.K = 16;
    dataset.samples = 500;
    dataset.rate = 0.25;
    model.channels = 16;
    model.blocks = 1;
  }

  void validate() const {
    try {
      dataset.config.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (dataset.samples < 2) throw ConfigError("dataset: samples must be >= 2");
    if (dataset.train_parts < 1 || dataset.test_parts < 1)
      throw ConfigError("dataset: train_parts and test_parts must be >= 1");
    if (dataset.noise_std < 0.0) throw ConfigError("dataset: noise_std must be >= 0");
    try {
      model.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    training.validate();
    if (sweep.archs.empty() || sweep.rates.empty() || sweep.seeds.empty() || sweep.gaps_hz.empty())
      throw ConfigError("sweep: lists must not be empty");
  }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Copy of `c` with every seed derived from the run seed `s`: the dataset uses
/// base_seed = noise_seed = s, training shuffles with s and the model is
/// initialised from mix64(s, kInitStream).
inline ExperimentConfig with_seed(ExperimentConfig c, std::uint64_t s) {
  c.dataset.base_seed = s;
  c.dataset.noise_seed = s;
  c.training.seed = s;
  return c;
}

inline std::uint64_t init_seed(const TrainingConfig& t) { return mix64(t.seed, kInitStream); }

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: " + key + " = '" + v + "' is not a valid number");
  return out;
}

inline std::size_t parse_count(const std::string& key, const std::string& v) {
  if (!v.empty() && v[0] == '-') throw ConfigError("config: " + key + " must be non-negative");
  return parse_number<std::size_t>(key, v);
}

/// Accepts decimals and simple fractions such as 1/4.
inline double parse_ratio(const std::string& key, const std::string& v) {
  const auto slash = v.find('/');
  if (slash == std::string::npos) return parse_number<double>(key, v);
  const double num = parse_number<double>(key, trim(v.substr(0, slash)));
  const double den = parse_number<double>(key, trim(v.substr(slash + 1)));
  if (den == 0.0) throw ConfigError("config: " + key + " has a zero denominator");
  return num / den;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + " = '" + v + "' is not a boolean");
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
  return out;
}

}  // namespace detail

/// Applies one `section.key = value` assignment.
inline void set_config_value(ExperimentConfig& c, const std::string& section,
                             const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string k = section + "." + key;
  auto& sys = c.dataset.config;
  auto& ds = c.dataset;
  auto& m = c.model;
  auto& t = c.training;
  auto& sw = c.sweep;
  if (section == "system") {
    if (key == "M") sys.M = parse_count(k, value);
    else if (key == "L_h") sys.L_h = parse_count(k, value);
    else if (key == "L_v") sys.L_v = parse_count(k, value);
    else if (key == "K") sys.K = parse_count(k, value);
    else if (key == "f_c") sys.f_c = parse_number<double>(k, value);
    else if (key == "bandwidth") sys.bandwidth = parse_number<double>(k, value);
    else if (key == "d_over_lambda") sys.d_over_lambda = parse_number<double>(k, value);
    else if (key == "P_h") sys.P_h = parse_count(k, value);
    else if (key == "P_g") sys.P_g = parse_count(k, value);
    else throw ConfigError("config: unknown key " + k);
  } else if (section == "dataset") {
    if (key == "rate") ds.rate = parse_ratio(k, value);
    else if (key == "samples") ds.samples = parse_count(k, value);
    else if (key == "train_parts") ds.train_parts = parse_count(k, value);
    else if (key == "test_parts") ds.test_parts = parse_count(k, value);
    else if (key == "seed") ds.base_seed = parse_number<std::uint64_t>(k, value);
    else if (key == "noise_std") ds.noise_std = parse_number<double>(k, value);
    else if (key == "noise_seed") ds.noise_seed = parse_number<std::uint64_t>(k, value);
    else if (key == "label_offset_hz") ds.label_offset_hz = parse_number<double>(k, value);
    else if (key == "delay_max_symbols") ds.synth.delay_max_symbols = parse_ratio(k, value);
    else throw ConfigError("config: unknown key " + k);
  } else if (section == "model") {
    if (key == "arch") {
      try {
        m.arch = parse_block_kind(value);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    } else if (key == "channels") m.channels = parse_count(k, value);
    else if (key == "blocks") m.blocks = parse_count(k, value);
    else if (key == "head_kernel") m.head_kernel = parse_count(k, value);
    else if (key == "tail_kernel") m.tail_kernel = parse_count(k, value);
    else if (key == "share_rk3_stages") m.share_rk3_stages = parse_bool(k, value);
    else throw ConfigError("config: unknown key " + k);
  } else if (section == "training") {
    if (key == "batch_size") t.batch_size = parse_count(k, value);
    else if (key == "epochs") t.epochs = parse_count(k, value);
    else if (key == "lr") t.lr = parse_number<double>(k, value);
    else if (key == "warm_epochs") t.warm_epochs = parse_count(k, value);
    else if (key == "decay") t.decay = parse_number<double>(k, value);
    else if (key == "decay_period") t.decay_period = parse_count(k, value);
    else if (key == "seed") t.seed = parse_number<std::uint64_t>(k, value);
    else if (key == "shuffle") t.shuffle = parse_bool(k, value);
    else throw ConfigError("config: unknown key " + k);
  } else if (section == "sweep") {
    const auto items = split_list(value);
    if (key == "archs") {
      sw.archs.clear();
      for (const auto& a : items) {
        try {
          sw.archs.push_back(parse_block_kind(a));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
      }
    } else if (key == "rates") {
      sw.rates.clear();
      for (const auto& r : items) sw.rates.push_back(parse_ratio(k, r));
    } else if (key == "seeds") {
      sw.seeds.clear();
      for (const auto& s : items) sw.seeds.push_back(parse_number<std::uint64_t>(k, s));
    } else if (key == "gaps_hz") {
      sw.gaps_hz.clear();
      for (const auto& g : items) sw.gaps_hz.push_back(parse_number<double>(k, g));
    } else {
      throw ConfigError("config: unknown key " + k);
    }
  } else {
    throw ConfigError("config: unknown section [" + section + "]");
  }
}

/// Parses `[section]` headers and `key = value` lines; `#` and `;` start
/// comments. Every key is optional; unknown sections and keys are errors.
inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config: " + where + "unterminated section header");
      section = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config: " + where + "expected key = value");
    if (section.empty()) throw ConfigError("config: " + where + "key outside of a section");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    try {
      set_config_value(c, section, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Fully resolved config in the same format parse_config reads.
inline std::string to_config_text(const ExperimentConfig& c) {
  using detail::fmt;
  const auto& sys = c.dataset.config;
  const auto& ds = c.dataset;
  const auto& m = c.model;
  const auto& t = c.training;
  std::vector<std::string> archs, rates, seeds, gaps;
  for (auto a : c.sweep.archs) archs.emplace_back(to_string(a));
  for (auto r : c.sweep.rates) rates.push_back(fmt(r));
  for (auto s : c.sweep.seeds) seeds.push_back(std::to_string(s));
  for (auto g : c.sweep.gaps_hz) gaps.push_back(fmt(g));
  std::ostringstream os;
  os << "[system]\n"
     << "M = " << sys.M << "\nL_h = " << sys.L_h << "\nL_v = " << sys.L_v << "\nK = " << sys.K
     << "\nf_c = " << fmt(sys.f_c) << "\nbandwidth = " << fmt(sys.bandwidth)
     << "\nd_over_lambda = " << fmt(sys.d_over_lambda) << "\nP_h = " << sys.P_h
     << "\nP_g = " << sys.P_g << "\n\n[dataset]\n"
     << "rate = " << fmt(ds.rate) << "\nsamples = " << ds.samples
     << "\ntrain_parts = " << ds.train_parts << "\ntest_parts = " << ds.test_parts
     << "\nseed = " << ds.base_seed << "\nnoise_std = " << fmt(ds.noise_std)
     << "\nnoise_seed = " << ds.noise_seed << "\nlabel_offset_hz = " << fmt(ds.label_offset_hz)
     << "\ndelay_max_symbols = " << fmt(ds.synth.delay_max_symbols) << "\n\n[model]\n"
     << "arch = " << to_string(m.arch) << "\nchannels = " << m.channels
     << "\nblocks = " << m.blocks << "\nhead_kernel = " << m.head_kernel
     << "\ntail_kernel = " << m.tail_kernel
     << "\nshare_rk3_stages = " << (m.share_rk3_stages ? "true" : "false") << "\n\n[training]\n"
     << "batch_size = " << t.batch_size << "\nepochs = " << t.epochs << "\nlr = " << fmt(t.lr)
     << "\nwarm_epochs = " << t.warm_epochs << "\ndecay = " << fmt(t.decay)
     << "\ndecay_period = " << t.decay_period << "\nseed = " << t.seed
     << "\nshuffle = " << (t.shuffle ? "true" : "false") << "\n\n[sweep]\n"
     << "archs = " << detail::join(archs) << "\nrates = " << detail::join(rates)
     << "\nseeds = " << detail::join(seeds) << "\ngaps_hz = " << detail::join(gaps) << "\n";
  return os.str();
}

}  // namespace risext
