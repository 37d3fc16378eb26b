// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "risext/dataset.hpp"

namespace risext {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "risext_dataset_test";
  fs::create_directories(dir);
  return dir / name;
}

DatasetSpec tiny_spec() {
  DatasetSpec s;
  s.config.M = 2;
  s.config.L_h = 4;
  s.config.L_v = 4;
  s.config.K = 8;
  s.config.P_h = 3;
  s.config.P_g = 3;
  s.samples = 25;
  s.rate = 0.25;
  s.base_seed = 11;
  return s;
}

TEST(UniformPattern, QuarterOnFourByFour) {
  const SamplingPattern p = uniform_pattern(4, 4, 0.25);
  EXPECT_EQ(p.stride_h, 2u);
  EXPECT_EQ(p.stride_v, 2u);
  EXPECT_EQ(p.selected(), 4u);
  const std::set<std::size_t> expected{0, 2, 8, 10};
  for (std::size_t l = 0; l < 16; ++l) EXPECT_EQ(p.on(l), expected.count(l) == 1) << l;
}

TEST(UniformPattern, HalfOnEightByEight) {
  const SamplingPattern p = uniform_pattern(8, 8, 0.5);
  EXPECT_EQ(p.stride_h, 2u);
  EXPECT_EQ(p.stride_v, 1u);
  EXPECT_EQ(p.selected(), 32u);
}

TEST(UniformPattern, MaskMatchesBruteForceGrid) {
  for (double r : {1.0, 0.5, 0.25, 0.125, 1.0 / 16}) {
    const SamplingPattern p = uniform_pattern(8, 8, r);
    std::size_t count = 0;
    for (std::size_t v = 0; v < 8; ++v)
      for (std::size_t h = 0; h < 8; ++h) {
        const bool want = h % p.stride_h == 0 && v % p.stride_v == 0;
        EXPECT_EQ(p.on(v * 8 + h), want);
        count += want;
      }
    EXPECT_EQ(p.stride_h * p.stride_v, static_cast<std::size_t>(std::llround(1 / r)));
    EXPECT_EQ(count, static_cast<std::size_t>(std::llround(64 * r)));
    EXPECT_EQ(p.selected(), count);
  }
}

TEST(UniformPattern, BalancedStridesPreferHorizontal) {
  EXPECT_EQ(uniform_pattern(8, 8, 0.125).stride_h, 4u);
  EXPECT_EQ(uniform_pattern(8, 8, 0.125).stride_v, 2u);
  EXPECT_EQ(uniform_pattern(8, 8, 1.0 / 16).stride_h, 4u);
  EXPECT_EQ(uniform_pattern(8, 8, 1.0 / 16).stride_v, 4u);
}

TEST(UniformPattern, RejectsUnrealisableRates) {
  EXPECT_THROW(uniform_pattern(4, 4, 0.3), UnsupportedRateError);
  EXPECT_THROW(uniform_pattern(4, 4, 0.0), UnsupportedRateError);
  EXPECT_THROW(uniform_pattern(4, 4, 1.5), UnsupportedRateError);
  EXPECT_THROW(uniform_pattern(4, 4, 1.0 / 3), UnsupportedRateError);
  EXPECT_THROW(uniform_pattern(4, 4, 1.0 / 32), UnsupportedRateError);
  EXPECT_THROW(make_pattern(4, 4, 3, 1), UnsupportedRateError);
}

TEST(Split, FullSizeIsEightyTwenty) {
  std::mt19937_64 rng(1);
  const SplitIndices s = split(20100, rng);
  EXPECT_EQ(s.train.size(), 16080u);
  EXPECT_EQ(s.test.size(), 4020u);
}

TEST(Split, CeilingGoesToTrain) {
  std::mt19937_64 rng(1);
  const SplitIndices s = split(5, rng);
  EXPECT_EQ(s.train.size(), 4u);
  EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, DisjointCoverAndSeedDependent) {
  std::mt19937_64 a(3), b(3), c(4);
  const SplitIndices sa = split(101, a), sb = split(101, b), sc = split(101, c);
  EXPECT_EQ(sa.train, sb.train);
  EXPECT_NE(sa.train, sc.train);
  std::vector<std::size_t> all = sa.train;
  all.insert(all.end(), sa.test.begin(), sa.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
}

TEST(SampleScenario, GainPowerIsOneOverP) {
  SystemConfig c;
  c.P_h = 5;
  c.P_g = 4;
  std::mt19937_64 rng(5);
  double ph = 0.0, pg = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const ScenarioParams s = sample_scenario(c, {}, rng);
    for (const auto& p : s.bs_ris_paths) ph += std::norm(p.gain);
    for (const auto& p : s.ris_user_paths) pg += std::norm(p.gain);
  }
  EXPECT_NEAR(ph / (n * 5.0), 1.0 / 5, 0.05 / 5);
  EXPECT_NEAR(pg / (n * 4.0), 1.0 / 4, 0.05 / 4);
}

TEST(SampleScenario, DrawsStayInRanges) {
  SystemConfig c;
  const SynthParams sp;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const ScenarioParams s = scenario_at(c, sp, 3, i);
    ASSERT_EQ(s.bs_ris_paths.size(), c.P_h);
    ASSERT_EQ(s.ris_user_paths.size(), c.P_g);
    for (const auto* list : {&s.bs_ris_paths, &s.ris_user_paths})
      for (const auto& p : *list) {
        EXPECT_GE(p.delay, 0.0);
        EXPECT_LE(p.delay, sp.delay_max_symbols * c.K * c.T_s());
        EXPECT_GE(p.azimuth, sp.azimuth_min);
        EXPECT_LE(p.azimuth, sp.azimuth_max);
        EXPECT_GE(p.elevation, sp.elevation_min);
        EXPECT_LE(p.elevation, sp.elevation_max);
      }
    for (const auto& p : s.ris_user_paths) EXPECT_EQ(p.departure_angle, 0.0);
  }
}

TEST(SampleScenario, IndexedStreamsIndependentOfOrder) {
  SystemConfig c;
  const ScenarioParams a = scenario_at(c, {}, 9, 7);
  (void)scenario_at(c, {}, 9, 3);
  EXPECT_EQ(scenario_at(c, {}, 9, 7), a);
  EXPECT_NE(scenario_at(c, {}, 9, 8), a);
  EXPECT_NE(scenario_at(c, {}, 10, 7), a);
}

CascadedChannel constant_channel(double magnitude) {
  SystemConfig c;
  c.M = 1;
  c.L_h = 2;
  c.L_v = 1;
  c.K = 3;
  CascadedChannel C{c, CMatrix(2, 3)};
  for (std::size_t i = 0; i < C.data.data.size(); ++i)
    C.data.data[i] = std::polar(magnitude, 0.7 * static_cast<double>(i));
  return C;
}

TEST(ComputeScale, ConstantMagnitudeTwoGivesHalf) {
  EXPECT_NEAR(compute_scale({constant_channel(2.0), constant_channel(2.0)}), 0.5, 1e-15);
}

TEST(ComputeScale, RmsOverAllEntries) {
  // entries of magnitude 1 and 3 in equal numbers: RMS = sqrt(5)
  EXPECT_NEAR(compute_scale({constant_channel(1.0), constant_channel(3.0)}), 1 / std::sqrt(5.0),
              1e-15);
}

TEST(ComputeScale, Degenerate) {
  EXPECT_THROW(compute_scale({}), DegenerateDataError);
  EXPECT_THROW(compute_scale({constant_channel(0.0)}), DegenerateDataError);
}

TEST(BuildPair, LayoutAndMasking) {
  SystemConfig c;
  c.M = 2;
  c.L_h = 4;
  c.L_v = 2;
  c.K = 3;
  c.P_h = 2;
  c.P_g = 2;
  const CascadedChannel C = assemble_cascaded(c, scenario_at(c, {}, 1, 0));
  const SamplingPattern pat = uniform_pattern(4, 2, 0.5);
  const SamplePair p = build_pair(C, pat, 2.0);
  ASSERT_EQ(p.z_ta.shape(), (Shape{16, 3, 2}));
  for (std::size_t m = 0; m < 2; ++m)
    for (std::size_t l = 0; l < 8; ++l)
      for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t r = m * 8 + l;
        const cplx v = C.data(r, k);
        EXPECT_EQ(p.z_ta[(r * 3 + k) * 2], 2.0 * v.real());
        EXPECT_EQ(p.z_ta[(r * 3 + k) * 2 + 1], 2.0 * v.imag());
        const bool on = (l % 4) % 2 == 0;
        EXPECT_EQ(p.z_in[(r * 3 + k) * 2], on ? 2.0 * v.real() : 0.0);
        EXPECT_EQ(p.z_in[(r * 3 + k) * 2 + 1], on ? 2.0 * v.imag() : 0.0);
      }
  EXPECT_THROW(build_pair(C, uniform_pattern(4, 4, 0.5), 1.0), std::invalid_argument);
  EXPECT_THROW(build_pair(C, pat, 1.0, 0.1, nullptr), std::invalid_argument);
}

TEST(BuildPair, NoiseOnlyOnSelectedEntries) {
  SystemConfig c;
  c.M = 1;
  c.L_h = 4;
  c.L_v = 4;
  c.K = 4;
  const CascadedChannel C = assemble_cascaded(c, scenario_at(c, {}, 2, 0));
  const SamplingPattern pat = uniform_pattern(4, 4, 0.25);
  std::mt19937_64 rng(3);
  const SamplePair p = build_pair(C, pat, 1.0, 0.1, &rng);
  double dev = 0.0;
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t i = r * 8; i < (r + 1) * 8; ++i) {
      if (!pat.on(r)) EXPECT_EQ(p.z_in[i], 0.0);
      else dev = std::max(dev, std::abs(p.z_in[i] - p.z_ta[i]));
    }
  EXPECT_GT(dev, 0.0);
}

TEST(GenerateDataset, CountsScaleAndUnitPower) {
  const Dataset ds = generate_dataset(tiny_spec());
  EXPECT_EQ(ds.train.size(), 20u);
  EXPECT_EQ(ds.test.size(), 5u);
  double p = 0.0;
  std::size_t n = 0;
  for (const auto& s : ds.train) {
    for (double v : s.z_ta.storage()) p += v * v;
    n += s.z_ta.size() / 2;
  }
  EXPECT_NEAR(p / static_cast<double>(n), 1.0, 1e-12);
}

TEST(GenerateDataset, LabelsRebuildFromScenarioIds) {
  const DatasetSpec spec = tiny_spec();
  const Dataset ds = generate_dataset(spec);
  for (const auto& s : ds.test) {
    const CascadedChannel C =
        assemble_cascaded(spec.config, scenario_at(spec.config, spec.synth, spec.base_seed, s.scenario_id));
    const Tensor t = channel_to_tensor(C, ds.manifest.scale);
    EXPECT_EQ(t.storage(), s.z_ta.storage());
  }
}

TEST(GenerateDataset, DeterministicAcrossJobCounts) {
  const Dataset a = generate_dataset(tiny_spec(), 1);
  const Dataset b = generate_dataset(tiny_spec(), 3);
  EXPECT_EQ(a.manifest.train_ids, b.manifest.train_ids);
  EXPECT_EQ(a.manifest.scale, b.manifest.scale);
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    EXPECT_EQ(a.train[i].z_ta.storage(), b.train[i].z_ta.storage());
    EXPECT_EQ(a.train[i].z_in.storage(), b.train[i].z_in.storage());
  }
}

TEST(GenerateDataset, FrequencyOffsetChangesLabelsOnly) {
  DatasetSpec spec = tiny_spec();
  const Dataset base = generate_dataset(spec);
  spec.label_offset_hz = 20e6;
  const Dataset off = generate_dataset(spec);
  EXPECT_EQ(base.manifest.train_ids, off.manifest.train_ids);
  // inputs are the masked f_c channel in both, up to the per-set scale
  const double ratio = off.manifest.scale / base.manifest.scale;
  for (std::size_t i = 0; i < base.train.size(); ++i) {
    for (std::size_t j = 0; j < base.train[i].z_in.size(); ++j)
      EXPECT_NEAR(off.train[i].z_in[j], base.train[i].z_in[j] * ratio, 1e-12);
  }
  EXPECT_NE(base.train[0].z_ta.storage(), off.train[0].z_ta.storage());
}

TEST(DatasetFile, RoundTripIsBitExact) {
  for (double offset : {0.0, 5e6}) {
    DatasetSpec spec = tiny_spec();
    spec.label_offset_hz = offset;
    spec.noise_std = 0.01;
    spec.noise_seed = 4;
    const Dataset ds = generate_dataset(spec);
    const fs::path f = temp_file("rt.bin");
    save_dataset(f.string(), ds);
    EXPECT_EQ(fs::file_size(f) > ds.manifest.payload_bytes(), true);
    const Dataset back = load_dataset(f.string());
    EXPECT_EQ(back.manifest.spec, spec);
    EXPECT_EQ(back.manifest.pattern, ds.manifest.pattern);
    EXPECT_EQ(back.manifest.scale, ds.manifest.scale);
    ASSERT_EQ(back.train.size(), ds.train.size());
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
      EXPECT_EQ(back.train[i].z_ta.storage(), ds.train[i].z_ta.storage());
      EXPECT_EQ(back.train[i].z_in.storage(), ds.train[i].z_in.storage());
    }
    EXPECT_EQ(load_manifest(f.string()).train_ids, ds.manifest.train_ids);
  }
}

TEST(DatasetFile, TruncatedAndCorruptFilesRejected) {
  const Dataset ds = generate_dataset(tiny_spec());
  const fs::path f = temp_file("bad.bin");
  save_dataset(f.string(), ds);
  const auto size = fs::file_size(f);
  fs::resize_file(f, size - 8);
  EXPECT_THROW(load_dataset(f.string()), FormatError);
  {
    std::ofstream os(f, std::ios::binary);
    os << "NOTMAGIC and some bytes";
  }
  EXPECT_THROW(load_dataset(f.string()), FormatError);
  EXPECT_THROW(load_dataset((f.parent_path() / "missing.bin").string()), IoError);
}

TEST(ManifestCsv, HeaderAndRowHaveSameArity) {
  const Dataset ds = generate_dataset(tiny_spec());
  const auto commas = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(commas(manifest_csv_header()), commas(manifest_csv_row(ds.manifest)));
}

}  // namespace
}  // namespace risext
