// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "risext/cli.hpp"

namespace risext {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "risext_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kTinyIni = R"(# small run
[system]
M = 1
L_h = 4
L_v = 4
K = 8
P_h = 3
P_g = 3

[dataset]
samples = 20
rate = 1/4

[model]
channels = 8
blocks = 1

[training]
epochs = 2
batch_size = 8

[sweep]
archs = rk3, cascaded
rates = 1/2, 1/4
seeds = 1
gaps_hz = 0, 10e6
)";

fs::path write_tiny_config(const fs::path& dir) {
  const fs::path p = dir / "tiny.ini";
  std::ofstream(p) << kTinyIni;
  return p;
}

TEST(Config, ParsesValuesAndFractions) {
  const ExperimentConfig c = parse_config(kTinyIni);
  EXPECT_EQ(c.dataset.config.M, 1u);
  EXPECT_EQ(c.dataset.rate, 0.25);
  EXPECT_EQ(c.sweep.rates, (std::vector<double>{0.5, 0.25}));
  EXPECT_EQ(c.sweep.archs, (std::vector<BlockKind>{BlockKind::rk3, BlockKind::cascaded}));
  EXPECT_EQ(c.sweep.gaps_hz, (std::vector<double>{0.0, 10e6}));
  EXPECT_EQ(c.training.epochs, 2u);
}

TEST(Config, TextRoundTripIsExact) {
  ExperimentConfig c = parse_config(kTinyIni);
  c.dataset.config.d_over_lambda = 0.1 + 0.2;
  c.training.lr = 3e-4 / 7;
  c.model.share_rk3_stages = true;
  EXPECT_EQ(parse_config(to_config_text(c)), c);
  EXPECT_EQ(parse_config(to_config_text(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, EmptyTextGivesDefaults) { EXPECT_EQ(parse_config(""), ExperimentConfig{}); }

TEST(Config, ErrorsAreConfigErrors) {
  EXPECT_THROW(parse_config("[system]\nQ = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[gpu]\nx = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("M = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[system]\nM 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[system]\nM = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("[training]\nlr = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("[model]\narch = transformer\n"), ConfigError);
  EXPECT_THROW(parse_config("[dataset]\nrate = 1/0\n"), ConfigError);
  EXPECT_THROW(parse_config("[sweep]\nseeds =\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/x.ini"), ConfigError);
  try {
    parse_config("[system]\n\nbogus = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Config, SeedDerivation) {
  const ExperimentConfig c = with_seed(ExperimentConfig{}, 42);
  EXPECT_EQ(c.dataset.base_seed, 42u);
  EXPECT_EQ(c.dataset.noise_seed, 42u);
  EXPECT_EQ(c.training.seed, 42u);
  EXPECT_EQ(init_seed(c.training), mix64(42, kInitStream));
}

TEST(ResolveConfig, OverridesNarrowTheGrid) {
  const fs::path dir = scratch("resolve");
  cli::Overrides o;
  o.seed = 5;
  o.arch = "lf";
  o.rate = 0.5;
  o.epochs = 9;
  const ExperimentConfig c = cli::resolve_config(write_tiny_config(dir).string(), o);
  EXPECT_EQ(c.sweep.seeds, (std::vector<std::uint64_t>{5}));
  EXPECT_EQ(c.sweep.archs, (std::vector<BlockKind>{BlockKind::lf}));
  EXPECT_EQ(c.sweep.rates, (std::vector<double>{0.5}));
  EXPECT_EQ(c.model.arch, BlockKind::lf);
  EXPECT_EQ(c.training.epochs, 9u);
  EXPECT_EQ(c.dataset.base_seed, 5u);
  o.arch = "nope";
  EXPECT_THROW(cli::resolve_config("", o), ConfigError);
}

TEST(Commands, GenDataThenTrainThenResume) {
  const fs::path dir = scratch("pipeline");
  ExperimentConfig cfg = parse_config(kTinyIni);
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_gen_data(cfg, (dir / "data").string(), log), 0);
  EXPECT_NE(log.str().find("16 train / 4 test"), std::string::npos) << log.str();
  for (const char* f : {"dataset.bin", "manifest.json", "config.ini"})
    EXPECT_TRUE(fs::exists(dir / "data" / f)) << f;
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "data" / "manifest.json")).at("counts").at("train"), 16);

  const std::string data = (dir / "data" / "dataset.bin").string();
  cfg.training.epochs = 3;
  ASSERT_EQ(cli::cmd_train(cfg, data, (dir / "full").string(), log), 0);
  for (const char* f : {"history.csv", "timing.csv", "model.risnet", "summary.json", "config.ini"})
    EXPECT_TRUE(fs::exists(dir / "full" / f)) << f;

  cfg.training.epochs = 2;
  ASSERT_EQ(cli::cmd_train(cfg, data, (dir / "part").string(), log), 0);
  cfg.training.epochs = 3;
  ASSERT_EQ(cli::cmd_train(cfg, data, (dir / "rest").string(), log,
                           (dir / "part" / "model.risnet").string()),
            0);
  const std::string full = slurp(dir / "full" / "history.csv");
  const std::string rest = slurp(dir / "rest" / "history.csv");
  const std::string last_full = full.substr(full.rfind('\n', full.size() - 2) + 1);
  EXPECT_EQ(rest.substr(rest.find('\n') + 1), last_full);
  EXPECT_EQ(load_checkpoint((dir / "rest" / "model.risnet").string()).second.epochs_completed, 3u);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "full" / "summary.json")).at("cells").at(0).at("nmse_db"),
            nlohmann::json::parse(slurp(dir / "rest" / "summary.json")).at("cells").at(0).at("nmse_db"));
}

TEST(Commands, DefaultDatasetSplitAndStableBytes) {
  const fs::path dir = scratch("defaults");
  const ExperimentConfig cfg;
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_gen_data(cfg, (dir / "a").string(), log, 2), 0);
  EXPECT_NE(log.str().find("500 samples (400 train / 100 test)"), std::string::npos) << log.str();
  ASSERT_EQ(cli::cmd_gen_data(cfg, (dir / "b").string(), log, 1), 0);
  EXPECT_EQ(slurp(dir / "a" / "dataset.bin"), slurp(dir / "b" / "dataset.bin"));
  ExperimentConfig big;
  big.dataset.config.L_h = big.dataset.config.L_v = 8;
  big.dataset.rate = 1.0 / 3;
  EXPECT_THROW(cli::cmd_gen_data(big, (dir / "c").string(), log), UnsupportedRateError);
}

TEST(Commands, TrainRejectsMismatchedCheckpoint) {
  const fs::path dir = scratch("mismatch");
  ExperimentConfig cfg = parse_config(kTinyIni);
  std::ostringstream log;
  cli::cmd_gen_data(cfg, (dir / "d").string(), log);
  const std::string data = (dir / "d" / "dataset.bin").string();
  cli::cmd_train(cfg, data, (dir / "a").string(), log);
  cfg.model.arch = BlockKind::euler;
  EXPECT_THROW(cli::cmd_train(cfg, data, (dir / "b").string(), log,
                              (dir / "a" / "model.risnet").string()),
               ConfigError);
}

TEST(Commands, SweepFilesAreReproducible) {
  const fs::path dir = scratch("sweep");
  const ExperimentConfig cfg = parse_config(kTinyIni);
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_sweep(cfg, (dir / "a").string(), log, 2), 0);
  ASSERT_EQ(cli::cmd_sweep(cfg, (dir / "b").string(), log, 1), 0);
  for (const char* f : {"history.csv", "summary.csv", "report.json", "config.ini"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_TRUE(looks_like_svg(slurp(dir / "a" / "nmse_vs_epoch.svg")));
  std::size_t ckpts = 0;
  for (const auto& e : fs::directory_iterator(dir / "a" / "checkpoints")) ckpts += e.is_regular_file();
  EXPECT_EQ(ckpts, 4u);
  // 2 archs x 2 rates x 1 seed x 2 epochs + header
  const std::string h = slurp(dir / "a" / "history.csv");
  EXPECT_EQ(std::count(h.begin(), h.end(), '\n'), 9);
}

TEST(Commands, SweepCellEqualsGenDataPlusTrain) {
  const fs::path dir = scratch("equiv");
  ExperimentConfig cfg = parse_config(kTinyIni);
  cli::Overrides o;
  o.seed = 3;
  o.arch = "cascaded";
  o.rate = 0.5;
  cfg = cli::resolve_config(write_tiny_config(dir).string(), o);
  std::ostringstream log;
  cli::cmd_sweep(cfg, (dir / "s").string(), log);
  cli::cmd_gen_data(cfg, (dir / "d").string(), log);
  cli::cmd_train(cfg, (dir / "d" / "dataset.bin").string(), (dir / "t").string(), log);
  EXPECT_EQ(slurp(dir / "s" / "history.csv"), slurp(dir / "t" / "history.csv"));
}

TEST(Commands, FreqGapWritesGapPlot) {
  const fs::path dir = scratch("gap");
  ExperimentConfig cfg = parse_config(kTinyIni);
  cfg.training.epochs = 1;
  cfg.sweep.archs = {BlockKind::rk3};
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_freqgap(cfg, dir.string(), log), 0);
  EXPECT_TRUE(looks_like_svg(slurp(dir / "nmse_vs_gap.svg")));
  const auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(rep.at("kind"), "frequency_gap");
  EXPECT_EQ(rep.at("cells").size(), 2u);
}

TEST(Commands, VerifySuitePasses) {
  std::ostringstream log;
  EXPECT_EQ(cli::cmd_verify(log), 0) << log.str();
  EXPECT_NE(log.str().find("all checks passed"), std::string::npos);
}

TEST(Guarded, MapsExceptionsToExitCodes) {
  std::ostringstream err;
  EXPECT_EQ(cli::guarded([]() -> int { throw ConfigError("x"); }, err), 2);
  EXPECT_EQ(cli::guarded([]() -> int { throw UnsupportedRateError("x"); }, err), 2);
  EXPECT_EQ(cli::guarded([]() -> int { throw FormatError("x"); }, err), 3);
  EXPECT_EQ(cli::guarded([]() -> int { throw IoError("x"); }, err), 3);
  EXPECT_EQ(cli::guarded([]() -> int { throw DegenerateDataError("x"); }, err), 3);
  EXPECT_EQ(cli::guarded([]() -> int { throw DivergenceError("x"); }, err), 4);
  EXPECT_EQ(cli::guarded([]() -> int { throw std::runtime_error("x"); }, err), 1);
  EXPECT_EQ(cli::guarded([] { return 0; }, err), 0);
}

TEST(Plot, SvgIsWellFormedAndEscaped) {
  const std::string svg =
      render_line_plot("a < b", "x", "y", {{"s&t", {1, 2, 3}, {-10, -12, -11}}});
  EXPECT_TRUE(looks_like_svg(svg));
  EXPECT_NE(svg.find("a &lt; b"), std::string::npos);
  EXPECT_NE(svg.find("s&amp;t"), std::string::npos);
  EXPECT_FALSE(looks_like_svg("<html></html>"));
}

// ----- the installed binary -----

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RISEXT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  const fs::path dir = scratch("binary");
  const std::string ini = write_tiny_config(dir).string();
  EXPECT_EQ(run_cli("verify"), 0);
  EXPECT_EQ(run_cli("verify --corrupt-backward"), 1);
  EXPECT_EQ(run_cli("gen-data --config " + ini + " --out " + (dir / "d").string()), 0);
  EXPECT_EQ(run_cli("train --config " + ini + " --data " + (dir / "d" / "dataset.bin").string() +
                    " --out " + (dir / "t").string() + " --epochs 1"),
            0);
  EXPECT_EQ(run_cli("train --config " + ini + " --data " + (dir / "missing.bin").string() +
                    " --out " + (dir / "t2").string()),
            3);
  EXPECT_EQ(run_cli("gen-data --config " + ini + " --rate 0.3 --out " + (dir / "e").string()), 2);
  EXPECT_EQ(run_cli("gen-data --config /nonexistent.ini --out " + (dir / "e").string()), 2);
  EXPECT_EQ(run_cli("gen-data --bogus --out " + (dir / "e").string()), 2);
  EXPECT_EQ(run_cli("train --out " + (dir / "e").string()), 2);
  {
    std::ofstream(dir / "junk.bin") << "garbage";
  }
  EXPECT_EQ(run_cli("train --config " + ini + " --data " + (dir / "junk.bin").string() +
                    " --out " + (dir / "t3").string()),
            3);
}

}  // namespace
}  // namespace risext
