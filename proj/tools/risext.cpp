// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "risext/cli.hpp"

int main(int argc, char** argv) {
  using namespace risext;
  CLI::App app{"RIS cascaded-channel extrapolation with ODE-structured CNNs"};
  app.require_subcommand(1);

  std::string config_path, out, data, resume;
  std::size_t jobs = 1;
  bool corrupt = false;
  cli::Overrides ov;

  auto common = [&](CLI::App* sub, bool with_jobs) {
    sub->add_option("--config", config_path, "experiment config file (defaults if omitted)");
    sub->add_option("--out", out, "output directory")->required();
    sub->add_option("--seed", ov.seed, "run seed (dataset, init and shuffle)");
    sub->add_option("--arch", ov.arch, "cascaded | euler | lf | rk3");
    sub->add_option("--rate", ov.rate, "sub-sampling rate, e.g. 0.25");
    sub->add_option("--epochs", ov.epochs, "training epochs");
    if (with_jobs) sub->add_option("--jobs", jobs, "parallel workers (capped by RISEXT_THREADS)");
  };

  auto* gen = app.add_subcommand("gen-data", "generate and store a dataset");
  common(gen, true);
  auto* tr = app.add_subcommand("train", "train one model on a stored dataset");
  common(tr, false);
  tr->add_option("--data", data, "dataset.bin written by gen-data")->required();
  tr->add_option("--resume", resume, "checkpoint to continue from");
  auto* sweep = app.add_subcommand("sweep", "architecture x rate x seed study");
  common(sweep, true);
  auto* gap = app.add_subcommand("freqgap", "frequency-gap study");
  common(gap, true);
  auto* verify = app.add_subcommand("verify", "run the built-in oracle suite");
  verify->add_flag("--corrupt-backward", corrupt, "debug: break the conv backward pass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kConfigError;
  }

  return cli::guarded(
      [&]() -> int {
        if (verify->parsed()) {
          debug::corrupt_conv_backward = corrupt;
          return cli::cmd_verify(std::cout);
        }
        const ExperimentConfig cfg = cli::resolve_config(config_path, ov);
        if (gen->parsed()) return cli::cmd_gen_data(cfg, out, std::cout, jobs);
        if (tr->parsed()) return cli::cmd_train(cfg, data, out, std::cout, resume);
        if (sweep->parsed()) return cli::cmd_sweep(cfg, out, std::cout, jobs);
        return cli::cmd_freqgap(cfg, out, std::cout, jobs);
      },
      std::cerr);
}
