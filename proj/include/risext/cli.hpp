// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "risext/checkpoint.hpp"
#include "risext/config.hpp"
#include "risext/dataset.hpp"
#include "risext/errors.hpp"
#include "risext/experiments.hpp"
#include "risext/plot.hpp"
#include "risext/training.hpp"
#include "risext/verify.hpp"

namespace risext::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,     // verify failed or unexpected error
  kConfigError = 2,
  kDataError = 3,   // unreadable, malformed or unusable files
  kDivergence = 4,
};

/// Command-line overrides applied on top of the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> arch;
  std::optional<double> rate;
  std::optional<std::size_t> epochs;
};

/// Loads `path` (or the defaults when empty) and applies the overrides. For
/// sweeps, --arch / --rate / --seed narrow the grid to that single value.
inline ExperimentConfig resolve_config(const std::string& path, const Overrides& o) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
  if (o.seed) {
    c = with_seed(c, *o.seed);
    c.sweep.seeds = {*o.seed};
  }
  if (o.arch) {
    set_config_value(c, "model", "arch", *o.arch);
    c.sweep.archs = {c.model.arch};
  }
  if (o.rate) {
    c.dataset.rate = *o.rate;
    c.sweep.rates = {*o.rate};
  }
  if (o.epochs) c.training.epochs = *o.epochs;
  c.validate();
  return c;
}

namespace detail {

namespace fs = std::filesystem;

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + p.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write to '" + p.string() + "' failed");
}

inline fs::path prepare_dir(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    throw IoError("cannot create output directory '" + out + "'");
  return fs::path(out);
}

inline std::string rate_tag(double r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

inline std::string cell_tag(const CellResult& r, bool with_gap) {
  std::string tag = std::string(to_string(r.arch)) + "_r" + rate_tag(r.rate) + "_s" +
                    std::to_string(r.seed);
  if (with_gap) tag += "_gap" + rate_tag(r.gap_hz);
  return tag;
}

/// Median NMSE-vs-epoch per (arch, rate or gap) over seeds.
inline std::vector<PlotSeries> epoch_series(const std::vector<CellResult>& rows, bool by_gap) {
  std::map<std::pair<std::string, double>, std::vector<const CellResult*>> groups;
  for (const auto& r : rows)
    groups[{std::string(to_string(r.arch)), by_gap ? r.gap_hz : r.rate}].push_back(&r);
  std::vector<PlotSeries> out;
  for (const auto& [key, cells] : groups) {
    PlotSeries s;
    s.label = key.first + (by_gap ? " gap " + rate_tag(key.second / 1e6) + " MHz"
                                  : " r=" + rate_tag(key.second));
    const std::size_t n = cells.front()->history.epochs.size();
    for (std::size_t e = 0; e < n; ++e) {
      std::vector<double> v;
      for (const auto* c : cells)
        if (e < c->history.epochs.size()) v.push_back(c->history.epochs[e].nmse_db);
      s.x.push_back(static_cast<double>(e + 1));
      s.y.push_back(median(v));
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<PlotSeries> gap_series(const std::vector<CellResult>& rows) {
  std::map<std::string, std::map<double, std::vector<double>>> groups;
  for (const auto& r : rows)
    groups[std::string(to_string(r.arch))][r.gap_hz].push_back(r.final_test.nmse.mean_ratio_db);
  std::vector<PlotSeries> out;
  for (const auto& [arch, by_gap] : groups) {
    PlotSeries s{arch, {}, {}};
    for (const auto& [gap, v] : by_gap) {
      s.x.push_back(gap / 1e6);
      s.y.push_back(median(v));
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

inline int cmd_gen_data(const ExperimentConfig& cfg, const std::string& out, std::ostream& log,
                        std::size_t jobs = 1) {
  const auto dir = detail::prepare_dir(out);
  const Dataset ds = generate_dataset(cfg.dataset, jobs);
  save_dataset((dir / "dataset.bin").string(), ds);
  detail::write_text(dir / "manifest.json", to_json(ds.manifest).dump(2) + "\n");
  detail::write_text(dir / "config.ini", to_config_text(cfg));
  const auto& c = cfg.dataset.config;
  log << "dataset: " << cfg.dataset.samples << " samples (" << ds.train.size() << " train / "
      << ds.test.size() << " test)\n"
      << "array: M=" << c.M << " L=" << c.L() << " (" << c.L_h << "x" << c.L_v << ") K=" << c.K
      << "\n"
      << "sampling: r=" << ds.manifest.pattern.rate << " strides " << ds.manifest.pattern.stride_h
      << "x" << ds.manifest.pattern.stride_v << ", " << ds.manifest.pattern.selected()
      << " active elements\n"
      << "tensors: " << c.M * c.L() << "x" << c.K << "x2, payload "
      << ds.manifest.payload_bytes() << " bytes\n"
      << "written: " << (dir / "dataset.bin").string() << "\n";
  return kOk;
}

/// Trains one model on a stored dataset. With `resume`, restores the model and
/// optimizer state from that checkpoint and runs the remaining epochs.
inline int cmd_train(ExperimentConfig cfg, const std::string& data_path, const std::string& out,
                     std::ostream& log, const std::string& resume = {}) {
  if (data_path.empty()) throw ConfigError("--data is required");
  const auto dir = detail::prepare_dir(out);
  const Dataset ds = load_dataset(data_path);
  cfg.dataset = ds.manifest.spec;

  std::optional<Model> model;
  std::size_t start = 0;
  if (!resume.empty()) {
    auto [m, ck] = load_checkpoint(resume);
    if (!(m.spec() == cfg.model))
      throw ConfigError("checkpoint '" + resume + "' architecture differs from the config");
    model.emplace(std::move(m));
    start = ck.epochs_completed;
  } else {
    model.emplace(cfg.model);
    model->init(init_seed(cfg.training));
  }
  TrainingConfig tc = cfg.training;
  tc.epochs = cfg.training.epochs > start ? cfg.training.epochs - start : 0;
  const TrainHistory hist = train(*model, ds, tc, start, [&](const EpochRecord& e) {
    log << "epoch " << std::setw(4) << e.epoch + 1 << "  train " << e.train_loss << "  test "
        << e.test_loss << "  nmse " << e.nmse_db << " dB  lr " << e.lr << "\n";
    return true;
  });

  CellResult r;
  r.arch = cfg.model.arch;
  r.rate = ds.manifest.pattern.rate;
  r.seed = cfg.training.seed;
  r.gap_hz = ds.manifest.spec.label_offset_hz;
  r.history = hist;
  r.final_train_loss = hist.epochs.empty() ? hist.initial_train_loss : hist.last().train_loss;
  r.final_test = evaluate(*model, ds.test, ds.manifest.spec.config, ds.manifest.scale,
                          cfg.training.batch_size);
  r.param_count = model->param_count();

  detail::write_text(dir / "config.ini", to_config_text(cfg));
  detail::write_text(dir / "history.csv", history_csv_header() + "\n" + history_csv_rows(r));
  detail::write_text(dir / "timing.csv", timing_csv({r}));
  save_checkpoint((dir / "model.risnet").string(), *model, start + hist.epochs.size(),
                  {{"seed", cfg.training.seed}, {"dataset", data_path}});
  detail::write_text(dir / "summary.json", summary_report({r}, cfg, false).dump(2) + "\n");
  log << "final test NMSE " << r.final_test.nmse.mean_ratio_db << " dB (ratio of sums "
      << r.final_test.nmse.ratio_of_sums_db << " dB), loss " << r.final_test.loss << "\n";
  return kOk;
}

namespace detail {
inline void write_study(const fs::path& dir, const ExperimentConfig& cfg,
                        const std::vector<CellResult>& rows, bool by_gap) {
  std::string hist = history_csv_header(by_gap) + "\n";
  std::string summary = summary_csv_header() + "\n";
  for (const auto& r : rows) {
    hist += history_csv_rows(r, by_gap);
    summary += summary_csv_row(r, cfg.training.batch_size) + "\n";
  }
  write_text(dir / "config.ini", to_config_text(cfg));
  write_text(dir / "history.csv", hist);
  write_text(dir / "summary.csv", summary);
  write_text(dir / "timing.csv", timing_csv(rows));
  write_text(dir / "report.json", summary_report(rows, cfg, by_gap).dump(2) + "\n");
  write_text(dir / "nmse_vs_epoch.svg",
             render_line_plot(by_gap ? "Test NMSE vs epoch (frequency gap)"
                                     : "Test NMSE vs epoch (median over seeds)",
                              "epoch", "NMSE [dB]", epoch_series(rows, by_gap)));
  if (by_gap)
    write_text(dir / "nmse_vs_gap.svg",
               render_line_plot("Final test NMSE vs frequency gap (median over seeds)",
                                "frequency gap [MHz]", "NMSE [dB]", gap_series(rows)));
}

inline CellCallback checkpoint_writer(const fs::path& dir, bool by_gap, std::ostream& log) {
  fs::create_directories(dir / "checkpoints");
  auto mu = std::make_shared<std::mutex>();
  return [dir, by_gap, &log, mu](const CellResult& r, const Model& m) {
    save_checkpoint((dir / "checkpoints" / (cell_tag(r, by_gap) + ".risnet")).string(), m,
                    r.history.epochs.size(), {{"seed", r.seed}, {"gap_hz", r.gap_hz}});
    std::lock_guard lock(*mu);
    log << cell_tag(r, by_gap) << ": nmse " << r.final_test.nmse.mean_ratio_db << " dB\n";
  };
}
}  // namespace detail

inline int cmd_sweep(const ExperimentConfig& cfg, const std::string& out, std::ostream& log,
                     std::size_t jobs = 1) {
  const auto dir = detail::prepare_dir(out);
  const auto rows = run_rate_sweep(cfg, jobs, detail::checkpoint_writer(dir, false, log));
  detail::write_study(dir, cfg, rows, false);
  log << "median final NMSE [dB]:\n" << median_table(rows, false).dump(2) << "\n";
  return kOk;
}

inline int cmd_freqgap(const ExperimentConfig& cfg, const std::string& out, std::ostream& log,
                       std::size_t jobs = 1) {
  const auto dir = detail::prepare_dir(out);
  const auto rows = run_frequency_gap(cfg, jobs, detail::checkpoint_writer(dir, true, log));
  detail::write_study(dir, cfg, rows, true);
  log << "median final NMSE [dB]:\n" << median_table(rows, true).dump(2) << "\n";
  return kOk;
}

inline int cmd_verify(std::ostream& log) {
  const VerifyReport rep = run_verify_suite();
  for (const auto& c : rep.checks)
    log << (c.passed ? "PASS  " : "FAIL  ") << c.name << "  [" << c.detail << "]\n";
  log << "worst gradient relative error: " << rep.worst_grad_error << " (" << rep.worst_grad_where
      << ")\n"
      << (rep.passed() ? "all checks passed\n" : "verification FAILED\n");
  return rep.passed() ? kOk : kFailure;
}

/// Runs `fn` and maps library exceptions to exit codes.
template <class Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const FormatError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const DegenerateDataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const IoError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace risext::cli
