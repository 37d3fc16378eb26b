// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "risext/config.hpp"
#include "risext/parallel.hpp"
#include "risext/training.hpp"

namespace risext {

struct CellResult {
  BlockKind arch = BlockKind::rk3;
  double rate = 0.0;
  std::uint64_t seed = 0;
  double gap_hz = 0.0;
  TrainHistory history;
  double final_train_loss = 0.0;
  EvalResult final_test;
  std::size_t param_count = 0;
};

/// Called once per finished cell, possibly from a worker thread.
using CellCallback = std::function<void(const CellResult&, const Model&)>;

/// Trains a freshly initialised model for `cfg` on `ds` and evaluates it.
inline CellResult run_cell(const ExperimentConfig& cfg, const Dataset& ds,
                           const CellCallback& on_done = {}) {
  Model model(cfg.model);
  model.init(init_seed(cfg.training));
  CellResult r;
  r.arch = cfg.model.arch;
  r.rate = ds.manifest.pattern.rate;
  r.seed = cfg.training.seed;
  r.gap_hz = ds.manifest.spec.label_offset_hz;
  r.history = train(model, ds, cfg.training);
  r.final_train_loss = r.history.epochs.empty() ? r.history.initial_train_loss
                                                : r.history.last().train_loss;
  r.final_test = evaluate(model, ds.test, ds.manifest.spec.config, ds.manifest.scale,
                          cfg.training.batch_size);
  r.param_count = model.param_count();
  if (on_done) on_done(r, model);
  return r;
}

namespace detail {

struct CellPlan {
  ExperimentConfig cfg;
  std::size_t dataset = 0;
};

inline std::vector<CellResult> run_plan(const std::vector<CellPlan>& plan,
                                        const std::vector<Dataset>& datasets, std::size_t jobs,
                                        const CellCallback& on_done) {
  std::vector<CellResult> out(plan.size());
  parallel_for(plan.size(), jobs, [&](std::size_t i) {
    out[i] = run_cell(plan[i].cfg, datasets[plan[i].dataset], on_done);
  });
  return out;
}

}  // namespace detail

/// Every (rate, arch, seed) cell of cfg.sweep. Architectures trained at the
/// same (rate, seed) share one dataset. Rows come back in the order
/// rate-major, then arch, then seed, whatever `jobs` is.
inline std::vector<CellResult> run_rate_sweep(const ExperimentConfig& cfg, std::size_t jobs = 1,
                                              const CellCallback& on_done = {}) {
  cfg.validate();
  std::vector<DatasetSpec> specs;
  for (double rate : cfg.sweep.rates)
    for (std::uint64_t seed : cfg.sweep.seeds) {
      DatasetSpec s = with_seed(cfg, seed).dataset;
      s.rate = rate;
      specs.push_back(s);
    }
  std::vector<Dataset> datasets(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) { datasets[i] = generate_dataset(specs[i]); });

  std::vector<detail::CellPlan> plan;
  for (std::size_t ri = 0; ri < cfg.sweep.rates.size(); ++ri)
    for (BlockKind arch : cfg.sweep.archs)
      for (std::size_t si = 0; si < cfg.sweep.seeds.size(); ++si) {
        ExperimentConfig c = with_seed(cfg, cfg.sweep.seeds[si]);
        c.dataset = specs[ri * cfg.sweep.seeds.size() + si];
        c.model.arch = arch;
        plan.push_back({c, ri * cfg.sweep.seeds.size() + si});
      }
  return detail::run_plan(plan, datasets, jobs, on_done);
}

/// Every (gap, arch, seed) cell at rate cfg.dataset.rate. Inputs are sampled
/// at f_c and labels at f_c + gap from the same scenarios.
inline std::vector<CellResult> run_frequency_gap(const ExperimentConfig& cfg, std::size_t jobs = 1,
                                                 const CellCallback& on_done = {}) {
  cfg.validate();
  std::vector<DatasetSpec> specs;
  for (double gap : cfg.sweep.gaps_hz)
    for (std::uint64_t seed : cfg.sweep.seeds) {
      DatasetSpec s = with_seed(cfg, seed).dataset;
      s.label_offset_hz = gap;
      specs.push_back(s);
    }
  std::vector<Dataset> datasets(specs.size());
  parallel_for(specs.size(), jobs, [&](std::size_t i) { datasets[i] = generate_dataset(specs[i]); });

  std::vector<detail::CellPlan> plan;
  for (std::size_t gi = 0; gi < cfg.sweep.gaps_hz.size(); ++gi)
    for (BlockKind arch : cfg.sweep.archs)
      for (std::size_t si = 0; si < cfg.sweep.seeds.size(); ++si) {
        ExperimentConfig c = with_seed(cfg, cfg.sweep.seeds[si]);
        c.dataset = specs[gi * cfg.sweep.seeds.size() + si];
        c.model.arch = arch;
        plan.push_back({c, gi * cfg.sweep.seeds.size() + si});
      }
  return detail::run_plan(plan, datasets, jobs, on_done);
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Result files. Wall times are kept out of the results CSVs so identical
// runs produce identical files; they go to the timing CSV instead.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace detail

inline std::string history_csv_header(bool with_gap = false) {
  return std::string("arch,rate,seed,") + (with_gap ? "gap_hz," : "") +
         "epoch,train_loss,test_loss,nmse_db,lr";
}

/// One row per epoch; epochs are 1-based in the file.
inline std::string history_csv_rows(const CellResult& r, bool with_gap = false) {
  using detail::num;
  std::ostringstream os;
  for (const auto& e : r.history.epochs) {
    os << to_string(r.arch) << ',' << num(r.rate) << ',' << r.seed << ',';
    if (with_gap) os << num(r.gap_hz) << ',';
    os << e.epoch + 1 << ',' << num(e.train_loss) << ',' << num(e.test_loss) << ','
       << num(e.nmse_db) << ',' << num(e.lr) << '\n';
  }
  return os.str();
}

inline std::string summary_csv_header() {
  return "arch,rate,seed,gap_hz,epochs,batch_size,final_train_loss,final_test_loss,nmse_db,"
         "nmse_ratio_of_sums_db,param_count";
}

inline std::string summary_csv_row(const CellResult& r, std::size_t batch_size) {
  using detail::num;
  std::ostringstream os;
  os << to_string(r.arch) << ',' << num(r.rate) << ',' << r.seed << ',' << num(r.gap_hz) << ','
     << r.history.epochs.size() << ',' << batch_size << ',' << num(r.final_train_loss) << ','
     << num(r.final_test.loss) << ',' << num(r.final_test.nmse.mean_ratio_db) << ','
     << num(r.final_test.nmse.ratio_of_sums_db) << ',' << r.param_count;
  return os.str();
}

inline std::string timing_csv(const std::vector<CellResult>& rows) {
  std::ostringstream os;
  os << "arch,rate,seed,gap_hz,epoch,wall_seconds\n";
  for (const auto& r : rows)
    for (const auto& e : r.history.epochs)
      os << to_string(r.arch) << ',' << detail::num(r.rate) << ',' << r.seed << ','
         << detail::num(r.gap_hz) << ',' << e.epoch + 1 << ',' << detail::num(e.wall_seconds)
         << '\n';
  return os.str();
}

/// Median final NMSE per (arch, key) where key is the rate or the gap.
inline nlohmann::json median_table(const std::vector<CellResult>& rows, bool by_gap) {
  std::map<std::string, std::map<double, std::vector<double>>> groups;
  for (const auto& r : rows)
    groups[std::string(to_string(r.arch))][by_gap ? r.gap_hz : r.rate].push_back(
        r.final_test.nmse.mean_ratio_db);
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [arch, by_key] : groups) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [key, vals] : by_key)
      list.push_back({{by_gap ? "gap_hz" : "rate", key}, {"median_nmse_db", median(vals)},
                      {"cells", vals.size()}});
    out[arch] = list;
  }
  return out;
}

inline nlohmann::json summary_report(const std::vector<CellResult>& rows,
                                     const ExperimentConfig& cfg, bool by_gap) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& r : rows)
    cells.push_back({{"arch", std::string(to_string(r.arch))},
                     {"rate", r.rate},
                     {"seed", r.seed},
                     {"gap_hz", r.gap_hz},
                     {"final_train_loss", r.final_train_loss},
                     {"final_test_loss", r.final_test.loss},
                     {"nmse_db", r.final_test.nmse.mean_ratio_db},
                     {"nmse_ratio_of_sums_db", r.final_test.nmse.ratio_of_sums_db},
                     {"param_count", r.param_count}});
  return {{"kind", by_gap ? "frequency_gap" : "rate_sweep"},
          {"batch_size", cfg.training.batch_size},
          {"epochs", cfg.training.epochs},
          {"cells", cells},
          {"medians", median_table(rows, by_gap)}};
}

}  // namespace risext
