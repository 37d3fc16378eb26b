// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "risext/adam.hpp"
#include "risext/dataset.hpp"
#include "risext/errors.hpp"
#include "risext/network.hpp"
#include "risext/rng.hpp"

namespace risext {

struct TrainingConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 120;
  double lr = 5e-4;
  std::size_t warm_epochs = 40;
  double decay = 0.8;
  std::size_t decay_period = 10;
  std::uint64_t seed = 1;
  bool shuffle = true;

  void validate() const {
    if (batch_size < 1) throw ConfigError("training: batch_size must be >= 1");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("training: lr must be >= 0");
    if (!(decay > 0.0 && decay <= 1.0)) throw ConfigError("training: decay must lie in (0, 1]");
    if (decay_period < 1) throw ConfigError("training: decay_period must be >= 1");
  }

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

/// Constant for the first warm_epochs epochs, then multiplied by `decay` at
/// the start of every decay_period-epoch window: epoch 40 -> 0.8 lr, 50 -> 0.64 lr.
inline double lr_at(std::size_t epoch, const TrainingConfig& c) {
  if (epoch < c.warm_epochs) return c.lr;
  const auto k = static_cast<double>((epoch - c.warm_epochs) / c.decay_period + 1);
  return c.lr * std::pow(c.decay, k);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double nmse_db = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainHistory {
  double initial_train_loss = 0.0;
  std::vector<EpochRecord> epochs;

  const EpochRecord& last() const { return epochs.back(); }

  /// Equality of everything except wall time.
  bool same_results(const TrainHistory& o) const {
    if (initial_train_loss != o.initial_train_loss || epochs.size() != o.epochs.size()) return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      const auto &a = epochs[i], &b = o.epochs[i];
      if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.test_loss != b.test_loss ||
          a.nmse_db != b.nmse_db || a.lr != b.lr)
        return false;
    }
    return true;
  }
};

/// Stacks the selected pairs into [B, M*L, K, 2] input and label tensors.
inline std::pair<Tensor, Tensor> make_batch(const std::vector<SamplePair>& pairs,
                                            std::span<const std::size_t> idx) {
  const Shape& s = pairs.at(idx[0]).z_ta.shape();
  const std::size_t n = pairs[idx[0]].z_ta.size();
  Tensor in({idx.size(), s[0], s[1], s[2]});
  Tensor ta({idx.size(), s[0], s[1], s[2]});
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const SamplePair& p = pairs.at(idx[b]);
    std::copy(p.z_in.data(), p.z_in.data() + n, in.data() + b * n);
    std::copy(p.z_ta.data(), p.z_ta.data() + n, ta.data() + b * n);
  }
  return {std::move(in), std::move(ta)};
}

inline constexpr double kNmseFloorDb = -120.0;

inline double to_db(double ratio) {
  if (!(ratio > 0.0)) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(ratio));
}

struct NmseReport {
  double mean_ratio_db = 0.0;     // mean of per-sample ||C - C^||^2 / ||C||^2
  double ratio_of_sums_db = 0.0;  // sum of errors / sum of energies
};

/// Per-sample squared error and energy of predictions in the unscaled channel
/// domain; prediction/label tensors hold scale * [Re C, Im C].
inline void accumulate_nmse(const Tensor& pred, const Tensor& label, double scale,
                            std::vector<double>& err, std::vector<double>& energy) {
  require_same_shape(pred, label, "nmse");
  const std::size_t B = pred.dim(0);
  const std::size_t n = pred.size() / B;
  const double inv = 1.0 / scale;
  for (std::size_t b = 0; b < B; ++b) {
    double e = 0.0, p = 0.0;
    for (std::size_t i = b * n; i < (b + 1) * n; ++i) {
      const double t = label[i] * inv;
      const double d = t - pred[i] * inv;
      e += d * d;
      p += t * t;
    }
    err.push_back(e);
    energy.push_back(p);
  }
}

inline NmseReport nmse_from(const std::vector<double>& err, const std::vector<double>& energy) {
  if (err.empty()) throw std::invalid_argument("nmse: empty set");
  double mean = 0.0, se = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < err.size(); ++i) {
    if (!(energy[i] > 0.0)) throw DegenerateDataError("nmse: sample with zero channel energy");
    mean += err[i] / energy[i];
    se += err[i];
    sp += energy[i];
  }
  mean /= static_cast<double>(err.size());
  return {to_db(mean), to_db(se / sp)};
}

/// NMSE of arbitrary predictions [B, ...] against labels (same layout).
inline NmseReport nmse_db(const Tensor& pred, const Tensor& label, double scale) {
  std::vector<double> err, energy;
  accumulate_nmse(pred, label, scale, err, energy);
  return nmse_from(err, energy);
}

struct EvalResult {
  double loss = 0.0;
  NmseReport nmse;
};

/// Mean loss and NMSE of the model over `pairs`, evaluated in batches.
inline EvalResult evaluate(const Model& model, const std::vector<SamplePair>& pairs,
                           const SystemConfig& c, double scale, std::size_t batch = 32) {
  if (pairs.empty()) throw std::invalid_argument("evaluate: empty set");
  std::vector<double> err, energy;
  double loss_sum = 0.0;
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t start = 0; start < pairs.size(); start += batch) {
    const std::size_t len = std::min(batch, pairs.size() - start);
    auto [in, ta] = make_batch(pairs, std::span(idx).subspan(start, len));
    const Tensor out = model.forward(in);
    loss_sum += mse_loss(out, ta, c.M, c.L(), c.K, len).loss * static_cast<double>(len);
    accumulate_nmse(out, ta, scale, err, energy);
  }
  return {loss_sum / static_cast<double>(pairs.size()), nmse_from(err, energy)};
}

inline double evaluate_nmse(const Model& model, const std::vector<SamplePair>& pairs,
                            const SystemConfig& c, double scale) {
  return evaluate(model, pairs, c, scale).nmse.mean_ratio_db;
}

/// Called after every epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Minibatch Adam on the normalised MSE. Epoch e (absolute, counting from
/// `start_epoch` when resuming) uses lr_at(e) and its own shuffle stream, so a
/// resumed run continues exactly as an uninterrupted one would.
inline TrainHistory train(Model& model, const Dataset& ds, const TrainingConfig& cfg,
                          std::size_t start_epoch = 0, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (ds.train.empty() || ds.test.empty()) throw DegenerateDataError("train: empty split");
  const SystemConfig& c = ds.manifest.spec.config;
  const double scale = ds.manifest.scale;
  if (ds.train[0].z_in.dim(0) != c.M * c.L() || ds.train[0].z_in.dim(1) != c.K)
    throw std::invalid_argument("train: dataset tensors do not match the system config");

  TrainHistory hist;
  hist.initial_train_loss = evaluate(model, ds.train, c, scale, cfg.batch_size).loss;
  if (!std::isfinite(hist.initial_train_loss))
    throw DivergenceError("train: non-finite loss before the first update");

  auto params = model.parameters();
  std::vector<std::size_t> order(ds.train.size());
  const std::uint64_t shuffle_seed = mix64(cfg.seed, kShuffleStream);
  for (std::size_t e = start_epoch; e < start_epoch + cfg.epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) {
      auto rng = make_stream(shuffle_seed, e);
      std::shuffle(order.begin(), order.end(), rng);
    }
    const double lr = lr_at(e, cfg);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      auto [in, ta] = make_batch(ds.train, std::span(order).subspan(start, len));
      ModelTrace trace;
      const Tensor out = model.forward(in, trace);
      const LossResult lr_res = mse_loss(out, ta, c.M, c.L(), c.K, len);
      if (!std::isfinite(lr_res.loss))
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(e) +
                              ", batch starting at " + std::to_string(start));
      model.zero_grad();
      model.backward(lr_res.grad, trace);
      adam_step(params, lr);
      loss_sum += lr_res.loss * static_cast<double>(len);
    }
    const EvalResult test = evaluate(model, ds.test, c, scale, cfg.batch_size);
    EpochRecord rec;
    rec.epoch = e;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.test_loss = test.loss;
    rec.nmse_db = test.nmse.mean_ratio_db;
    rec.lr = lr;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(rec.test_loss))
      throw DivergenceError("train: non-finite test loss at epoch " + std::to_string(e));
    hist.epochs.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  return hist;
}

/// 1-based epoch at which `losses` first drops to `target` or below; 0 if never.
inline std::size_t epochs_to_reach(const std::vector<EpochRecord>& h, double target) {
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h[i].train_loss <= target) return i + 1;
  return 0;
}

}  // namespace risext
