#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "addidec/adam.hpp"
#include "addidec/errors.hpp"
#include "addidec/models.hpp"
#include "addidec/rng.hpp"
#include "addidec/scenegen.hpp"

namespace addidec {

struct TrainConfig {
  std::size_t batch_size = 64;
  double learning_rate = 5e-4;
  double weight_decay = 5e-4;
  std::size_t max_epochs = 5000;
  std::size_t patience = 1000;
  std::uint64_t seed = 0;

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate >= 0)) throw ConfigError("learning_rate must be non-negative");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
    if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
    if (patience == 0) throw ConfigError("patience must be positive");
  }
};

enum class StopReason { early_stop, max_epochs };

inline std::string stop_reason_name(StopReason s) {
  return s == StopReason::early_stop ? "early_stop" : "max_epochs";
}

struct TrainReport {
  std::vector<double> train_mse, val_mse;  // one entry per completed epoch
  std::size_t best_epoch = 0;              // 1-based
  double best_val = std::numeric_limits<double>::infinity();
  StopReason stop_reason = StopReason::max_epochs;
  double wall_seconds = 0.0;

  std::size_t epochs_run() const { return train_mse.size(); }
};

using EpochHook =
    std::function<void(std::size_t epoch, double train_mse, double val_mse, bool improved)>;

// eval-path reconstruction error over a whole split; slabs stay 64-aligned so
// the result is bit-identical to a single full-set pass
inline double eval_mse(const Model& m, const Dataset& ds) {
  const std::size_t dx = m.cfg.d_x();
  const std::size_t slab = 512;
  double sse = 0.0;
  for (std::size_t lo = 0; lo < ds.n; lo += slab) {
    const std::size_t rows = std::min(slab, static_cast<std::size_t>(ds.n) - lo);
    std::vector<double> x(rows * dx);
    for (std::size_t r = 0; r < rows; ++r) {
      const float* src = ds.image_row(lo + r);
      for (std::size_t k = 0; k < dx; ++k) x[r * dx + k] = src[k];
    }
    std::vector<double> z = encode(m, x, rows);
    std::vector<double> rec = decode(m, z, rows);
    for (std::size_t i = 0; i < rec.size(); ++i) {
      double d = rec[i] - x[i];
      sse += d * d;
    }
  }
  return sse / (static_cast<double>(ds.n) * static_cast<double>(dx));
}

// Reconstruction training with per-epoch validation, best-checkpoint restore
// and patience-based early stopping. Batches are reshuffled every epoch from
// a per-epoch stream, so a run is a pure function of (model init, data, seed).
inline TrainReport train_model(Model& m, const Dataset& tr, const Dataset& va,
                               const TrainConfig& cfg, const EpochHook& hook = {}) {
  cfg.validate();
  if (tr.n == 0 || va.n == 0) throw PreconditionError("train and val splits must be non-empty");
  if (static_cast<std::size_t>(tr.support.pixels()) != m.cfg.d_x() ||
      static_cast<std::size_t>(va.support.pixels()) != m.cfg.d_x())
    throw PreconditionError("dataset resolution does not match the model");

  auto params = m.params();
  AdamState opt;
  opt.lr = cfg.learning_rate;
  opt.weight_decay = cfg.weight_decay;
  opt.init(params);

  TrainReport rep;
  std::vector<std::vector<double>> best_snapshot;
  std::size_t since_best = 0;
  const std::size_t dx = m.cfg.d_x();
  const std::size_t n = static_cast<std::size_t>(tr.n);
  std::vector<std::size_t> order(n);
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng erng(mix_seed(cfg.seed, epoch));
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order, erng);

    double weighted_loss = 0.0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const std::size_t bm = std::min(cfg.batch_size, n - lo);
      std::vector<double> x(bm * dx);
      for (std::size_t r = 0; r < bm; ++r) {
        const float* src = tr.image_row(order[lo + r]);
        for (std::size_t k = 0; k < dx; ++k) x[r * dx + k] = src[k];
      }
      ad::Tape tape;
      ad::VarId xid = tape.constant({bm, dx}, std::move(x));
      ad::VarId zid = encode_tape(tape, m, xid);
      ad::VarId rid = decode_tape(tape, m, zid);
      ad::VarId loss = ad::mse(tape, rid, xid);
      const double lv = tape.value(loss)[0];
      if (!std::isfinite(lv))
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) +
                           "; last finite epoch " + std::to_string(rep.epochs_run()));
      for (auto* p : params) p->zero_grad();
      tape.backward(loss);
      adam_step(params, opt);
      weighted_loss += lv * static_cast<double>(bm);
    }
    const double train_mse = weighted_loss / static_cast<double>(n);
    const double val = eval_mse(m, va);
    if (!std::isfinite(val))
      throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch) +
                         "; last finite epoch " + std::to_string(rep.epochs_run()));
    rep.train_mse.push_back(train_mse);
    rep.val_mse.push_back(val);

    const bool improved = val < rep.best_val;
    if (improved) {
      rep.best_val = val;
      rep.best_epoch = epoch;
      since_best = 0;
      best_snapshot.clear();
      for (auto* p : params) best_snapshot.push_back(p->data);
    } else {
      ++since_best;
    }
    if (hook) hook(epoch, train_mse, val, improved);
    if (since_best >= cfg.patience) {
      rep.stop_reason = StopReason::early_stop;
      break;
    }
  }

  if (!best_snapshot.empty())
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->data = best_snapshot[i];
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace addidec
