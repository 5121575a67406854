// Training loop: alpha-weighted MAE+MSE loss, Adam with global-norm gradient
// clipping, seeded mini-batch shuffling, and patience-based early stopping
// that restores the best-validation-epoch weights.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgcn/data.hpp"
#include "sgcn/graph.hpp"
#include "sgcn/model.hpp"

namespace sgcn {

struct TrainConfig {
  double alpha = 0.7;  // weight on the MAE term
  double lr = 5e-4;
  std::size_t batch_size = 128;
  std::size_t patience = 5;
  std::size_t max_epochs = 100;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  bool deterministic = true;

  void validate() const;
};

struct OptState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;

  static OptState init(const ModelParams& params);
};

struct LossResult {
  double loss = 0.0;
  Tensor d_ypred;
};

/// L = alpha*mean|e| + (1-alpha)*mean(e^2), e = y_pred - y_true;
/// per-element gradient (alpha*sign(e_i) + (1-alpha)*2 e_i)/n with sign(0) = 0.
LossResult combined_loss(const Tensor& y_pred, const Tensor& y_true, double alpha);

double gradient_global_norm(const ModelParams& params);

/// Scales every gradient by clip_norm/g when the global L2 norm g exceeds
/// clip_norm; returns the pre-clip norm. Non-finite gradients abort.
double clip_gradients(ModelParams& params, double clip_norm);

/// One bias-corrected Adam update over all parameters, in declaration order.
void adam_step(ModelParams& params, OptState& opt, const TrainConfig& cfg);

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainRecord {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_loss = 0.0;
  std::string stop_reason;  // "early-stop" or "max-epochs"
};

/// Standardized-unit predictions for every window, [samples x nodes].
Tensor predict_windows(const SparseAdjacency& n, const ModelParams& params,
                       const WindowSet& windows, std::size_t batch_size);

/// Combined loss of fixed params over a whole window set.
double evaluate_loss(const SparseAdjacency& n, const ModelParams& params,
                     const WindowSet& windows, const TrainConfig& cfg);

/// Mini-batch training; params end at the best-validation epoch. Stops after
/// cfg.patience consecutive epochs without strict improvement, or max_epochs.
/// on_epoch fires after each epoch (1-based); opt_out receives the final
/// optimizer state when non-null.
TrainRecord fit(const SparseAdjacency& n, ModelParams& params, const WindowSet& train,
                const WindowSet& val, const TrainConfig& cfg,
                const std::function<void(std::size_t, const EpochStats&)>& on_epoch = {},
                OptState* opt_out = nullptr);

}  // namespace sgcn
