#include "sgcn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "sgcn/errors.hpp"
#include "sgcn/rng.hpp"

namespace sgcn {

namespace {

struct Batch {
  std::vector<Tensor> steps;  // seq_len tensors [count*nodes x 1]
  Tensor targets;             // [count x nodes]
  std::size_t count = 0;
};

Batch assemble_batch(const WindowSet& windows, const std::vector<std::size_t>& order,
                     std::size_t begin, std::size_t end) {
  Batch b;
  b.count = end - begin;
  const std::size_t nodes = windows.nodes();
  const std::size_t rows = b.count * nodes;
  b.steps.assign(windows.seq_len, Tensor({rows, 1}));
  b.targets = Tensor({b.count, nodes});
  for (std::size_t k = 0; k < b.count; ++k) {
    const std::size_t s = order[begin + k];
    for (std::size_t t = 0; t < windows.seq_len; ++t) {
      for (std::size_t j = 0; j < nodes; ++j) {
        b.steps[t](k * nodes + j, 0) = windows.inputs(s, t, j);
      }
    }
    for (std::size_t j = 0; j < nodes; ++j) b.targets(k, j) = windows.targets(s, j);
  }
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("train config: alpha must lie in [0,1]");
  }
  if (!(lr > 0.0)) throw ValidationError("train config: lr must be > 0");
  if (batch_size < 1) throw ValidationError("train config: batch_size must be >= 1");
  if (patience < 1) throw ValidationError("train config: patience must be >= 1");
  if (max_epochs < 1) throw ValidationError("train config: max_epochs must be >= 1");
  if (!(clip_norm > 0.0)) throw ValidationError("train config: clip_norm must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("train config: betas must lie in [0,1)");
  }
  if (!(eps > 0.0)) throw ValidationError("train config: eps must be > 0");
}

OptState OptState::init(const ModelParams& params) {
  OptState opt;
  for (const GradPair* p : params.all()) {
    opt.m.push_back(Tensor::zeros_like(p->value));
    opt.v.push_back(Tensor::zeros_like(p->value));
  }
  return opt;
}

LossResult combined_loss(const Tensor& y_pred, const Tensor& y_true, double alpha) {
  if (!y_pred.same_shape(y_true)) {
    throw DimensionError("combined_loss: shapes disagree: " + y_pred.shape_str() +
                         " vs " + y_true.shape_str());
  }
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValidationError("combined_loss: alpha must lie in [0,1]");
  }
  const std::size_t n = y_pred.size();
  LossResult out;
  out.d_ypred = Tensor(y_pred.shape());
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = y_pred[i] - y_true[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    const double sign = e > 0.0 ? 1.0 : (e < 0.0 ? -1.0 : 0.0);
    out.d_ypred[i] = (alpha * sign + (1.0 - alpha) * 2.0 * e) * inv_n;
  }
  out.loss = alpha * abs_sum * inv_n + (1.0 - alpha) * sq_sum * inv_n;
  return out;
}

double gradient_global_norm(const ModelParams& params) {
  double sq = 0.0;
  for (const GradPair* p : params.all()) {
    for (std::size_t i = 0; i < p->grad.size(); ++i) sq += p->grad[i] * p->grad[i];
  }
  return std::sqrt(sq);
}

double clip_gradients(ModelParams& params, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ValidationError("gradient-clip: clip_norm must be > 0");
  for (const GradPair* p : params.all()) {
    if (!p->grad.all_finite()) {
      throw NumericError("gradient-clip: non-finite gradient");
    }
  }
  const double norm = gradient_global_norm(params);
  if (norm > clip_norm) {
    const double s = clip_norm / norm;
    for (GradPair* p : params.all()) {
      for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= s;
    }
  }
  return norm;
}

void adam_step(ModelParams& params, OptState& opt, const TrainConfig& cfg) {
  const auto fields = params.all();
  if (opt.m.size() != fields.size() || opt.v.size() != fields.size()) {
    throw ValidationError("adam-step: optimizer state does not match parameters");
  }
  opt.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.t));
  for (std::size_t k = 0; k < fields.size(); ++k) {
    GradPair& p = *fields[k];
    Tensor& m = opt.m[k];
    Tensor& v = opt.v[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
      if (!std::isfinite(p.value[i])) {
        throw NumericError("adam-step: non-finite update in " +
                           ModelParams::names()[k]);
      }
    }
  }
}

Tensor predict_windows(const SparseAdjacency& n, const ModelParams& params,
                       const WindowSet& windows, std::size_t batch_size) {
  if (batch_size < 1) throw ValidationError("predict: batch_size must be >= 1");
  const std::size_t samples = windows.count();
  const std::size_t nodes = windows.nodes();
  std::vector<std::size_t> order(samples);
  std::iota(order.begin(), order.end(), 0);
  Tensor preds({samples, nodes});
  for (std::size_t begin = 0; begin < samples; begin += batch_size) {
    const std::size_t end = std::min(samples, begin + batch_size);
    const Batch b = assemble_batch(windows, order, begin, end);
    const Tensor y = model_forward_steps(n, b.steps, b.count, params, nullptr);
    for (std::size_t k = 0; k < b.count; ++k) {
      for (std::size_t j = 0; j < nodes; ++j) preds(begin + k, j) = y(k, j);
    }
  }
  return preds;
}

double evaluate_loss(const SparseAdjacency& n, const ModelParams& params,
                     const WindowSet& windows, const TrainConfig& cfg) {
  const Tensor preds = predict_windows(n, params, windows, cfg.batch_size);
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double e = preds[i] - windows.targets[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  const double inv_n = 1.0 / static_cast<double>(preds.size());
  return cfg.alpha * abs_sum * inv_n + (1.0 - cfg.alpha) * sq_sum * inv_n;
}

TrainRecord fit(const SparseAdjacency& n, ModelParams& params, const WindowSet& train,
                const WindowSet& val, const TrainConfig& cfg,
                const std::function<void(std::size_t, const EpochStats&)>& on_epoch,
                OptState* opt_out) {
  cfg.validate();
  params.require_consistent();
  if (train.count() == 0 || val.count() == 0) {
    throw ValidationError("fit: train and validation window sets must be non-empty");
  }
  if (train.nodes() != n.num_nodes() || val.nodes() != n.num_nodes()) {
    throw ValidationError("fit: window node count does not match the graph");
  }

  Rng shuffle_rng(cfg.seed);
  OptState opt = OptState::init(params);
  TrainRecord record;

  std::vector<std::size_t> order(train.count());
  std::iota(order.begin(), order.end(), 0);

  std::vector<Tensor> best_values;
  for (const GradPair* p : params.all()) best_values.push_back(p->value);
  record.best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    shuffle(order, shuffle_rng);

    double loss_weighted = 0.0;
    std::size_t elements = 0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const Batch b = assemble_batch(train, order, begin, end);
      ForwardCache cache;
      const Tensor y = model_forward_steps(n, b.steps, b.count, params, &cache);
      const LossResult loss = combined_loss(y, b.targets, cfg.alpha);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(batch_index));
      }
      params.zero_grads();
      model_backward(cache, loss.d_ypred, params);
      clip_gradients(params, cfg.clip_norm);
      adam_step(params, opt, cfg);
      loss_weighted += loss.loss * static_cast<double>(y.size());
      elements += y.size();
    }

    EpochStats stats;
    stats.train_loss = loss_weighted / static_cast<double>(elements);
    stats.val_loss = evaluate_loss(n, params, val, cfg);
    stats.wall_seconds = seconds_since(epoch_start);
    record.epochs.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);

    if (stats.val_loss < record.best_val_loss) {
      record.best_val_loss = stats.val_loss;
      record.best_epoch = epoch;
      const auto fields = params.all();
      for (std::size_t k = 0; k < fields.size(); ++k) {
        best_values[k] = fields[k]->value;
      }
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= cfg.patience) {
        record.stop_reason = "early-stop";
        break;
      }
    }
  }
  if (record.stop_reason.empty()) record.stop_reason = "max-epochs";

  const auto fields = params.all();
  for (std::size_t k = 0; k < fields.size(); ++k) {
    fields[k]->value = best_values[k];
    fields[k]->zero_grad();
  }
  if (opt_out) *opt_out = std::move(opt);
  return record;
}

}  // namespace sgcn
