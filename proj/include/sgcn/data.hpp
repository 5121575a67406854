// Dataset ingestion, standardization, windowing, chronological splits and
// the synthetic graph-diffusion generator used by the oracle suites.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgcn/graph.hpp"
#include "sgcn/tensor.hpp"

namespace sgcn {

/// timestep x sensor speed matrix in mph, 5-minute spacing implied.
struct SpeedDataset {
  Tensor speeds;  // [T x nodes]
  std::vector<std::string> node_ids;

  std::size_t timesteps() const { return speeds.dim(0); }
  std::size_t nodes() const { return speeds.dim(1); }
};

enum class ScalerMode { kPerNode, kGlobal };

/// z-score transform fit on the training slice only. Population standard
/// deviation; zero-variance columns fall back to std = 1.
class Scaler {
 public:
  /// Default-constructed scalers are unfitted; apply/invert reject them.
  Scaler() = default;

  static Scaler fit(const Tensor& train_slice, ScalerMode mode);
  static Scaler from_stats(Tensor mean, Tensor stddev, ScalerMode mode);

  Tensor apply(const Tensor& x) const;
  Tensor invert(const Tensor& x) const;

  bool fitted() const { return !mean_.empty(); }
  ScalerMode mode() const { return mode_; }
  const Tensor& mean() const { return mean_; }
  const Tensor& stddev() const { return std_; }

 private:
  Tensor mean_;  // [nodes] or [1]
  Tensor std_;
  ScalerMode mode_ = ScalerMode::kPerNode;
};

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
};

struct SplitRanges {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

/// Contiguous, ordered, non-overlapping timestep ranges. Boundaries are
/// floor(T * train_frac * (1 - val_frac_of_train)) and floor(T * train_frac),
/// so the defaults give 72% / 8% / 20%; train keeps the rounding remainder.
SplitRanges chronological_split(std::size_t timesteps, double train_frac = 0.8,
                                double val_frac_of_train = 0.1);

/// Sliding windows over a standardized [T x nodes] matrix. Sample s holds
/// timesteps s..s+N-1 as input and timestep s+N+horizon-1 as target, so
/// S = T - N - horizon + 1. The per-node feature dimension is 1, implicit.
struct WindowSet {
  Tensor inputs;   // [S x N x nodes]
  Tensor targets;  // [S x nodes]
  std::size_t seq_len = 1;
  std::size_t horizon = 1;

  std::size_t count() const { return inputs.empty() ? 0 : inputs.dim(0); }
  std::size_t nodes() const { return targets.empty() ? 0 : targets.dim(1); }
};

WindowSet make_windows(const Tensor& standardized, std::size_t seq_len,
                       std::size_t horizon);

/// Speed CSV: header of sensor ids, one row of floats per 5-minute step.
/// Empty/NaN cells forward-fill from the last valid value in the column;
/// a missing column head takes the column mean of the valid entries.
SpeedDataset load_speed_csv(const std::string& path);
void write_speed_csv(const std::string& path, const SpeedDataset& dataset);

/// Edge CSV with header `src,dst,weight`. num_nodes is max id + 1.
EdgeList load_edge_csv(const std::string& path);
void write_edge_csv(const std::string& path, const EdgeList& edges);

/// Checks the edge ids fit the dataset's sensor count and widens num_nodes
/// to it (trailing sensors without edges keep their self-loop signal).
void pair_with_dataset(EdgeList& edges, const SpeedDataset& dataset);

struct SynthConfig {
  std::size_t nodes = 20;
  std::size_t timesteps = 2000;
  std::uint64_t seed = 0;
  double beta = 0.2;        // diffusion rate toward the graph average
  double period = 288.0;    // sinusoid period in steps (288 = one day)
  double sigma = 1.0;       // per-node Gaussian noise, mph
  double amplitude = 2.0;   // sinusoid forcing, mph per step
  double radius = 0.35;     // geometric-graph connection radius in the unit square
  double coupling = 0.15;   // peak edge weight, in (0, 1]; self-loops stay at 1
};

struct SynthResult {
  EdgeList edges;
  SpeedDataset dataset;
};

/// Random connected geometric graph plus a speed series evolving as
///   x_{t+1} = (1-beta) x_t + beta N x_t + amplitude sin(2 pi t / period) 1 + eps_t
/// with eps ~ N(0, sigma^2) per node, clipped at 0 mph, started from
/// per-node constants in [20, 70]. Fully determined by the seed.
/// Edge weights are coupling * exp(-(d/radius)^2); coupling well below 1
/// keeps each node's unit self-loop dominant in N, so the series stays
/// node-identifiable after normalization while neighbors still pull.
SynthResult generate_synthetic(const SynthConfig& config);

}  // namespace sgcn
