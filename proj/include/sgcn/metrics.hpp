// Evaluation metrics (MAE/MSE/RMSE/MAPE), residual analysis, the persistence
// baseline, and plot-ready CSV exports. Pure functions over immutable inputs;
// no rendering happens here.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sgcn/data.hpp"
#include "sgcn/tensor.hpp"

namespace sgcn {

struct MetricReport {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent; meaningful only when mape_defined
  bool mape_defined = false;
  std::size_t n_samples = 0;
  std::size_t mape_excluded = 0;  // targets with |y| <= 1e-3 in these units
  std::string units;              // "standardized" or "mph"
};

MetricReport compute_metrics(const Tensor& y_pred, const Tensor& y_true,
                             const std::string& units);

/// Signed errors e = y_pred - y_true.
Tensor residuals(const Tensor& y_pred, const Tensor& y_true);

struct Histogram {
  std::vector<double> edges;        // bins+1, strictly increasing
  std::vector<std::size_t> counts;  // sums to the input size
};

/// Uniform bins spanning [min, max]; a degenerate span widens by 0.5 each way.
Histogram histogram(const Tensor& values, std::size_t bins);

struct HeatmapGrid {
  std::vector<double> speed_edges;
  std::vector<double> error_edges;
  std::vector<std::vector<double>> log_counts;  // [speed][error], ln(1+count)
};

/// 2-D histogram of (y_true, e) in mph; out-of-range values clamp into the
/// boundary bins.
HeatmapGrid error_speed_heatmap(const Tensor& y_pred_mph, const Tensor& y_true_mph,
                                std::size_t speed_bins, std::size_t error_bins);

/// Naive forecast: the last input frame per node, [S x nodes].
Tensor persistence_baseline(const WindowSet& windows);

/// Rows (t, actual, predicted) for samples [begin, end); node -1 averages
/// across nodes. The t column is t_offset + sample index.
void export_timeseries(const std::string& path, const Tensor& y_pred,
                       const Tensor& y_true, int node, std::size_t begin,
                       std::size_t end, std::size_t t_offset);

/// One (actual, predicted) row per element.
void export_scatter(const std::string& path, const Tensor& y_pred,
                    const Tensor& y_true);

/// Per-sample prediction spread across nodes:
/// (t, actual_avg, predicted_min, predicted_avg, predicted_max).
void export_range(const std::string& path, const Tensor& y_pred,
                  const Tensor& y_true, std::size_t t_offset);

void export_histogram(const std::string& path, const Histogram& hist);

void export_heatmap(const std::string& path, const HeatmapGrid& grid);

}  // namespace sgcn
