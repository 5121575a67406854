#include "sgcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "sgcn/errors.hpp"

namespace sgcn {

namespace {

void check_pair(const Tensor& y_pred, const Tensor& y_true, const char* op) {
  if (!y_pred.same_shape(y_true)) {
    throw DimensionError(std::string(op) + ": shapes disagree: " +
                         y_pred.shape_str() + " vs " + y_true.shape_str());
  }
  if (y_pred.size() == 0) {
    throw ValidationError(std::string(op) + ": empty input");
  }
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t bins) {
  if (lo == hi) {  // degenerate span
    lo -= 0.5;
    hi += 0.5;
  }
  std::vector<double> edges(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k) {
    edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
  }
  edges.back() = hi;
  return edges;
}

std::size_t bin_of(double v, const std::vector<double>& edges) {
  const std::size_t bins = edges.size() - 1;
  if (v <= edges.front()) return 0;
  if (v >= edges.back()) return bins - 1;
  const double width = (edges.back() - edges.front()) / static_cast<double>(bins);
  const auto idx = static_cast<std::size_t>((v - edges.front()) / width);
  return std::min(idx, bins - 1);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

void print_g17(std::ofstream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

void finish(std::ofstream& out, const std::string& path) {
  if (!out) throw IoError("failed while writing '" + path + "'");
}

}  // namespace

MetricReport compute_metrics(const Tensor& y_pred, const Tensor& y_true,
                             const std::string& units) {
  check_pair(y_pred, y_true, "compute_metrics");
  MetricReport r;
  r.units = units;
  r.n_samples = y_pred.size();
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double pct_sum = 0.0;
  std::size_t pct_n = 0;
  for (std::size_t i = 0; i < y_pred.size(); ++i) {
    const double e = y_pred[i] - y_true[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (std::abs(y_true[i]) > 1e-3) {
      pct_sum += std::abs(e / y_true[i]) * 100.0;
      ++pct_n;
    }
  }
  const double inv_n = 1.0 / static_cast<double>(r.n_samples);
  r.mae = abs_sum * inv_n;
  r.mse = sq_sum * inv_n;
  r.rmse = std::sqrt(r.mse);
  r.mape_excluded = r.n_samples - pct_n;
  r.mape_defined = pct_n > 0;
  r.mape = r.mape_defined ? pct_sum / static_cast<double>(pct_n) : 0.0;
  return r;
}

Tensor residuals(const Tensor& y_pred, const Tensor& y_true) {
  check_pair(y_pred, y_true, "residuals");
  return sub(y_pred, y_true);
}

Histogram histogram(const Tensor& values, std::size_t bins) {
  if (bins < 1) throw ValidationError("histogram: bins must be >= 1");
  if (values.size() == 0) throw ValidationError("histogram: empty input");
  double lo = values[0];
  double hi = values[0];
  for (std::size_t i = 0; i < values.size(); ++i) {
    lo = std::min(lo, values[i]);
    hi = std::max(hi, values[i]);
  }
  Histogram h;
  h.edges = uniform_edges(lo, hi, bins);
  h.counts.assign(bins, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    ++h.counts[bin_of(values[i], h.edges)];
  }
  return h;
}

HeatmapGrid error_speed_heatmap(const Tensor& y_pred_mph, const Tensor& y_true_mph,
                                std::size_t speed_bins, std::size_t error_bins) {
  if (speed_bins < 1 || error_bins < 1) {
    throw ValidationError("heatmap: bins must be >= 1");
  }
  HeatmapGrid grid;
  if (y_pred_mph.size() == 0 && y_true_mph.size() == 0) {
    grid.speed_edges = uniform_edges(0.0, 1.0, speed_bins);
    grid.error_edges = uniform_edges(0.0, 1.0, error_bins);
    grid.log_counts.assign(speed_bins, std::vector<double>(error_bins, 0.0));
    return grid;
  }
  check_pair(y_pred_mph, y_true_mph, "heatmap");

  double s_lo = y_true_mph[0], s_hi = y_true_mph[0];
  double e_lo = y_pred_mph[0] - y_true_mph[0], e_hi = e_lo;
  for (std::size_t i = 0; i < y_true_mph.size(); ++i) {
    const double e = y_pred_mph[i] - y_true_mph[i];
    s_lo = std::min(s_lo, y_true_mph[i]);
    s_hi = std::max(s_hi, y_true_mph[i]);
    e_lo = std::min(e_lo, e);
    e_hi = std::max(e_hi, e);
  }
  grid.speed_edges = uniform_edges(s_lo, s_hi, speed_bins);
  grid.error_edges = uniform_edges(e_lo, e_hi, error_bins);

  std::vector<std::vector<std::size_t>> counts(speed_bins,
                                               std::vector<std::size_t>(error_bins, 0));
  for (std::size_t i = 0; i < y_true_mph.size(); ++i) {
    const std::size_t si = bin_of(y_true_mph[i], grid.speed_edges);
    const std::size_t ei = bin_of(y_pred_mph[i] - y_true_mph[i], grid.error_edges);
    ++counts[si][ei];
  }
  grid.log_counts.assign(speed_bins, std::vector<double>(error_bins, 0.0));
  for (std::size_t s = 0; s < speed_bins; ++s) {
    for (std::size_t e = 0; e < error_bins; ++e) {
      grid.log_counts[s][e] = std::log1p(static_cast<double>(counts[s][e]));
    }
  }
  return grid;
}

Tensor persistence_baseline(const WindowSet& windows) {
  if (windows.count() == 0) throw ValidationError("persistence: no windows");
  Tensor pred({windows.count(), windows.nodes()});
  for (std::size_t s = 0; s < windows.count(); ++s) {
    for (std::size_t j = 0; j < windows.nodes(); ++j) {
      pred(s, j) = windows.inputs(s, windows.seq_len - 1, j);
    }
  }
  return pred;
}

void export_timeseries(const std::string& path, const Tensor& y_pred,
                       const Tensor& y_true, int node, std::size_t begin,
                       std::size_t end, std::size_t t_offset) {
  check_pair(y_pred, y_true, "export_timeseries");
  const std::size_t samples = y_pred.dim(0);
  const std::size_t nodes = y_pred.dim(1);
  if (begin >= end || end > samples) {
    throw ValidationError("export_timeseries: range [" + std::to_string(begin) +
                          "," + std::to_string(end) + ") exceeds " +
                          std::to_string(samples) + " samples");
  }
  if (node >= 0 && static_cast<std::size_t>(node) >= nodes) {
    throw ValidationError("export_timeseries: node " + std::to_string(node) +
                          " out of range");
  }
  std::ofstream out = open_out(path);
  out << "t,actual,predicted\n";
  for (std::size_t s = begin; s < end; ++s) {
    double actual = 0.0;
    double predicted = 0.0;
    if (node < 0) {
      for (std::size_t j = 0; j < nodes; ++j) {
        actual += y_true(s, j);
        predicted += y_pred(s, j);
      }
      actual /= static_cast<double>(nodes);
      predicted /= static_cast<double>(nodes);
    } else {
      actual = y_true(s, static_cast<std::size_t>(node));
      predicted = y_pred(s, static_cast<std::size_t>(node));
    }
    out << (t_offset + s) << ",";
    print_g17(out, actual);
    out << ",";
    print_g17(out, predicted);
    out << "\n";
  }
  finish(out, path);
}

void export_scatter(const std::string& path, const Tensor& y_pred,
                    const Tensor& y_true) {
  check_pair(y_pred, y_true, "export_scatter");
  std::ofstream out = open_out(path);
  out << "actual,predicted\n";
  for (std::size_t i = 0; i < y_pred.size(); ++i) {
    print_g17(out, y_true[i]);
    out << ",";
    print_g17(out, y_pred[i]);
    out << "\n";
  }
  finish(out, path);
}

void export_range(const std::string& path, const Tensor& y_pred,
                  const Tensor& y_true, std::size_t t_offset) {
  check_pair(y_pred, y_true, "export_range");
  const std::size_t samples = y_pred.dim(0);
  const std::size_t nodes = y_pred.dim(1);
  std::ofstream out = open_out(path);
  out << "t,actual_avg,predicted_min,predicted_avg,predicted_max\n";
  for (std::size_t s = 0; s < samples; ++s) {
    double actual = 0.0;
    double avg = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nodes; ++j) {
      actual += y_true(s, j);
      avg += y_pred(s, j);
      lo = std::min(lo, y_pred(s, j));
      hi = std::max(hi, y_pred(s, j));
    }
    actual /= static_cast<double>(nodes);
    avg /= static_cast<double>(nodes);
    out << (t_offset + s) << ",";
    print_g17(out, actual);
    out << ",";
    print_g17(out, lo);
    out << ",";
    print_g17(out, avg);
    out << ",";
    print_g17(out, hi);
    out << "\n";
  }
  finish(out, path);
}

void export_histogram(const std::string& path, const Histogram& hist) {
  std::ofstream out = open_out(path);
  out << "bin_left,bin_right,count\n";
  for (std::size_t k = 0; k < hist.counts.size(); ++k) {
    print_g17(out, hist.edges[k]);
    out << ",";
    print_g17(out, hist.edges[k + 1]);
    out << "," << hist.counts[k] << "\n";
  }
  finish(out, path);
}

void export_heatmap(const std::string& path, const HeatmapGrid& grid) {
  std::ofstream out = open_out(path);
  out << "speed_lo,speed_hi,error_lo,error_hi,log_count\n";
  for (std::size_t s = 0; s < grid.log_counts.size(); ++s) {
    for (std::size_t e = 0; e < grid.log_counts[s].size(); ++e) {
      print_g17(out, grid.speed_edges[s]);
      out << ",";
      print_g17(out, grid.speed_edges[s + 1]);
      out << ",";
      print_g17(out, grid.error_edges[e]);
      out << ",";
      print_g17(out, grid.error_edges[e + 1]);
      out << ",";
      print_g17(out, grid.log_counts[s][e]);
      out << "\n";
    }
  }
  finish(out, path);
}

}  // namespace sgcn
