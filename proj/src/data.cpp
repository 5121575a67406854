#include "sgcn/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sgcn/errors.hpp"
#include "sgcn/rng.hpp"

namespace sgcn {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& field) {
  const std::string t = trim(field);
  return t.empty() || t == "nan" || t == "NaN" || t == "NAN";
}

double parse_double(const std::string& field, std::size_t line_no) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(trim(field), &consumed);
    if (consumed != trim(field).size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" +
                     field + "' as a number");
  }
}

std::size_t parse_index(const std::string& field, std::size_t line_no) {
  try {
    std::size_t consumed = 0;
    const long long v = std::stoll(trim(field), &consumed);
    if (consumed != trim(field).size() || v < 0) throw std::invalid_argument(field);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" +
                     field + "' as a node id");
  }
}

// full round-trip precision for bitwise-reproducible files
void print_double(std::ostream& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

}  // namespace

Scaler Scaler::fit(const Tensor& train_slice, ScalerMode mode) {
  if (train_slice.rank() != 2 || train_slice.dim(0) == 0) {
    throw ValidationError("scaler: training slice must be a non-empty [T x nodes] matrix");
  }
  const std::size_t rows = train_slice.dim(0);
  const std::size_t cols = train_slice.dim(1);
  Scaler s;
  s.mode_ = mode;
  if (mode == ScalerMode::kPerNode) {
    s.mean_ = Tensor({cols});
    s.std_ = Tensor({cols});
    for (std::size_t j = 0; j < cols; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < rows; ++i) m += train_slice(i, j);
      m /= static_cast<double>(rows);
      double var = 0.0;
      for (std::size_t i = 0; i < rows; ++i) {
        const double d = train_slice(i, j) - m;
        var += d * d;
      }
      var /= static_cast<double>(rows);  // population
      s.mean_(j) = m;
      s.std_(j) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
  } else {
    double m = 0.0;
    for (std::size_t i = 0; i < train_slice.size(); ++i) m += train_slice[i];
    m /= static_cast<double>(train_slice.size());
    double var = 0.0;
    for (std::size_t i = 0; i < train_slice.size(); ++i) {
      const double d = train_slice[i] - m;
      var += d * d;
    }
    var /= static_cast<double>(train_slice.size());
    s.mean_ = Tensor({1}, {m});
    s.std_ = Tensor({1}, {var > 0.0 ? std::sqrt(var) : 1.0});
  }
  return s;
}

Scaler Scaler::from_stats(Tensor mean, Tensor stddev, ScalerMode mode) {
  if (!mean.same_shape(stddev)) {
    throw DimensionError("scaler: mean " + mean.shape_str() + " and std " +
                         stddev.shape_str() + " disagree");
  }
  for (std::size_t i = 0; i < stddev.size(); ++i) {
    if (!(stddev[i] > 0.0)) throw ValidationError("scaler: std entries must be > 0");
  }
  Scaler s;
  s.mode_ = mode;
  s.mean_ = std::move(mean);
  s.std_ = std::move(stddev);
  return s;
}

namespace {

template <typename F>
Tensor map_columns(const Tensor& x, const Tensor& mean, const Tensor& stddev,
                   ScalerMode mode, F&& f) {
  if (mean.empty()) throw ValidationError("scaler: not fitted");
  if (x.rank() != 2) {
    throw DimensionError("scaler: expected [rows x nodes], got " + x.shape_str());
  }
  if (mode == ScalerMode::kPerNode && x.dim(1) != mean.dim(0)) {
    throw DimensionError("scaler: fitted for " + std::to_string(mean.dim(0)) +
                         " columns, got " + x.shape_str());
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    for (std::size_t j = 0; j < x.dim(1); ++j) {
      const std::size_t c = mode == ScalerMode::kPerNode ? j : 0;
      out(i, j) = f(x(i, j), mean(c), stddev(c));
    }
  }
  return out;
}

}  // namespace

Tensor Scaler::apply(const Tensor& x) const {
  return map_columns(x, mean_, std_, mode_,
                     [](double v, double m, double s) { return (v - m) / s; });
}

Tensor Scaler::invert(const Tensor& x) const {
  return map_columns(x, mean_, std_, mode_,
                     [](double v, double m, double s) { return v * s + m; });
}

SplitRanges chronological_split(std::size_t timesteps, double train_frac,
                                double val_frac_of_train) {
  if (!(train_frac > 0.0 && train_frac < 1.0) ||
      !(val_frac_of_train > 0.0 && val_frac_of_train < 1.0)) {
    throw ValidationError("chronological_split: fractions must lie in (0,1)");
  }
  if (timesteps < 10) {
    throw ValidationError("chronological_split: need at least 10 timesteps, got " +
                          std::to_string(timesteps));
  }
  const double t = static_cast<double>(timesteps);
  const std::size_t train_end =
      static_cast<std::size_t>(std::floor(t * train_frac * (1.0 - val_frac_of_train)));
  const std::size_t val_end = static_cast<std::size_t>(std::floor(t * train_frac));
  if (train_end == 0 || val_end <= train_end || timesteps <= val_end) {
    throw ValidationError("chronological_split: " + std::to_string(timesteps) +
                          " timesteps leave an empty split");
  }
  return SplitRanges{{0, train_end}, {train_end, val_end}, {val_end, timesteps}};
}

WindowSet make_windows(const Tensor& standardized, std::size_t seq_len,
                       std::size_t horizon) {
  if (standardized.rank() != 2) {
    throw DimensionError("make_windows: expected [T x nodes], got " +
                         standardized.shape_str());
  }
  if (seq_len < 1 || horizon < 1) {
    throw ValidationError("make_windows: seq_len and horizon must be >= 1");
  }
  const std::size_t t = standardized.dim(0);
  const std::size_t nodes = standardized.dim(1);
  if (t + 1 <= seq_len + horizon) {
    throw ValidationError("make_windows: " + std::to_string(t) +
                          " timesteps are too few for seq_len " +
                          std::to_string(seq_len) + " and horizon " +
                          std::to_string(horizon));
  }
  const std::size_t samples = t - seq_len - horizon + 1;
  WindowSet ws;
  ws.seq_len = seq_len;
  ws.horizon = horizon;
  ws.inputs = Tensor({samples, seq_len, nodes});
  ws.targets = Tensor({samples, nodes});
  for (std::size_t s = 0; s < samples; ++s) {
    for (std::size_t k = 0; k < seq_len; ++k) {
      for (std::size_t j = 0; j < nodes; ++j) {
        ws.inputs(s, k, j) = standardized(s + k, j);
      }
    }
    const std::size_t target_row = s + seq_len + horizon - 1;
    for (std::size_t j = 0; j < nodes; ++j) {
      ws.targets(s, j) = standardized(target_row, j);
    }
  }
  return ws;
}

SpeedDataset load_speed_csv(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  SpeedDataset ds;
  ds.node_ids = split_csv_line(trim(line));
  const std::size_t cols = ds.node_ids.size();
  if (cols == 0) throw ParseError(path + ": header has no columns");
  for (auto& id : ds.node_ids) id = trim(id);

  std::vector<double> flat;
  std::vector<bool> missing_flat;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != cols) {
      throw ParseError(path + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(cols) + " fields, got " +
                       std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (is_missing(f)) {
        flat.push_back(0.0);
        missing_flat.push_back(true);
      } else {
        flat.push_back(parse_double(f, line_no));
        missing_flat.push_back(false);
      }
    }
  }
  const std::size_t rows = flat.size() / cols;
  if (rows == 0) throw ParseError(path + ": no data rows");

  // forward-fill; seed a missing column head with the column mean
  for (std::size_t j = 0; j < cols; ++j) {
    double mean_acc = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      if (!missing_flat[i * cols + j]) {
        mean_acc += flat[i * cols + j];
        ++valid;
      }
    }
    if (valid == 0) {
      throw ValidationError(path + ": column '" + ds.node_ids[j] +
                            "' has no valid values");
    }
    const double col_mean = mean_acc / static_cast<double>(valid);
    double last = col_mean;
    for (std::size_t i = 0; i < rows; ++i) {
      double& v = flat[i * cols + j];
      if (missing_flat[i * cols + j]) {
        v = last;
      } else {
        last = v;
      }
    }
  }

  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] < 0.0) {
      throw ValidationError(path + ": negative speed " + std::to_string(flat[i]));
    }
  }
  ds.speeds = Tensor({rows, cols}, std::move(flat));
  return ds;
}

void write_speed_csv(const std::string& path, const SpeedDataset& dataset) {
  std::ofstream out = open_for_write(path);
  for (std::size_t j = 0; j < dataset.node_ids.size(); ++j) {
    if (j) out << ",";
    out << dataset.node_ids[j];
  }
  out << "\n";
  for (std::size_t i = 0; i < dataset.timesteps(); ++i) {
    for (std::size_t j = 0; j < dataset.nodes(); ++j) {
      if (j) out << ",";
      print_double(out, dataset.speeds(i, j));
    }
    out << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

EdgeList load_edge_csv(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const auto header = split_csv_line(trim(line));
  if (header.size() != 3 || trim(header[0]) != "src" || trim(header[1]) != "dst" ||
      trim(header[2]) != "weight") {
    throw ParseError(path + ": expected header 'src,dst,weight'");
  }
  EdgeList list;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      throw ParseError(path + ": line " + std::to_string(line_no) +
                       ": expected 3 fields, got " + std::to_string(fields.size()));
    }
    Edge e;
    e.src = parse_index(fields[0], line_no);
    e.dst = parse_index(fields[1], line_no);
    e.weight = parse_double(fields[2], line_no);
    if (e.weight < 0.0 || !std::isfinite(e.weight)) {
      throw ValidationError(path + ": line " + std::to_string(line_no) +
                            ": negative or non-finite weight");
    }
    list.edges.push_back(e);
    list.num_nodes = std::max({list.num_nodes, e.src + 1, e.dst + 1});
  }
  return list;
}

void write_edge_csv(const std::string& path, const EdgeList& edges) {
  std::ofstream out = open_for_write(path);
  out << "src,dst,weight\n";
  for (const Edge& e : edges.edges) {
    out << e.src << "," << e.dst << ",";
    print_double(out, e.weight);
    out << "\n";
  }
  if (!out) throw IoError("failed while writing '" + path + "'");
}

void pair_with_dataset(EdgeList& edges, const SpeedDataset& dataset) {
  if (edges.num_nodes > dataset.nodes()) {
    throw ValidationError("graph references " + std::to_string(edges.num_nodes) +
                          " nodes but the dataset has " +
                          std::to_string(dataset.nodes()) + " sensors");
  }
  edges.num_nodes = dataset.nodes();
}

namespace {

bool connected(const EdgeList& list) {
  const std::size_t n = list.num_nodes;
  std::vector<std::vector<std::size_t>> adj(n);
  for (const Edge& e : list.edges) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

EdgeList sample_geometric_graph(std::size_t n, double radius, double coupling, Rng& rng) {
  constexpr int kMaxAttempts = 64;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<double> px(n), py(n);
    for (std::size_t i = 0; i < n; ++i) {
      px[i] = rng.uniform();
      py[i] = rng.uniform();
    }
    EdgeList list;
    list.num_nodes = n;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = px[i] - px[j];
        const double dy = py[i] - py[j];
        const double d = std::sqrt(dx * dx + dy * dy);
        if (d <= radius) {
          // Gaussian kernel: closer segments correlate more strongly
          list.edges.push_back({i, j, coupling * std::exp(-(d / radius) * (d / radius))});
        }
      }
    }
    if (connected(list)) return list;
  }
  throw ValidationError("generate_synthetic: no connected geometric graph after 64 attempts; "
                        "increase the radius");
}

}  // namespace

SynthResult generate_synthetic(const SynthConfig& config) {
  if (config.nodes < 2) {
    throw ValidationError("generate_synthetic: need at least 2 nodes");
  }
  if (config.timesteps < 100) {
    throw ValidationError("generate_synthetic: need at least 100 timesteps");
  }
  if (!(config.beta >= 0.0 && config.beta <= 1.0)) {
    throw ValidationError("generate_synthetic: beta must lie in [0,1]");
  }
  if (config.period <= 0.0 || config.sigma < 0.0 || config.radius <= 0.0) {
    throw ValidationError("generate_synthetic: period and radius must be > 0, sigma >= 0");
  }
  if (!(config.coupling > 0.0 && config.coupling <= 1.0)) {
    throw ValidationError("generate_synthetic: coupling must lie in (0,1]");
  }

  Rng rng(config.seed);
  SynthResult out;
  out.edges = sample_geometric_graph(config.nodes, config.radius, config.coupling, rng);
  const SparseAdjacency norm = normalize_adjacency(build_adjacency(out.edges, true));

  const std::size_t n = config.nodes;
  const std::size_t t_total = config.timesteps;
  Tensor speeds({t_total, n});
  for (std::size_t i = 0; i < n; ++i) speeds(0, i) = rng.uniform(20.0, 70.0);

  Tensor current({n, 1});
  for (std::size_t i = 0; i < n; ++i) current(i, 0) = speeds(0, i);
  for (std::size_t t = 0; t + 1 < t_total; ++t) {
    const Tensor diffused = spmm(norm, current);
    const double forcing =
        config.amplitude * std::sin(2.0 * kPi * static_cast<double>(t) / config.period);
    for (std::size_t i = 0; i < n; ++i) {
      double next = (1.0 - config.beta) * current(i, 0) + config.beta * diffused(i, 0) +
                    forcing + rng.normal(0.0, config.sigma);
      if (next < 0.0) next = 0.0;
      current(i, 0) = next;
      speeds(t + 1, i) = next;
    }
  }

  out.dataset.speeds = std::move(speeds);
  out.dataset.node_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.dataset.node_ids.push_back("sensor_" + std::to_string(i));
  }
  return out;
}

}  // namespace sgcn
