// Python bindings for the forecasting core. Tensors cross the boundary as
// copies (numpy float64, C order), so Python never aliases C++ memory.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "sgcn/checkpoint.hpp"
#include "sgcn/data.hpp"
#include "sgcn/errors.hpp"
#include "sgcn/graph.hpp"
#include "sgcn/metrics.hpp"
#include "sgcn/model.hpp"
#include "sgcn/tensor.hpp"
#include "sgcn/train.hpp"

namespace py = pybind11;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

sgcn::Tensor to_tensor(const DoubleArray& arr) {
  std::vector<std::size_t> shape(arr.ndim());
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
    shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arr.shape(i));
  }
  std::vector<double> data(arr.data(), arr.data() + arr.size());
  return sgcn::Tensor(std::move(shape), std::move(data));
}

py::array_t<double> to_array(const sgcn::Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

sgcn::EdgeList edges_from_array(const DoubleArray& arr, std::size_t num_nodes) {
  if (arr.ndim() != 2 || arr.shape(1) != 3) {
    throw sgcn::DimensionError("edges: expected an [E x 3] array of (src, dst, weight)");
  }
  sgcn::EdgeList list;
  const double* p = arr.data();
  for (py::ssize_t e = 0; e < arr.shape(0); ++e, p += 3) {
    if (p[0] < 0 || p[1] < 0) {
      throw sgcn::ValidationError("edges: negative node id");
    }
    list.edges.push_back({static_cast<std::size_t>(p[0]),
                          static_cast<std::size_t>(p[1]), p[2]});
  }
  for (const auto& e : list.edges) {
    list.num_nodes = std::max(list.num_nodes, std::max(e.src, e.dst) + 1);
  }
  list.num_nodes = std::max(list.num_nodes, num_nodes);
  return list;
}

py::array_t<double> edges_to_array(const sgcn::EdgeList& list) {
  py::array_t<double> out({static_cast<py::ssize_t>(list.edges.size()),
                           static_cast<py::ssize_t>(3)});
  double* p = out.mutable_data();
  for (const auto& e : list.edges) {
    *p++ = static_cast<double>(e.src);
    *p++ = static_cast<double>(e.dst);
    *p++ = e.weight;
  }
  return out;
}

py::dict report_to_dict(const sgcn::MetricReport& r) {
  py::dict d;
  d["mae"] = r.mae;
  d["mse"] = r.mse;
  d["rmse"] = r.rmse;
  d["mape"] = r.mape_defined ? py::object(py::float_(r.mape)) : py::object(py::none());
  d["n_samples"] = r.n_samples;
  d["mape_excluded"] = r.mape_excluded;
  d["units"] = r.units;
  return d;
}

/// Graph + parameters + scaler bundle mirroring the CLI's train/eval loop.
class Model {
 public:
  Model(const DoubleArray& edges, std::size_t num_nodes, std::size_t h_g,
        std::size_t h_l, std::uint64_t seed)
      : adjacency_(sgcn::normalize_adjacency(
            sgcn::build_adjacency(edges_from_array(edges, num_nodes), true))) {
    sgcn::ModelDims dims;
    dims.h_g = h_g;
    dims.h_l = h_l;
    params_ = sgcn::init_params(dims, seed);
  }

  Model(sgcn::SparseAdjacency adjacency, sgcn::Checkpoint ckpt)
      : adjacency_(std::move(adjacency)),
        params_(std::move(ckpt.params)),
        scaler_(std::move(ckpt.scaler)),
        seq_len_(ckpt.seq_len),
        horizon_(ckpt.horizon) {}

  std::size_t num_nodes() const { return adjacency_.num_nodes(); }
  std::size_t h_g() const { return params_.dims.h_g; }
  std::size_t h_l() const { return params_.dims.h_l; }
  std::size_t seq_len() const { return seq_len_; }
  std::size_t horizon() const { return horizon_; }

  /// One standardized window [N x nodes] -> standardized prediction [nodes].
  py::array_t<double> predict_window(const DoubleArray& window) const {
    sgcn::Tensor w = to_tensor(window);
    if (w.rank() != 2 || w.dim(1) != adjacency_.num_nodes()) {
      throw sgcn::DimensionError("predict_window: expected [seq_len x " +
                                 std::to_string(adjacency_.num_nodes()) + "]");
    }
    return to_array(sgcn::model_forward(adjacency_, w, params_, nullptr));
  }

  /// Raw mph history [T x nodes] -> mph forecasts for each window it contains,
  /// using the scaler and window geometry captured at fit/load time.
  py::array_t<double> predict_series(const DoubleArray& speeds,
                                     std::size_t batch_size) const {
    if (!scaler_.fitted()) {
      throw sgcn::ValidationError("predict_series: model has no fitted scaler; call fit() or load()");
    }
    sgcn::Tensor z = scaler_.apply(to_tensor(speeds));
    sgcn::WindowSet windows = sgcn::make_windows(z, seq_len_, horizon_);
    sgcn::Tensor pred = sgcn::predict_windows(adjacency_, params_, windows, batch_size);
    return to_array(scaler_.invert(pred));
  }

  py::dict fit(const DoubleArray& speeds, std::size_t seq_len, std::size_t horizon,
               double train_frac, double val_frac_of_train,
               const sgcn::TrainConfig& cfg) {
    sgcn::Tensor raw = to_tensor(speeds);
    if (raw.rank() != 2 || raw.dim(1) != adjacency_.num_nodes()) {
      throw sgcn::DimensionError("fit: speeds must be [T x " +
                                 std::to_string(adjacency_.num_nodes()) + "]");
    }
    cfg.validate();
    seq_len_ = seq_len;
    horizon_ = horizon;
    config_ = cfg;
    train_frac_ = train_frac;
    val_frac_of_train_ = val_frac_of_train;

    sgcn::SplitRanges split =
        sgcn::chronological_split(raw.dim(0), train_frac, val_frac_of_train);
    sgcn::Tensor train_slice = sgcn::slice_rows(raw, split.train.begin, split.train.end);
    scaler_ = sgcn::Scaler::fit(train_slice, sgcn::ScalerMode::kPerNode);
    sgcn::Tensor z = scaler_.apply(raw);

    auto window_slice = [&](const sgcn::IndexRange& r) {
      return sgcn::make_windows(sgcn::slice_rows(z, r.begin, r.end), seq_len, horizon);
    };
    sgcn::WindowSet train_w = window_slice(split.train);
    sgcn::WindowSet val_w = window_slice(split.val);
    sgcn::WindowSet test_w = window_slice(split.test);

    sgcn::TrainRecord rec = sgcn::fit(adjacency_, params_, train_w, val_w, cfg,
                                      {}, &opt_);

    sgcn::Tensor pred = sgcn::predict_windows(adjacency_, params_, test_w,
                                              cfg.batch_size);
    sgcn::Tensor pred_mph = scaler_.invert(pred);
    sgcn::Tensor truth_mph = scaler_.invert(test_w.targets);
    sgcn::MetricReport test = sgcn::compute_metrics(pred_mph, truth_mph, "mph");
    sgcn::Tensor persist_mph =
        scaler_.invert(sgcn::persistence_baseline(test_w));
    sgcn::MetricReport persist = sgcn::compute_metrics(persist_mph, truth_mph, "mph");

    py::dict out;
    py::list train_losses;
    py::list val_losses;
    for (const auto& e : rec.epochs) {
      train_losses.append(e.train_loss);
      val_losses.append(e.val_loss);
    }
    out["train_loss"] = train_losses;
    out["val_loss"] = val_losses;
    out["epochs"] = rec.epochs.size();
    out["best_epoch"] = rec.best_epoch;
    out["best_val_loss"] = rec.best_val_loss;
    out["stop_reason"] = rec.stop_reason;
    out["test"] = report_to_dict(test);
    out["persistence"] = report_to_dict(persist);
    return out;
  }

  void save(const std::string& path) const {
    sgcn::Checkpoint ckpt;
    ckpt.params = params_;
    ckpt.opt = opt_.m.empty() ? sgcn::OptState::init(params_) : opt_;
    ckpt.scaler = scaler_.fitted()
                      ? scaler_
                      : sgcn::Scaler::from_stats(
                            sgcn::Tensor::zeros({adjacency_.num_nodes()}),
                            sgcn::Tensor::full({adjacency_.num_nodes()}, 1.0),
                            sgcn::ScalerMode::kPerNode);
    ckpt.config = config_;
    ckpt.seq_len = seq_len_;
    ckpt.horizon = horizon_;
    ckpt.train_frac = train_frac_;
    ckpt.val_frac_of_train = val_frac_of_train_;
    sgcn::save_checkpoint(ckpt, path);
  }

  static Model load(const std::string& path, const DoubleArray& edges,
                    std::size_t num_nodes) {
    sgcn::Checkpoint ckpt = sgcn::load_checkpoint(path);
    sgcn::SparseAdjacency adjacency = sgcn::normalize_adjacency(
        sgcn::build_adjacency(edges_from_array(edges, num_nodes), true));
    return Model(std::move(adjacency), std::move(ckpt));
  }

 private:
  sgcn::SparseAdjacency adjacency_;
  sgcn::ModelParams params_;
  sgcn::OptState opt_;
  sgcn::Scaler scaler_;
  sgcn::TrainConfig config_;
  std::size_t seq_len_ = 1;
  std::size_t horizon_ = 1;
  double train_frac_ = 0.8;
  double val_frac_of_train_ = 0.1;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Graph-convolution + LSTM traffic forecasting core";

  auto base = py::register_exception<sgcn::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<sgcn::ParseError>(m, "ParseError", base.ptr());
  py::register_exception<sgcn::ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<sgcn::DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<sgcn::IndexError>(m, "IndexError", base.ptr());
  py::register_exception<sgcn::NumericError>(m, "NumericError", base.ptr());
  py::register_exception<sgcn::IoError>(m, "IoError", base.ptr());

  py::class_<sgcn::TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("alpha", &sgcn::TrainConfig::alpha)
      .def_readwrite("lr", &sgcn::TrainConfig::lr)
      .def_readwrite("batch_size", &sgcn::TrainConfig::batch_size)
      .def_readwrite("patience", &sgcn::TrainConfig::patience)
      .def_readwrite("max_epochs", &sgcn::TrainConfig::max_epochs)
      .def_readwrite("clip_norm", &sgcn::TrainConfig::clip_norm)
      .def_readwrite("beta1", &sgcn::TrainConfig::beta1)
      .def_readwrite("beta2", &sgcn::TrainConfig::beta2)
      .def_readwrite("eps", &sgcn::TrainConfig::eps)
      .def_readwrite("seed", &sgcn::TrainConfig::seed)
      .def_readwrite("deterministic", &sgcn::TrainConfig::deterministic);

  m.def(
      "generate_synthetic",
      [](std::size_t nodes, std::size_t timesteps, std::uint64_t seed, double beta,
         double period, double sigma, double amplitude, double radius, double coupling) {
        sgcn::SynthConfig cfg;
        cfg.nodes = nodes;
        cfg.timesteps = timesteps;
        cfg.seed = seed;
        cfg.beta = beta;
        cfg.period = period;
        cfg.sigma = sigma;
        cfg.amplitude = amplitude;
        cfg.radius = radius;
        cfg.coupling = coupling;
        sgcn::SynthResult r = sgcn::generate_synthetic(cfg);
        py::dict out;
        out["speeds"] = to_array(r.dataset.speeds);
        out["edges"] = edges_to_array(r.edges);
        out["node_ids"] = r.dataset.node_ids;
        return out;
      },
      py::arg("nodes") = 20, py::arg("timesteps") = 2000, py::arg("seed") = 0,
      py::arg("beta") = 0.2, py::arg("period") = 288.0, py::arg("sigma") = 1.0,
      py::arg("amplitude") = 2.0, py::arg("radius") = 0.35, py::arg("coupling") = 0.15,
      "Seeded connected geometric graph plus diffusion speed series.");

  m.def(
      "normalized_adjacency",
      [](const DoubleArray& edges, std::size_t num_nodes) {
        sgcn::SparseAdjacency n = sgcn::normalize_adjacency(
            sgcn::build_adjacency(edges_from_array(edges, num_nodes), true));
        const std::size_t d = n.num_nodes();
        sgcn::Tensor dense({d, d});
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            dense(i, j) = n.matrix().at(i, j);
          }
        }
        return to_array(dense);
      },
      py::arg("edges"), py::arg("num_nodes") = 0,
      "Dense D^-1/2 (A+I) D^-1/2 for an (src, dst, weight) edge array.");

  m.def(
      "combined_loss",
      [](const DoubleArray& y_pred, const DoubleArray& y_true, double alpha) {
        sgcn::LossResult r =
            sgcn::combined_loss(to_tensor(y_pred), to_tensor(y_true), alpha);
        return py::make_tuple(r.loss, to_array(r.d_ypred));
      },
      py::arg("y_pred"), py::arg("y_true"), py::arg("alpha") = 0.7,
      "alpha*MAE + (1-alpha)*MSE and its gradient in y_pred.");

  m.def(
      "compute_metrics",
      [](const DoubleArray& y_pred, const DoubleArray& y_true,
         const std::string& units) {
        return report_to_dict(
            sgcn::compute_metrics(to_tensor(y_pred), to_tensor(y_true), units));
      },
      py::arg("y_pred"), py::arg("y_true"), py::arg("units") = "mph",
      "MAE/MSE/RMSE and MAPE over targets with |y| > 1e-3.");

  py::class_<Model>(m, "Model")
      .def(py::init<const DoubleArray&, std::size_t, std::size_t, std::size_t,
                    std::uint64_t>(),
           py::arg("edges"), py::arg("num_nodes") = 0, py::arg("h_g") = 64,
           py::arg("h_l") = 64, py::arg("seed") = 0)
      .def_property_readonly("num_nodes", &Model::num_nodes)
      .def_property_readonly("h_g", &Model::h_g)
      .def_property_readonly("h_l", &Model::h_l)
      .def_property_readonly("seq_len", &Model::seq_len)
      .def_property_readonly("horizon", &Model::horizon)
      .def("predict_window", &Model::predict_window, py::arg("window"))
      .def("predict_series", &Model::predict_series, py::arg("speeds"),
           py::arg("batch_size") = 128)
      .def("fit", &Model::fit, py::arg("speeds"), py::arg("seq_len") = 1,
           py::arg("horizon") = 1, py::arg("train_frac") = 0.8,
           py::arg("val_frac_of_train") = 0.1,
           py::arg("config") = sgcn::TrainConfig{})
      .def("save", &Model::save, py::arg("path"))
      .def_static("load", &Model::load, py::arg("path"), py::arg("edges"),
                  py::arg("num_nodes") = 0);
}
