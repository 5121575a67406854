// Command-line front end: synth | train | eval | predict.
// Defaults < config file < flags; the merged config is written into every
// run's output directory. Exit codes: 0 success, 1 usage, 2 data, 3 numeric.
#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sgcn/checkpoint.hpp"
#include "sgcn/config.hpp"
#include "sgcn/data.hpp"
#include "sgcn/errors.hpp"
#include "sgcn/graph.hpp"
#include "sgcn/metrics.hpp"
#include "sgcn/model.hpp"
#include "sgcn/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgcn;

namespace {

struct StageFailure {
  std::string stage;
  std::string message;
  int code = 2;
};

template <typename F>
auto run_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw StageFailure{stage, e.what(), 3};
  } catch (const Error& e) {
    throw StageFailure{stage, e.what(), 2};
  } catch (const std::exception& e) {
    throw StageFailure{stage, e.what(), 2};
  }
}

void require_set(const std::string& value, const char* what) {
  if (value.empty()) {
    throw StageFailure{"config", std::string("missing required ") + what, 1};
  }
}

std::string path_in(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

void make_out_dir(const std::string& dir) {
  run_stage("write-output", [&] { fs::create_directories(dir); });
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << body;
  if (!out) throw IoError("failed while writing '" + path + "'");
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct LoadedData {
  SpeedDataset ds;
  SparseAdjacency adj;
};

LoadedData load_inputs(const RunConfig& cfg) {
  LoadedData d;
  d.ds = run_stage("data-load", [&] { return load_speed_csv(cfg.speeds); });
  d.adj = run_stage("graph-load", [&] {
    EdgeList el = load_edge_csv(cfg.edges);
    pair_with_dataset(el, d.ds);
    return normalize_adjacency(build_adjacency(el, true));
  });
  return d;
}

json metric_json(const MetricReport& r) {
  json j = {{"mae", r.mae},          {"mse", r.mse},
            {"rmse", r.rmse},        {"n", r.n_samples},
            {"mape_excluded", r.mape_excluded}};
  if (r.mape_defined) {
    j["mape"] = r.mape;
  } else {
    j["mape"] = nullptr;
  }
  return j;
}

int cmd_synth(RunConfig& cfg) {
  if (!cfg.seed_set) {
    std::random_device rd;
    cfg.train.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    cfg.seed_set = true;
  }
  SynthConfig sc;
  sc.nodes = cfg.nodes;
  sc.timesteps = cfg.timesteps;
  sc.seed = cfg.train.seed;
  sc.beta = cfg.beta;
  sc.period = cfg.period;
  sc.sigma = cfg.sigma;
  sc.amplitude = cfg.amplitude;
  sc.radius = cfg.radius;
  sc.coupling = cfg.coupling;

  const SynthResult result =
      run_stage("synth-generate", [&] { return generate_synthetic(sc); });

  make_out_dir(cfg.out);
  run_stage("write-output", [&] {
    write_speed_csv(path_in(cfg.out, "speeds.csv"), result.dataset);
    write_edge_csv(path_in(cfg.out, "edges.csv"), result.edges);
    const json meta = {{"nodes", sc.nodes},     {"timesteps", sc.timesteps},
                       {"seed", sc.seed},       {"beta", sc.beta},
                       {"period", sc.period},   {"sigma", sc.sigma},
                       {"amplitude", sc.amplitude}, {"radius", sc.radius},
                       {"coupling", sc.coupling},
                       {"speeds", "speeds.csv"}, {"edges", "edges.csv"}};
    write_text(path_in(cfg.out, "synth_meta.json"), meta.dump(2) + "\n");
    write_effective_config(cfg, "synth", path_in(cfg.out, "config.effective.ini"));
  });

  std::printf("seed: %llu\n", static_cast<unsigned long long>(sc.seed));
  std::printf("wrote %s, %s (%zu nodes, %zu timesteps, %zu edges)\n",
              path_in(cfg.out, "speeds.csv").c_str(),
              path_in(cfg.out, "edges.csv").c_str(), sc.nodes, sc.timesteps,
              result.edges.edges.size());
  return 0;
}

int cmd_train(RunConfig& cfg) {
  require_set(cfg.speeds, "--speeds");
  require_set(cfg.edges, "--edges");
  if (cfg.h_g == 0) cfg.h_g = 64;
  if (cfg.h_l == 0) cfg.h_l = 64;
  try {
    cfg.train.validate();
  } catch (const Error& e) {
    throw StageFailure{"config", e.what(), 1};
  }

  LoadedData d = load_inputs(cfg);
  const SplitRanges sr = run_stage("split", [&] {
    return chronological_split(d.ds.timesteps(), cfg.train_frac,
                               cfg.val_frac_of_train);
  });
  const ScalerMode mode =
      cfg.scaler_mode == "global" ? ScalerMode::kGlobal : ScalerMode::kPerNode;
  Scaler scaler;
  Tensor standardized;
  run_stage("scale", [&] {
    scaler = Scaler::fit(slice_rows(d.ds.speeds, sr.train.begin, sr.train.end), mode);
    standardized = scaler.apply(d.ds.speeds);
  });
  WindowSet w_train, w_val;
  run_stage("window", [&] {
    w_train = make_windows(slice_rows(standardized, sr.train.begin, sr.train.end),
                           cfg.seq_len, cfg.horizon);
    w_val = make_windows(slice_rows(standardized, sr.val.begin, sr.val.end),
                         cfg.seq_len, cfg.horizon);
  });

  ModelParams params = init_params({1, cfg.h_g, cfg.h_l}, cfg.train.seed);
  OptState opt;
  const TrainRecord record = run_stage("fit", [&] {
    return fit(d.adj, params, w_train, w_val, cfg.train,
               [](std::size_t epoch, const EpochStats& s) {
                 std::printf("epoch %zu train %.6f val %.6f (%.2fs)\n", epoch,
                             s.train_loss, s.val_loss, s.wall_seconds);
                 std::fflush(stdout);
               },
               &opt);
  });

  make_out_dir(cfg.out);
  const std::string ckpt_path = path_in(cfg.out, "checkpoint.sgcn");
  run_stage("checkpoint-save", [&] {
    Checkpoint ckpt;
    ckpt.params = std::move(params);
    ckpt.opt = std::move(opt);
    ckpt.scaler = scaler;
    ckpt.config = cfg.train;
    ckpt.seq_len = cfg.seq_len;
    ckpt.horizon = cfg.horizon;
    ckpt.train_frac = cfg.train_frac;
    ckpt.val_frac_of_train = cfg.val_frac_of_train;
    save_checkpoint(ckpt, ckpt_path);
  });

  run_stage("write-output", [&] {
    std::string log = "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < record.epochs.size(); ++e) {
      log += std::to_string(e + 1) + "," + g17(record.epochs[e].train_loss) + "," +
             g17(record.epochs[e].val_loss) + "\n";
    }
    write_text(path_in(cfg.out, "epoch_log.csv"), log);

    double total_wall = 0.0;
    json walls = json::array();
    for (const EpochStats& s : record.epochs) {
      walls.push_back(s.wall_seconds);
      total_wall += s.wall_seconds;
    }
    const json summary = {{"epochs", record.epochs.size()},
                          {"best_epoch", record.best_epoch},
                          {"best_val_loss", record.best_val_loss},
                          {"stop_reason", record.stop_reason},
                          {"wall_seconds", walls},
                          {"total_wall_seconds", total_wall},
                          {"checkpoint", "checkpoint.sgcn"},
                          {"checkpoint_digest", checkpoint_digest(ckpt_path)}};
    write_text(path_in(cfg.out, "train_summary.json"), summary.dump(2) + "\n");
    write_effective_config(cfg, "train", path_in(cfg.out, "config.effective.ini"));
  });

  std::printf("best epoch %zu (val %.6f), stopped: %s\n", record.best_epoch,
              record.best_val_loss, record.stop_reason.c_str());
  std::printf("wrote %s\n", ckpt_path.c_str());
  return 0;
}

struct EvalSetup {
  Checkpoint ckpt;
  SplitRanges sr;
  Tensor standardized;
};

EvalSetup load_eval_setup(const RunConfig& cfg, const LoadedData& d) {
  EvalSetup s;
  s.ckpt = run_stage("checkpoint-load", [&] {
    Checkpoint c = load_checkpoint(cfg.checkpoint);
    if (cfg.h_g != 0 || cfg.h_l != 0) {
      ModelDims want = c.params.dims;
      if (cfg.h_g != 0) want.h_g = cfg.h_g;
      if (cfg.h_l != 0) want.h_l = cfg.h_l;
      require_dims(c, want);
    }
    return c;
  });
  s.sr = run_stage("split", [&] {
    return chronological_split(d.ds.timesteps(), s.ckpt.train_frac,
                               s.ckpt.val_frac_of_train);
  });
  s.standardized = run_stage("scale", [&] { return s.ckpt.scaler.apply(d.ds.speeds); });
  return s;
}

int cmd_eval(RunConfig& cfg) {
  require_set(cfg.speeds, "--speeds");
  require_set(cfg.edges, "--edges");
  require_set(cfg.checkpoint, "--checkpoint");

  LoadedData d = load_inputs(cfg);
  EvalSetup s = load_eval_setup(cfg, d);

  WindowSet w_test = run_stage("window", [&] {
    return make_windows(slice_rows(s.standardized, s.sr.test.begin, s.sr.test.end),
                        s.ckpt.seq_len, s.ckpt.horizon);
  });

  Tensor preds_std, preds_mph, targets_mph, pers_std, pers_mph;
  MetricReport m_std, m_mph, p_std, p_mph;
  run_stage("eval", [&] {
    preds_std = predict_windows(d.adj, s.ckpt.params, w_test,
                                s.ckpt.config.batch_size);
    preds_mph = s.ckpt.scaler.invert(preds_std);
    targets_mph = s.ckpt.scaler.invert(w_test.targets);
    m_std = compute_metrics(preds_std, w_test.targets, "standardized");
    m_mph = compute_metrics(preds_mph, targets_mph, "mph");
    pers_std = persistence_baseline(w_test);
    pers_mph = s.ckpt.scaler.invert(pers_std);
    p_std = compute_metrics(pers_std, w_test.targets, "standardized");
    p_mph = compute_metrics(pers_mph, targets_mph, "mph");
  });

  make_out_dir(cfg.out);
  const std::size_t t0 = s.sr.test.begin + s.ckpt.seq_len + s.ckpt.horizon - 1;
  const std::size_t fig1_rows = std::min<std::size_t>(w_test.count(), 120);
  run_stage("export", [&] {
    export_timeseries(path_in(cfg.out, "fig1_timeseries.csv"), preds_mph,
                      targets_mph, -1, 0, fig1_rows, t0);
    export_scatter(path_in(cfg.out, "fig2_scatter.csv"), preds_mph, targets_mph);
    export_range(path_in(cfg.out, "fig3_range.csv"), preds_mph, targets_mph, t0);
    const Histogram hist = histogram(residuals(preds_mph, targets_mph), 50);
    export_histogram(path_in(cfg.out, "fig4_residual_hist.csv"), hist);
    const HeatmapGrid grid = error_speed_heatmap(preds_mph, targets_mph, 40, 40);
    export_heatmap(path_in(cfg.out, "fig5_error_speed_heatmap.csv"), grid);

    const json metrics = {
        {"units", {{"standardized", metric_json(m_std)}, {"mph", metric_json(m_mph)}}},
        {"persistence",
         {{"standardized", metric_json(p_std)}, {"mph", metric_json(p_mph)}}},
        {"split",
         {{"train", {s.sr.train.begin, s.sr.train.end}},
          {"val", {s.sr.val.begin, s.sr.val.end}},
          {"test", {s.sr.test.begin, s.sr.test.end}}}},
        {"window", {{"seq_len", s.ckpt.seq_len}, {"horizon", s.ckpt.horizon}}},
        {"n_test_windows", w_test.count()},
        {"checkpoint",
         {{"path", cfg.checkpoint},
          {"digest", checkpoint_digest(cfg.checkpoint)},
          {"adam_t", s.ckpt.opt.t}}},
        {"figures",
         {{"fig1_timeseries.csv",
           {{"units", "mph"}, {"rows", fig1_rows}, {"node", "average"}, {"t0", t0}}},
          {"fig2_scatter.csv", {{"units", "mph"}, {"points", preds_mph.size()}}},
          {"fig3_range.csv", {{"units", "mph"}, {"rows", w_test.count()}, {"t0", t0}}},
          {"fig4_residual_hist.csv", {{"units", "mph"}, {"bins", 50}}},
          {"fig5_error_speed_heatmap.csv",
           {{"units", "mph"}, {"speed_bins", 40}, {"error_bins", 40}}}}}};
    write_text(path_in(cfg.out, "metrics.json"), metrics.dump(2) + "\n");
    write_effective_config(cfg, "eval", path_in(cfg.out, "config.effective.ini"));
  });

  std::printf("test MAE: %.6f standardized, %.6f mph\n", m_std.mae, m_mph.mae);
  std::printf("test RMSE: %.6f standardized, %.6f mph\n", m_std.rmse, m_mph.rmse);
  std::printf("persistence MAE: %.6f standardized, %.6f mph\n", p_std.mae, p_mph.mae);
  std::printf("model/persistence MAE ratio: %.4f\n", m_std.mae / p_std.mae);
  return 0;
}

int cmd_predict(RunConfig& cfg) {
  require_set(cfg.speeds, "--speeds");
  require_set(cfg.edges, "--edges");
  require_set(cfg.checkpoint, "--checkpoint");
  if (cfg.to == 0) {
    throw StageFailure{"config", "missing required --from/--to range", 1};
  }

  LoadedData d = load_inputs(cfg);
  EvalSetup s = load_eval_setup(cfg, d);

  Tensor preds_mph;
  run_stage("predict", [&] {
    const std::size_t t_min = s.ckpt.seq_len + s.ckpt.horizon - 1;
    if (cfg.from < t_min || cfg.to > d.ds.timesteps() || cfg.from >= cfg.to) {
      throw ValidationError("predict: range [" + std::to_string(cfg.from) + "," +
                            std::to_string(cfg.to) + ") must lie within [" +
                            std::to_string(t_min) + "," +
                            std::to_string(d.ds.timesteps()) + ")");
    }
    WindowSet ws;
    ws.seq_len = s.ckpt.seq_len;
    ws.horizon = s.ckpt.horizon;
    const std::size_t samples = cfg.to - cfg.from;
    const std::size_t nodes = d.ds.nodes();
    ws.inputs = Tensor({samples, ws.seq_len, nodes});
    ws.targets = Tensor({samples, nodes});
    for (std::size_t q = 0; q < samples; ++q) {
      const std::size_t row0 = cfg.from + q - s.ckpt.horizon - ws.seq_len + 1;
      for (std::size_t k = 0; k < ws.seq_len; ++k) {
        for (std::size_t j = 0; j < nodes; ++j) {
          ws.inputs(q, k, j) = s.standardized(row0 + k, j);
        }
      }
    }
    const Tensor preds_std =
        predict_windows(d.adj, s.ckpt.params, ws, s.ckpt.config.batch_size);
    preds_mph = s.ckpt.scaler.invert(preds_std);
    for (std::size_t i = 0; i < preds_mph.size(); ++i) {
      if (preds_mph[i] < 0.0) preds_mph[i] = 0.0;  // physical floor
    }
  });

  make_out_dir(cfg.out);
  run_stage("write-output", [&] {
    std::string body = "t";
    for (const std::string& id : d.ds.node_ids) body += "," + id;
    body += "\n";
    for (std::size_t q = 0; q < preds_mph.dim(0); ++q) {
      body += std::to_string(cfg.from + q);
      for (std::size_t j = 0; j < preds_mph.dim(1); ++j) {
        body += "," + g17(preds_mph(q, j));
      }
      body += "\n";
    }
    write_text(path_in(cfg.out, "predictions.csv"), body);
    write_effective_config(cfg, "predict", path_in(cfg.out, "config.effective.ini"));
  });

  std::printf("wrote %s (%zu rows, %zu nodes)\n",
              path_in(cfg.out, "predictions.csv").c_str(), preds_mph.dim(0),
              preds_mph.dim(1));
  return 0;
}

std::string scan_config_flag(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    }
  }
  return path;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatio-temporal traffic speed forecasting (GCN + LSTM)"};
  app.require_subcommand(1);

  RunConfig cfg;
  const std::string config_path = scan_config_flag(argc, argv);
  if (!config_path.empty()) {
    try {
      apply_config_file(cfg, config_path);
    } catch (const Error& e) {
      std::fprintf(stderr, "error [config]: %s\n", e.what());
      return 1;
    }
  }

  std::string config_dummy;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_dummy, "flat key=value config file");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--seed", cfg.train.seed, "RNG seed")
        ->each([&cfg](const std::string&) { cfg.seed_set = true; });
    sub->add_option("--deterministic", cfg.train.deterministic,
                    "deterministic mode (true/false)");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth);
  synth->add_option("--nodes", cfg.nodes, "graph size");
  synth->add_option("--timesteps", cfg.timesteps, "series length");
  synth->add_option("--beta", cfg.beta, "diffusion rate in [0,1]");
  synth->add_option("--period", cfg.period, "sinusoidal forcing period (timesteps)");
  synth->add_option("--sigma", cfg.sigma, "noise standard deviation");
  synth->add_option("--amplitude", cfg.amplitude, "forcing amplitude");
  synth->add_option("--radius", cfg.radius, "geometric graph connection radius");
  synth->add_option("--coupling", cfg.coupling, "peak edge weight in (0,1]");

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train);
  train->add_option("--speeds", cfg.speeds, "speed matrix CSV");
  train->add_option("--edges", cfg.edges, "edge list CSV");
  train->add_option("--h-g", cfg.h_g, "GCN hidden width (default 64)");
  train->add_option("--h-l", cfg.h_l, "LSTM hidden width (default 64)");
  train->add_option("--seq-len", cfg.seq_len, "input window length N");
  train->add_option("--horizon", cfg.horizon, "steps ahead to predict");
  train->add_option("--train-frac", cfg.train_frac, "train+val fraction");
  train->add_option("--val-frac", cfg.val_frac_of_train,
                    "validation fraction of the training side");
  train->add_option("--scaler-mode", cfg.scaler_mode, "per-node or global");
  train->add_option("--alpha", cfg.train.alpha, "MAE weight in the loss");
  train->add_option("--lr", cfg.train.lr, "Adam learning rate");
  train->add_option("--batch-size", cfg.train.batch_size, "mini-batch size");
  train->add_option("--patience", cfg.train.patience, "early-stopping patience");
  train->add_option("--max-epochs", cfg.train.max_epochs, "epoch cap");
  train->add_option("--clip-norm", cfg.train.clip_norm, "global gradient clip");
  train->add_option("--beta1", cfg.train.beta1, "Adam beta1");
  train->add_option("--beta2", cfg.train.beta2, "Adam beta2");
  train->add_option("--eps", cfg.train.eps, "Adam epsilon");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval);
  eval->add_option("--speeds", cfg.speeds, "speed matrix CSV");
  eval->add_option("--edges", cfg.edges, "edge list CSV");
  eval->add_option("--checkpoint", cfg.checkpoint, "checkpoint file");
  eval->add_option("--h-g", cfg.h_g, "expected GCN width (checks the checkpoint)");
  eval->add_option("--h-l", cfg.h_l, "expected LSTM width (checks the checkpoint)");

  CLI::App* predict = app.add_subcommand("predict", "export predictions for a range");
  add_common(predict);
  predict->add_option("--speeds", cfg.speeds, "speed matrix CSV");
  predict->add_option("--edges", cfg.edges, "edge list CSV");
  predict->add_option("--checkpoint", cfg.checkpoint, "checkpoint file");
  predict->add_option("--from", cfg.from, "first target timestep (absolute)");
  predict->add_option("--to", cfg.to, "one past the last target timestep");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (eval->parsed()) return cmd_eval(cfg);
    if (predict->parsed()) return cmd_predict(cfg);
  } catch (const StageFailure& f) {
    std::fprintf(stderr, "error [%s]: %s\n", f.stage.c_str(), f.message.c_str());
    return f.code;
  }
  return 0;
}
