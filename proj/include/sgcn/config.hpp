// Run configuration shared by every subcommand: defaults, overridden by a
// flat key=value config file, overridden again by command-line flags. The
// merged result is written next to each run's outputs so any run can be
// reproduced from its own directory.
#pragma once

#include <cstdint>
#include <string>

#include "sgcn/train.hpp"

namespace sgcn {

struct RunConfig {
  // paths
  std::string speeds;
  std::string edges;
  std::string checkpoint;
  std::string out = "out";

  // model dims; 0 means "not set" (train falls back to 64, eval/predict to
  // the checkpoint's dims and only verify when set explicitly)
  std::size_t h_g = 0;
  std::size_t h_l = 0;

  // windowing and split
  std::size_t seq_len = 1;
  std::size_t horizon = 1;
  double train_frac = 0.8;
  double val_frac_of_train = 0.1;
  std::string scaler_mode = "per-node";

  TrainConfig train;
  bool seed_set = false;  // synth draws an entropy seed when false

  // synthetic generator
  std::size_t nodes = 20;
  std::size_t timesteps = 2000;
  double beta = 0.2;
  double period = 288.0;
  double sigma = 1.0;
  double amplitude = 2.0;
  double radius = 0.35;
  double coupling = 0.15;

  // predict range: target timesteps [from, to)
  std::size_t from = 0;
  std::size_t to = 0;
};

/// Applies `key = value` lines; '#'/';' comments. Unknown keys, sections, and
/// unparsable values are errors naming the line.
void apply_config_file(RunConfig& cfg, const std::string& path);

/// The subcommand selects which keys are relevant and therefore written.
void write_effective_config(const RunConfig& cfg, const std::string& subcommand,
                            const std::string& path);

}  // namespace sgcn
