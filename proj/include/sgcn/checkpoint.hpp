// Self-describing binary checkpoints: magic + length-prefixed JSON header
// (dims, window, split, train config, tensor table) + raw little-endian f64
// payload. Round-trips restore every tensor bit-exactly.
#pragma once

#include <string>

#include "sgcn/data.hpp"
#include "sgcn/model.hpp"
#include "sgcn/train.hpp"

namespace sgcn {

struct Checkpoint {
  ModelParams params;
  OptState opt;
  Scaler scaler;
  TrainConfig config;
  std::size_t seq_len = 1;
  std::size_t horizon = 1;
  double train_frac = 0.8;
  double val_frac_of_train = 0.1;
};

/// Atomic: writes a temp file next to `path`, then renames.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

Checkpoint load_checkpoint(const std::string& path);

/// Throws naming the first tensor whose shape the requested dims contradict.
void require_dims(const Checkpoint& ckpt, const ModelDims& dims);

/// FNV-1a of the file bytes as a 16-hex-digit run identifier.
std::string checkpoint_digest(const std::string& path);

}  // namespace sgcn
