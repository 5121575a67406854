#include "sgcn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "sgcn/errors.hpp"

namespace sgcn {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'S', 'G', 'C', 'N', 'C', 'K', 'P', 'T'};
constexpr int kFormatVersion = 1;

void append_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64(const std::string& bytes, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i]))
         << (8 * i);
  }
  return v;
}

void append_tensor(std::string& out, const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    append_u64(out, std::bit_cast<std::uint64_t>(t[i]));
  }
}

Tensor read_tensor(const std::string& bytes, std::size_t at,
                   const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::bit_cast<double>(read_u64(bytes, at + 8 * i));
  }
  return Tensor(shape, std::move(data));
}

const json& field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw ParseError(std::string("checkpoint: header missing field '") + key + "'");
  }
  return *it;
}

struct NamedTensor {
  std::string name;
  const Tensor* tensor;
};

std::vector<NamedTensor> tensor_table(const Checkpoint& ckpt) {
  std::vector<NamedTensor> table;
  const auto fields = ckpt.params.all();
  const auto& names = ModelParams::names();
  for (std::size_t k = 0; k < fields.size(); ++k) {
    table.push_back({names[k], &fields[k]->value});
  }
  for (std::size_t k = 0; k < fields.size(); ++k) {
    table.push_back({"adam_m_" + names[k], &ckpt.opt.m[k]});
  }
  for (std::size_t k = 0; k < fields.size(); ++k) {
    table.push_back({"adam_v_" + names[k], &ckpt.opt.v[k]});
  }
  table.push_back({"scaler_mean", &ckpt.scaler.mean()});
  table.push_back({"scaler_std", &ckpt.scaler.stddev()});
  return table;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ckpt.params.require_consistent();
  if (ckpt.opt.m.size() != ckpt.params.all().size() ||
      ckpt.opt.v.size() != ckpt.opt.m.size()) {
    throw ValidationError("checkpoint: optimizer state does not match parameters");
  }

  const auto table = tensor_table(ckpt);
  json tensors = json::array();
  std::size_t offset = 0;
  for (const NamedTensor& nt : table) {
    tensors.push_back(
        {{"name", nt.name}, {"shape", nt.tensor->shape()}, {"offset", offset}});
    offset += 8 * nt.tensor->size();
  }

  const json header = {
      {"format_version", kFormatVersion},
      {"dims",
       {{"f_in", ckpt.params.dims.f_in},
        {"h_g", ckpt.params.dims.h_g},
        {"h_l", ckpt.params.dims.h_l}}},
      {"window", {{"seq_len", ckpt.seq_len}, {"horizon", ckpt.horizon}}},
      {"split",
       {{"train_frac", ckpt.train_frac},
        {"val_frac_of_train", ckpt.val_frac_of_train}}},
      {"scaler_mode",
       ckpt.scaler.mode() == ScalerMode::kPerNode ? "per-node" : "global"},
      {"adam_t", ckpt.opt.t},
      {"train_config",
       {{"alpha", ckpt.config.alpha},
        {"lr", ckpt.config.lr},
        {"batch_size", ckpt.config.batch_size},
        {"patience", ckpt.config.patience},
        {"max_epochs", ckpt.config.max_epochs},
        {"clip_norm", ckpt.config.clip_norm},
        {"beta1", ckpt.config.beta1},
        {"beta2", ckpt.config.beta2},
        {"eps", ckpt.config.eps},
        {"seed", ckpt.config.seed},
        {"deterministic", ckpt.config.deterministic}}},
      {"payload_bytes", offset},
      {"tensors", tensors}};

  const std::string header_bytes = header.dump();
  std::string blob;
  blob.reserve(16 + header_bytes.size() + offset);
  blob.append(kMagic, sizeof(kMagic));
  append_u64(blob, header_bytes.size());
  blob += header_bytes;
  for (const NamedTensor& nt : table) append_tensor(blob, *nt.tensor);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open '" + tmp + "' for writing");
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("checkpoint: failed while writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("checkpoint: cannot move '" + tmp + "' to '" + path + "'");
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();

  if (bytes.size() < 16 || bytes.compare(0, 8, kMagic, 8) != 0) {
    throw ParseError("checkpoint: '" + path + "' is not a checkpoint file");
  }
  const std::uint64_t header_len = read_u64(bytes, 8);
  if (bytes.size() < 16 + header_len) {
    throw ParseError("checkpoint: truncated header in '" + path + "'");
  }

  json header;
  try {
    header = json::parse(bytes.substr(16, header_len));
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: malformed header: ") + e.what());
  }

  const int version = field(header, "format_version").get<int>();
  if (version != kFormatVersion) {
    throw ParseError("checkpoint: unsupported format_version " +
                     std::to_string(version));
  }

  Checkpoint ckpt;
  const json& dims = field(header, "dims");
  ModelDims md;
  md.f_in = field(dims, "f_in").get<std::size_t>();
  md.h_g = field(dims, "h_g").get<std::size_t>();
  md.h_l = field(dims, "h_l").get<std::size_t>();

  const json& window = field(header, "window");
  ckpt.seq_len = field(window, "seq_len").get<std::size_t>();
  ckpt.horizon = field(window, "horizon").get<std::size_t>();

  const json& split = field(header, "split");
  ckpt.train_frac = field(split, "train_frac").get<double>();
  ckpt.val_frac_of_train = field(split, "val_frac_of_train").get<double>();

  const std::string mode_str = field(header, "scaler_mode").get<std::string>();
  if (mode_str != "per-node" && mode_str != "global") {
    throw ParseError("checkpoint: unknown scaler_mode '" + mode_str + "'");
  }

  const json& tc = field(header, "train_config");
  ckpt.config.alpha = field(tc, "alpha").get<double>();
  ckpt.config.lr = field(tc, "lr").get<double>();
  ckpt.config.batch_size = field(tc, "batch_size").get<std::size_t>();
  ckpt.config.patience = field(tc, "patience").get<std::size_t>();
  ckpt.config.max_epochs = field(tc, "max_epochs").get<std::size_t>();
  ckpt.config.clip_norm = field(tc, "clip_norm").get<double>();
  ckpt.config.beta1 = field(tc, "beta1").get<double>();
  ckpt.config.beta2 = field(tc, "beta2").get<double>();
  ckpt.config.eps = field(tc, "eps").get<double>();
  ckpt.config.seed = field(tc, "seed").get<std::uint64_t>();
  ckpt.config.deterministic = field(tc, "deterministic").get<bool>();

  const std::uint64_t payload_bytes = field(header, "payload_bytes").get<std::uint64_t>();
  if (bytes.size() != 16 + header_len + payload_bytes) {
    throw ParseError("checkpoint: truncated payload in '" + path + "' (expected " +
                     std::to_string(16 + header_len + payload_bytes) + " bytes, got " +
                     std::to_string(bytes.size()) + ")");
  }

  const json& tensors = field(header, "tensors");
  const auto& names = ModelParams::names();
  std::vector<std::string> expected;
  for (const auto& n : names) expected.push_back(n);
  for (const auto& n : names) expected.push_back("adam_m_" + n);
  for (const auto& n : names) expected.push_back("adam_v_" + n);
  expected.push_back("scaler_mean");
  expected.push_back("scaler_std");
  if (!tensors.is_array() || tensors.size() != expected.size()) {
    throw ParseError("checkpoint: tensor table has " +
                     std::to_string(tensors.size()) + " entries, expected " +
                     std::to_string(expected.size()));
  }

  const std::size_t payload_at = 16 + header_len;
  std::vector<Tensor> loaded;
  for (std::size_t k = 0; k < expected.size(); ++k) {
    const json& entry = tensors[k];
    const std::string name = field(entry, "name").get<std::string>();
    if (name != expected[k]) {
      throw ParseError("checkpoint: tensor " + std::to_string(k) + " is '" + name +
                       "', expected '" + expected[k] + "'");
    }
    const auto shape = field(entry, "shape").get<std::vector<std::size_t>>();
    const std::uint64_t off = field(entry, "offset").get<std::uint64_t>();
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (off + 8 * n > payload_bytes) {
      throw ParseError("checkpoint: tensor '" + name + "' overruns the payload");
    }
    try {
      loaded.push_back(read_tensor(bytes, payload_at + off, shape));
    } catch (const Error& e) {
      throw ParseError("checkpoint: tensor '" + name + "': " + e.what());
    }
  }

  ckpt.params.dims = md;
  const auto fields = ckpt.params.all();
  for (std::size_t k = 0; k < fields.size(); ++k) {
    *fields[k] = GradPair(std::move(loaded[k]));
  }
  try {
    ckpt.params.require_consistent();
  } catch (const Error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }

  ckpt.opt.t = field(header, "adam_t").get<std::uint64_t>();
  for (std::size_t k = 0; k < fields.size(); ++k) {
    Tensor& m = loaded[names.size() + k];
    Tensor& v = loaded[2 * names.size() + k];
    if (!m.same_shape(fields[k]->value) || !v.same_shape(fields[k]->value)) {
      throw ParseError("checkpoint: optimizer state for '" + names[k] +
                       "' does not match its parameter shape");
    }
    ckpt.opt.m.push_back(std::move(m));
    ckpt.opt.v.push_back(std::move(v));
  }

  Tensor& mean = loaded[3 * names.size()];
  Tensor& stddev = loaded[3 * names.size() + 1];
  try {
    ckpt.scaler = Scaler::from_stats(
        std::move(mean), std::move(stddev),
        mode_str == "per-node" ? ScalerMode::kPerNode : ScalerMode::kGlobal);
  } catch (const Error& e) {
    throw ParseError(std::string("checkpoint: scaler: ") + e.what());
  }
  return ckpt;
}

void require_dims(const Checkpoint& ckpt, const ModelDims& dims) {
  const ModelDims& have = ckpt.params.dims;
  if (have.f_in != dims.f_in || have.h_g != dims.h_g) {
    throw DimensionError("checkpoint: w0 has shape " +
                         ckpt.params.w0.value.shape_str() + ", expected (" +
                         std::to_string(dims.f_in) + "x" + std::to_string(dims.h_g) +
                         ") for the configured dims");
  }
  if (have.h_l != dims.h_l) {
    throw DimensionError("checkpoint: lstm_wh has shape " +
                         ckpt.params.lstm_wh.value.shape_str() + ", expected (" +
                         std::to_string(dims.h_l) + "x" +
                         std::to_string(4 * dims.h_l) + ") for the configured dims");
  }
}

std::string checkpoint_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
  std::uint64_t hash = 1469598103934665603ull;  // FNV-1a
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 1099511628211ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(hex);
}

}  // namespace sgcn
