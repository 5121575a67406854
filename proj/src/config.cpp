#include "sgcn/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <vector>

#include "sgcn/errors.hpp"

namespace sgcn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError(where + ": cannot parse '" + v + "' as a number");
  }
}

std::size_t to_size(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long d = std::stoll(v, &used);
    if (used != v.size() || d < 0) throw std::invalid_argument(v);
    return static_cast<std::size_t>(d);
  } catch (const std::exception&) {
    throw ParseError(where + ": cannot parse '" + v + "' as a non-negative integer");
  }
}

std::uint64_t to_u64(const std::string& v, const std::string& where) {
  try {
    std::size_t used = 0;
    const unsigned long long d = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError(where + ": cannot parse '" + v + "' as an unsigned integer");
  }
}

bool to_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ParseError(where + ": cannot parse '" + v + "' as a boolean");
}

std::string format_double(double d) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  return buf;
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> format;
};

const std::vector<Key>& schema() {
  static const std::vector<Key> kKeys = {
      {"speeds", [](RunConfig& c, const std::string& v, const std::string&) { c.speeds = v; },
       [](const RunConfig& c) { return c.speeds; }},
      {"edges", [](RunConfig& c, const std::string& v, const std::string&) { c.edges = v; },
       [](const RunConfig& c) { return c.edges; }},
      {"checkpoint", [](RunConfig& c, const std::string& v, const std::string&) { c.checkpoint = v; },
       [](const RunConfig& c) { return c.checkpoint; }},
      {"out", [](RunConfig& c, const std::string& v, const std::string&) { c.out = v; },
       [](const RunConfig& c) { return c.out; }},
      {"h_g", [](RunConfig& c, const std::string& v, const std::string& w) { c.h_g = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.h_g); }},
      {"h_l", [](RunConfig& c, const std::string& v, const std::string& w) { c.h_l = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.h_l); }},
      {"seq_len", [](RunConfig& c, const std::string& v, const std::string& w) { c.seq_len = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.seq_len); }},
      {"horizon", [](RunConfig& c, const std::string& v, const std::string& w) { c.horizon = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.horizon); }},
      {"train_frac", [](RunConfig& c, const std::string& v, const std::string& w) { c.train_frac = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.train_frac); }},
      {"val_frac_of_train", [](RunConfig& c, const std::string& v, const std::string& w) { c.val_frac_of_train = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.val_frac_of_train); }},
      {"scaler_mode", [](RunConfig& c, const std::string& v, const std::string& w) {
         if (v != "per-node" && v != "global") {
           throw ParseError(w + ": scaler_mode must be 'per-node' or 'global'");
         }
         c.scaler_mode = v;
       },
       [](const RunConfig& c) { return c.scaler_mode; }},
      {"alpha", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.alpha = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.train.alpha); }},
      {"lr", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.lr = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.train.lr); }},
      {"batch_size", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.batch_size = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.train.batch_size); }},
      {"patience", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.patience = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.train.patience); }},
      {"max_epochs", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.max_epochs = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.train.max_epochs); }},
      {"clip_norm", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.clip_norm = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.train.clip_norm); }},
      {"beta1", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.beta1 = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.train.beta1); }},
      {"beta2", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.beta2 = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.train.beta2); }},
      {"eps", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.eps = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.train.eps); }},
      {"seed", [](RunConfig& c, const std::string& v, const std::string& w) {
         c.train.seed = to_u64(v, w);
         c.seed_set = true;
       },
       [](const RunConfig& c) { return std::to_string(c.train.seed); }},
      {"deterministic", [](RunConfig& c, const std::string& v, const std::string& w) { c.train.deterministic = to_bool(v, w); },
       [](const RunConfig& c) { return c.train.deterministic ? "true" : "false"; }},
      {"nodes", [](RunConfig& c, const std::string& v, const std::string& w) { c.nodes = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.nodes); }},
      {"timesteps", [](RunConfig& c, const std::string& v, const std::string& w) { c.timesteps = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.timesteps); }},
      {"beta", [](RunConfig& c, const std::string& v, const std::string& w) { c.beta = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.beta); }},
      {"period", [](RunConfig& c, const std::string& v, const std::string& w) { c.period = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.period); }},
      {"sigma", [](RunConfig& c, const std::string& v, const std::string& w) { c.sigma = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.sigma); }},
      {"amplitude", [](RunConfig& c, const std::string& v, const std::string& w) { c.amplitude = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.amplitude); }},
      {"radius", [](RunConfig& c, const std::string& v, const std::string& w) { c.radius = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.radius); }},
      {"coupling", [](RunConfig& c, const std::string& v, const std::string& w) { c.coupling = to_double(v, w); },
       [](const RunConfig& c) { return format_double(c.coupling); }},
      {"from", [](RunConfig& c, const std::string& v, const std::string& w) { c.from = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.from); }},
      {"to", [](RunConfig& c, const std::string& v, const std::string& w) { c.to = to_size(v, w); },
       [](const RunConfig& c) { return std::to_string(c.to); }},
  };
  return kKeys;
}

const Key* find_key(const std::string& name) {
  for (const Key& k : schema()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

std::vector<std::string> keys_for(const std::string& subcommand) {
  std::vector<std::string> keys = {"out", "seed", "deterministic"};
  const auto add = [&keys](std::initializer_list<const char*> more) {
    for (const char* k : more) keys.push_back(k);
  };
  if (subcommand == "synth") {
    add({"nodes", "timesteps", "beta", "period", "sigma", "amplitude", "radius", "coupling"});
  } else if (subcommand == "train") {
    add({"speeds", "edges", "scaler_mode", "train_frac", "val_frac_of_train",
         "seq_len", "horizon", "h_g", "h_l", "alpha", "lr", "batch_size", "patience",
         "max_epochs", "clip_norm", "beta1", "beta2", "eps"});
  } else if (subcommand == "eval") {
    add({"speeds", "edges", "checkpoint"});
  } else if (subcommand == "predict") {
    add({"speeds", "edges", "checkpoint", "from", "to"});
  } else {
    throw ValidationError("unknown subcommand '" + subcommand + "'");
  }
  return keys;
}

}  // namespace

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config: line " + std::to_string(line_no);
    if (line.front() == '[') {
      throw ParseError(where + ": sections are not supported; use flat keys");
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(where + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Key* k = find_key(key);
    if (!k) throw ParseError(where + ": unknown key '" + key + "'");
    k->set(cfg, value, where);
  }
}

void write_effective_config(const RunConfig& cfg, const std::string& subcommand,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("config: cannot open '" + path + "' for writing");
  for (const std::string& name : keys_for(subcommand)) {
    const Key* k = find_key(name);
    out << name << " = " << k->format(cfg) << "\n";
  }
  if (!out) throw IoError("config: failed while writing '" + path + "'");
}

}  // namespace sgcn
