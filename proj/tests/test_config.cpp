#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <string>

#include "helpers.hpp"
#include "sgcn/config.hpp"
#include "sgcn/errors.hpp"

using sgcn::RunConfig;
using testutil::ScratchDir;

namespace {

void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

}  // namespace

TEST_CASE("config files override defaults key by key") {
  ScratchDir dir("config_basic");
  write_file(dir.file("run.ini"),
             "# training setup\n"
             "lr = 0.001\n"
             "batch_size = 64\n"
             "seq_len = 3\n"
             "out = runs/a   ; trailing comment\n"
             "\n"
             "scaler_mode = global\n"
             "deterministic = false\n");
  RunConfig cfg;
  sgcn::apply_config_file(cfg, dir.file("run.ini"));
  CHECK(cfg.train.lr == 0.001);
  CHECK(cfg.train.batch_size == 64);
  CHECK(cfg.seq_len == 3);
  CHECK(cfg.out == "runs/a");
  CHECK(cfg.scaler_mode == "global");
  CHECK_FALSE(cfg.train.deterministic);
  CHECK_FALSE(cfg.seed_set);  // untouched keys keep their defaults
  CHECK(cfg.train.alpha == 0.7);
}

TEST_CASE("setting the seed marks it as explicit") {
  ScratchDir dir("config_seed");
  write_file(dir.file("run.ini"), "seed = 123\n");
  RunConfig cfg;
  sgcn::apply_config_file(cfg, dir.file("run.ini"));
  CHECK(cfg.train.seed == 123);
  CHECK(cfg.seed_set);
}

TEST_CASE("unknown keys are rejected with their line number") {
  ScratchDir dir("config_unknown");
  write_file(dir.file("run.ini"), "lr = 0.001\nlearning_rate = 5\n");
  RunConfig cfg;
  try {
    sgcn::apply_config_file(cfg, dir.file("run.ini"));
    FAIL("expected a parse error");
  } catch (const sgcn::ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("learning_rate") != std::string::npos);
  }
}

TEST_CASE("sections and malformed values are rejected") {
  ScratchDir dir("config_malformed");
  write_file(dir.file("sections.ini"), "[train]\nlr = 0.001\n");
  RunConfig cfg;
  CHECK_THROWS_AS(sgcn::apply_config_file(cfg, dir.file("sections.ini")),
                  sgcn::ParseError);

  write_file(dir.file("badvalue.ini"), "lr = fast\n");
  CHECK_THROWS_AS(sgcn::apply_config_file(cfg, dir.file("badvalue.ini")),
                  sgcn::ParseError);

  write_file(dir.file("noequals.ini"), "lr\n");
  CHECK_THROWS_AS(sgcn::apply_config_file(cfg, dir.file("noequals.ini")),
                  sgcn::ParseError);

  CHECK_THROWS_AS(sgcn::apply_config_file(cfg, dir.file("missing.ini")),
                  sgcn::IoError);
}

TEST_CASE("effective config round-trips for every subcommand") {
  ScratchDir dir("config_roundtrip");
  RunConfig cfg;
  cfg.speeds = "data/speeds.csv";
  cfg.edges = "data/edges.csv";
  cfg.checkpoint = "out/checkpoint.sgcn";
  cfg.out = "out";
  cfg.h_g = 48;
  cfg.h_l = 24;
  cfg.seq_len = 2;
  cfg.horizon = 3;
  cfg.train_frac = 0.75;
  cfg.val_frac_of_train = 0.2;
  cfg.train.lr = 0.00123456789012345;
  cfg.train.alpha = 0.65;
  cfg.train.batch_size = 96;
  cfg.train.seed = 31;
  cfg.seed_set = true;
  cfg.nodes = 12;
  cfg.timesteps = 500;
  cfg.beta = 0.31;
  cfg.period = 144.0;
  cfg.sigma = 0.5;
  cfg.amplitude = 2.25;
  cfg.radius = 0.4;
  cfg.from = 410;
  cfg.to = 460;

  for (const std::string sub : {"synth", "train", "eval", "predict"}) {
    const std::string path = dir.file(sub + ".ini");
    sgcn::write_effective_config(cfg, sub, path);
    RunConfig back;
    sgcn::apply_config_file(back, path);

    CHECK(back.out == cfg.out);
    CHECK(back.train.seed == cfg.train.seed);
    CHECK(back.train.deterministic == cfg.train.deterministic);
    if (sub == "synth") {
      CHECK(back.nodes == cfg.nodes);
      CHECK(back.timesteps == cfg.timesteps);
      CHECK(back.beta == cfg.beta);
      CHECK(back.period == cfg.period);
      CHECK(back.sigma == cfg.sigma);
      CHECK(back.amplitude == cfg.amplitude);
      CHECK(back.radius == cfg.radius);
    }
    if (sub == "train") {
      CHECK(back.speeds == cfg.speeds);
      CHECK(back.edges == cfg.edges);
      CHECK(back.h_g == cfg.h_g);
      CHECK(back.h_l == cfg.h_l);
      CHECK(back.seq_len == cfg.seq_len);
      CHECK(back.horizon == cfg.horizon);
      CHECK(back.train_frac == cfg.train_frac);
      CHECK(back.val_frac_of_train == cfg.val_frac_of_train);
      CHECK(back.scaler_mode == cfg.scaler_mode);
      CHECK(back.train.alpha == cfg.train.alpha);
      CHECK(back.train.lr == cfg.train.lr);  // %.17g survives the round trip
      CHECK(back.train.batch_size == cfg.train.batch_size);
      CHECK(back.train.patience == cfg.train.patience);
      CHECK(back.train.max_epochs == cfg.train.max_epochs);
      CHECK(back.train.clip_norm == cfg.train.clip_norm);
      CHECK(back.train.beta1 == cfg.train.beta1);
      CHECK(back.train.beta2 == cfg.train.beta2);
      CHECK(back.train.eps == cfg.train.eps);
    }
    if (sub == "eval" || sub == "predict") {
      CHECK(back.checkpoint == cfg.checkpoint);
    }
    if (sub == "predict") {
      CHECK(back.from == cfg.from);
      CHECK(back.to == cfg.to);
    }
  }
}
