#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "helpers.hpp"
#include "sgcn/data.hpp"
#include "sgcn/errors.hpp"
#include "sgcn/graph.hpp"
#include "sgcn/metrics.hpp"
#include "sgcn/model.hpp"
#include "sgcn/rng.hpp"
#include "sgcn/tensor.hpp"
#include "sgcn/train.hpp"

using sgcn::ModelParams;
using sgcn::OptState;
using sgcn::SparseAdjacency;
using sgcn::Tensor;
using sgcn::TrainConfig;
using testutil::bitwise_equal;
using testutil::random_tensor;

namespace {

struct Problem {
  SparseAdjacency graph;
  sgcn::WindowSet train;
  sgcn::WindowSet val;
};

/// Standardized windows over a small synthetic series.
Problem make_problem(std::size_t nodes, std::size_t timesteps, std::uint64_t seed,
                     std::size_t seq_len = 1) {
  sgcn::SynthConfig cfg;
  cfg.nodes = nodes;
  cfg.timesteps = timesteps;
  cfg.seed = seed;
  sgcn::SynthResult r = sgcn::generate_synthetic(cfg);
  sgcn::SplitRanges split = sgcn::chronological_split(timesteps);
  sgcn::Scaler scaler = sgcn::Scaler::fit(
      sgcn::slice_rows(r.dataset.speeds, split.train.begin, split.train.end),
      sgcn::ScalerMode::kPerNode);
  Tensor z = scaler.apply(r.dataset.speeds);
  Problem p{sgcn::normalize_adjacency(sgcn::build_adjacency(r.edges, true)),
            sgcn::make_windows(sgcn::slice_rows(z, split.train.begin, split.train.end),
                               seq_len, 1),
            sgcn::make_windows(sgcn::slice_rows(z, split.val.begin, split.val.end),
                               seq_len, 1)};
  return p;
}

}  // namespace

TEST_CASE("combined loss hand example") {
  Tensor y_pred({1}, {2.0});
  Tensor y_true({1}, {0.0});
  sgcn::LossResult r = sgcn::combined_loss(y_pred, y_true, 0.7);
  CHECK(r.loss == doctest::Approx(2.6).epsilon(1e-15));
  // d/dy of 0.7|e| + 0.3 e^2 at e=2: 0.7 + 1.2.
  CHECK(r.d_ypred(0) == doctest::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("perfect predictions give zero loss and zero gradient") {
  sgcn::Rng rng(71);
  Tensor y = random_tensor({3, 4}, rng);
  sgcn::LossResult r = sgcn::combined_loss(y, y, 0.7);
  CHECK(r.loss == 0.0);
  for (double v : r.d_ypred.raw()) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("alpha endpoints reduce to the pure metrics") {
  sgcn::Rng rng(72);
  Tensor y_pred = random_tensor({40}, rng);
  Tensor y_true = random_tensor({40}, rng);
  sgcn::MetricReport m = sgcn::compute_metrics(y_pred, y_true, "standardized");
  CHECK(sgcn::combined_loss(y_pred, y_true, 0.0).loss ==
        doctest::Approx(m.mse).epsilon(1e-12));
  CHECK(sgcn::combined_loss(y_pred, y_true, 1.0).loss ==
        doctest::Approx(m.mae).epsilon(1e-12));
}

TEST_CASE("loss gradient matches finite differences away from the kink") {
  sgcn::Rng rng(73);
  Tensor y_true = random_tensor({12}, rng);
  Tensor y_pred = y_true;
  for (std::size_t i = 0; i < y_pred.size(); ++i) {
    const double off = rng.uniform(0.2, 1.0);
    y_pred[i] += (rng.uniform() < 0.5) ? -off : off;
  }
  sgcn::LossResult r = sgcn::combined_loss(y_pred, y_true, 0.7);
  auto f = [&](const Tensor& cand) { return sgcn::combined_loss(cand, y_true, 0.7).loss; };
  CHECK(sgcn::finite_difference_check(f, y_pred, r.d_ypred, 1e-6) < 1e-6);
}

TEST_CASE("loss validates shapes and the subgradient at zero error is zero") {
  CHECK_THROWS_AS(sgcn::combined_loss(Tensor({2}), Tensor({3}), 0.7),
                  sgcn::DimensionError);
  Tensor same({2}, {1.0, -4.0});
  sgcn::LossResult r = sgcn::combined_loss(same, same, 1.0);
  for (double v : r.d_ypred.raw()) {
    CHECK(v == 0.0);
  }
}

TEST_CASE("gradient clipping scales by the global norm") {
  ModelParams p = sgcn::init_params({1, 2, 1}, 1);
  p.zero_grads();
  p.b0.grad = Tensor({2}, {3.0, 4.0});
  const double pre = sgcn::clip_gradients(p, 1.0);
  CHECK(pre == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(p.b0.grad(0) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(p.b0.grad(1) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(sgcn::gradient_global_norm(p) <= 1.0 + 1e-12);
}

TEST_CASE("gradients under the threshold pass through untouched") {
  ModelParams p = sgcn::init_params({1, 2, 1}, 2);
  p.zero_grads();
  p.b0.grad = Tensor({2}, {0.3, -0.4});
  Tensor before = p.b0.grad;
  sgcn::clip_gradients(p, 1.0);
  CHECK(bitwise_equal(p.b0.grad, before));
}

TEST_CASE("post-clip norm respects the bound on random gradients") {
  sgcn::Rng rng(74);
  for (int trial = 0; trial < 5; ++trial) {
    ModelParams p = sgcn::init_params({1, 3, 3}, 40 + static_cast<std::uint64_t>(trial));
    for (sgcn::GradPair* gp : p.all()) {
      for (double& v : gp->grad.raw()) {
        v = rng.uniform(-3.0, 3.0);
      }
    }
    sgcn::clip_gradients(p, 1.0);
    CHECK(sgcn::gradient_global_norm(p) <= 1.0 + 1e-12);
  }
}

TEST_CASE("non-finite gradients abort the clip") {
  ModelParams p = sgcn::init_params({1, 2, 1}, 3);
  p.zero_grads();
  p.b0.grad(0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(sgcn::clip_gradients(p, 1.0), sgcn::NumericError);
}

TEST_CASE("first optimizer step has the closed-form magnitude") {
  ModelParams p = sgcn::init_params({1, 1, 1}, 4);
  for (sgcn::GradPair* gp : p.all()) {
    for (double& v : gp->value.raw()) {
      v = 0.0;
    }
    for (double& v : gp->grad.raw()) {
      v = 1.0;
    }
  }
  OptState opt = OptState::init(p);
  TrainConfig cfg;
  sgcn::adam_step(p, opt, cfg);
  CHECK(opt.t == 1);
  const double expected = -5e-4 / (1.0 + 1e-8);
  for (const sgcn::GradPair* gp : static_cast<const ModelParams&>(p).all()) {
    for (double v : gp->value.raw()) {
      CHECK(v == doctest::Approx(expected).epsilon(1e-12));
      CHECK(v == doctest::Approx(-4.99999995e-4).epsilon(1e-9));
    }
  }
}

TEST_CASE("zero gradients and zero learning rate leave parameters fixed") {
  ModelParams p = sgcn::init_params({1, 3, 2}, 5);
  p.zero_grads();
  ModelParams before = p;
  OptState opt = OptState::init(p);
  TrainConfig cfg;
  sgcn::adam_step(p, opt, cfg);
  auto pa = p.all();
  auto pb = before.all();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(bitwise_equal(pa[i]->value, pb[i]->value));
  }

  sgcn::Rng rng(75);
  for (sgcn::GradPair* gp : p.all()) {
    for (double& v : gp->grad.raw()) {
      v = rng.uniform(-2.0, 2.0);
    }
  }
  TrainConfig frozen;
  frozen.lr = 0.0;
  CHECK_THROWS_AS(frozen.validate(), sgcn::ValidationError);
  // validate() rejects lr=0 up front, so drive the optimizer directly.
  OptState opt2 = OptState::init(p);
  sgcn::adam_step(p, opt2, frozen);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(bitwise_equal(pa[i]->value, pb[i]->value));
  }
}

TEST_CASE("constant gradient drives a monotone descent") {
  ModelParams p = sgcn::init_params({1, 1, 1}, 6);
  for (sgcn::GradPair* gp : p.all()) {
    for (double& v : gp->value.raw()) {
      v = 0.0;
    }
  }
  OptState opt = OptState::init(p);
  TrainConfig cfg;
  double last = 0.0;
  for (int step = 0; step < 100; ++step) {
    for (sgcn::GradPair* gp : p.all()) {
      for (double& v : gp->grad.raw()) {
        v = 1.0;
      }
    }
    sgcn::adam_step(p, opt, cfg);
    CHECK(p.w0.value(0, 0) < last);
    last = p.w0.value(0, 0);
  }
  CHECK(opt.t == 100);
  for (double v : opt.v.front().raw()) {
    CHECK(v >= 0.0);
  }
}

TEST_CASE("optimizer state mirrors parameter shapes") {
  ModelParams p = sgcn::init_params({1, 4, 3}, 7);
  OptState opt = OptState::init(p);
  auto all = p.all();
  REQUIRE(opt.m.size() == all.size());
  REQUIRE(opt.v.size() == all.size());
  CHECK(opt.t == 0);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(opt.m[i].shape() == all[i]->value.shape());
    CHECK(opt.v[i].shape() == all[i]->value.shape());
  }
}

TEST_CASE("non-finite optimizer input aborts with a diagnostic") {
  ModelParams p = sgcn::init_params({1, 2, 1}, 8);
  p.zero_grads();
  p.w0.grad(0, 0) = std::numeric_limits<double>::infinity();
  OptState opt = OptState::init(p);
  TrainConfig cfg;
  CHECK_THROWS_AS(sgcn::adam_step(p, opt, cfg), sgcn::NumericError);
}

TEST_CASE("config validation rejects out-of-range values") {
  TrainConfig ok;
  CHECK_NOTHROW(ok.validate());
  TrainConfig bad = ok;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(bad.validate(), sgcn::ValidationError);
  bad = ok;
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), sgcn::ValidationError);
  bad = ok;
  bad.patience = 0;
  CHECK_THROWS_AS(bad.validate(), sgcn::ValidationError);
  bad = ok;
  bad.clip_norm = 0.0;
  CHECK_THROWS_AS(bad.validate(), sgcn::ValidationError);
  bad = ok;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), sgcn::ValidationError);
  bad = ok;
  bad.max_epochs = 0;
  CHECK_THROWS_AS(bad.validate(), sgcn::ValidationError);
}

TEST_CASE("predictions are independent of batch size") {
  Problem prob = make_problem(6, 150, 81, 2);
  ModelParams p = sgcn::init_params({1, 4, 4}, 9);
  Tensor one = sgcn::predict_windows(prob.graph, p, prob.train, 1);
  Tensor seven = sgcn::predict_windows(prob.graph, p, prob.train, 7);
  Tensor all = sgcn::predict_windows(prob.graph, p, prob.train, prob.train.count());
  CHECK(bitwise_equal(one, seven));
  CHECK(bitwise_equal(one, all));
}

TEST_CASE("whole-set loss agrees with loss of stacked predictions") {
  Problem prob = make_problem(5, 140, 82);
  ModelParams p = sgcn::init_params({1, 4, 4}, 10);
  TrainConfig cfg;
  cfg.batch_size = 16;
  const double batched = sgcn::evaluate_loss(prob.graph, p, prob.train, cfg);
  Tensor pred = sgcn::predict_windows(prob.graph, p, prob.train, 16);
  const double direct = sgcn::combined_loss(pred, prob.train.targets, cfg.alpha).loss;
  CHECK(batched == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("training runs to max epochs when patience never fires") {
  Problem prob = make_problem(5, 140, 83);
  ModelParams p = sgcn::init_params({1, 4, 4}, 11);
  TrainConfig cfg;
  cfg.max_epochs = 3;
  cfg.patience = 50;
  cfg.batch_size = 32;
  sgcn::TrainRecord rec = sgcn::fit(prob.graph, p, prob.train, prob.val, cfg);
  CHECK(rec.epochs.size() == 3);
  CHECK(rec.stop_reason == "max-epochs");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : rec.epochs) {
    best = std::min(best, e.val_loss);
  }
  CHECK(rec.best_val_loss == best);
}

TEST_CASE("early stopping fires patience epochs past the best and restores it") {
  Problem prob = make_problem(6, 200, 84);
  ModelParams p = sgcn::init_params({1, 8, 8}, 12);
  TrainConfig cfg;
  cfg.lr = 0.05;  // deliberately hot so validation deteriorates quickly
  cfg.patience = 3;
  cfg.max_epochs = 60;
  cfg.batch_size = 32;
  sgcn::TrainRecord rec = sgcn::fit(prob.graph, p, prob.train, prob.val, cfg);
  REQUIRE(rec.stop_reason == "early-stop");
  CHECK(rec.epochs.size() == rec.best_epoch + cfg.patience);
  CHECK(rec.epochs.size() < 60);

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  for (std::size_t i = 0; i < rec.epochs.size(); ++i) {
    if (rec.epochs[i].val_loss < best) {
      best = rec.epochs[i].val_loss;
      best_epoch = i + 1;
    }
  }
  CHECK(rec.best_epoch == best_epoch);
  CHECK(rec.best_val_loss == best);

  // Restored parameters reproduce the recorded best validation loss exactly.
  const double revalidated = sgcn::evaluate_loss(prob.graph, p, prob.val, cfg);
  CHECK(revalidated == rec.best_val_loss);
}

TEST_CASE("identical seeds give identical training records") {
  Problem prob = make_problem(5, 140, 85);
  TrainConfig cfg;
  cfg.max_epochs = 4;
  cfg.batch_size = 16;
  cfg.seed = 99;

  ModelParams p1 = sgcn::init_params({1, 4, 4}, 13);
  sgcn::TrainRecord r1 = sgcn::fit(prob.graph, p1, prob.train, prob.val, cfg);
  ModelParams p2 = sgcn::init_params({1, 4, 4}, 13);
  sgcn::TrainRecord r2 = sgcn::fit(prob.graph, p2, prob.train, prob.val, cfg);

  REQUIRE(r1.epochs.size() == r2.epochs.size());
  for (std::size_t i = 0; i < r1.epochs.size(); ++i) {
    CHECK(r1.epochs[i].train_loss == r2.epochs[i].train_loss);
    CHECK(r1.epochs[i].val_loss == r2.epochs[i].val_loss);
  }
  auto g1 = p1.all();
  auto g2 = p2.all();
  for (std::size_t i = 0; i < g1.size(); ++i) {
    CHECK(bitwise_equal(g1[i]->value, g2[i]->value));
  }
}

TEST_CASE("training loss falls to half its initial value on a tiny problem") {
  Problem prob = make_problem(4, 200, 86);
  ModelParams p = sgcn::init_params({1, 8, 8}, 14);
  TrainConfig cfg;
  cfg.lr = 5e-3;
  cfg.max_epochs = 20;
  cfg.patience = 20;
  cfg.batch_size = 32;
  sgcn::TrainRecord rec = sgcn::fit(prob.graph, p, prob.train, prob.val, cfg);
  REQUIRE(rec.epochs.size() == 20);
  CHECK(rec.epochs[19].train_loss <= 0.5 * rec.epochs[0].train_loss);
}

TEST_CASE("divergent losses abort with the failing location") {
  Problem prob = make_problem(5, 140, 87);
  ModelParams p = sgcn::init_params({1, 4, 4}, 15);
  // Finite but astronomical bias: predictions ~1e308, so the squared-error
  // term of the loss overflows on the first batch.
  p.head_b.value[0] = 1e308;
  TrainConfig cfg;
  cfg.max_epochs = 2;
  try {
    sgcn::fit(prob.graph, p, prob.train, prob.val, cfg);
    FAIL("expected a numeric error");
  } catch (const sgcn::NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("fit validates its window sets") {
  Problem prob = make_problem(5, 140, 88);
  ModelParams p = sgcn::init_params({1, 4, 4}, 16);
  TrainConfig cfg;
  sgcn::WindowSet empty;
  CHECK_THROWS_AS(sgcn::fit(prob.graph, p, empty, prob.val, cfg),
                  sgcn::ValidationError);
}
