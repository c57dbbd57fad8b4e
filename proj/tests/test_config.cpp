#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "projbnn/config.hpp"

using namespace projbnn;

TEST_CASE("empty config yields the reference defaults") {
  const RunConfig cfg = parse_run_config("{}");
  CHECK(cfg.dataset.kind == "toy-rbf");
  CHECK(cfg.split.kind == SplitKind::random);
  CHECK(cfg.split.train_frac == 0.8);
  CHECK(cfg.split.valid_frac == 0.1);
  CHECK(cfg.target.layer_sizes.empty());

  CHECK(cfg.fge.map_lr == 0.001);
  CHECK(cfg.fge.lr_max == 0.01);
  CHECK(cfg.fge.lr_min == 0.0001);
  CHECK(cfg.fge.cycle_epochs == 10);
  CHECK(cfg.fge.snapshots == 500);
  CHECK(cfg.fge.keep_top_k == 150);
  CHECK(cfg.fge.batch_size == 128);

  CHECK(cfg.pcae.beta == 1.0);
  CHECK(cfg.pcae.input_noise_std == 1.0);
  CHECK(cfg.pcae.lr == 0.001);
  CHECK(cfg.pcae.iterations == 50000);

  CHECK(cfg.vi.mc_samples == 20);
  CHECK(cfg.vi.max_iterations == 50000);
  CHECK(cfg.vi.early_stop_patience == 30);
  CHECK(cfg.vi.check_every == 100);
  CHECK(cfg.vi.eval_samples == 20);
  CHECK(cfg.vi.batch_size == 128);
  CHECK(cfg.vi.phi_logstd_init_mean == -9.0);

  CHECK(cfg.method == Method::projbnn);
  CHECK(cfg.latent_grid == std::vector<int>{2, 10, 50, 100});
  CHECK(cfg.lr_grid == std::vector<double>{0.1, 0.01, 0.001, 0.0001});
  CHECK(cfg.eval.samples == 500);
  CHECK(cfg.sigma_y == 0.1);
  CHECK(cfg.prior_variance == 0.1);
  CHECK(cfg.scale == 1.0);
  cfg.validate();
}

TEST_CASE("nested overrides are applied") {
  const RunConfig cfg = parse_run_config(R"({
    "dataset": {"kind": "four-modes", "per_mode": 10},
    "split": {"kind": "extrapolation", "train_frac": 0.7, "valid_frac": 0.2},
    "target": {"layers": [1, 5, 1], "activation": "tanh"},
    "fge": {"snapshots": 60, "keep_top_k": 30},
    "pcae": {"beta": 0.0},
    "vi": {"max_iterations": 500, "lr": 0.05},
    "method": "linear",
    "latent_grid": [2],
    "lr_grid": [0.01],
    "eval": {"samples": 50},
    "sigma_y": 0.2,
    "seed": 7,
    "out_dir": "elsewhere",
    "scale": 0.5
  })");
  CHECK(cfg.dataset.kind == "four-modes");
  CHECK(cfg.dataset.per_mode == 10);
  CHECK(cfg.split.kind == SplitKind::extrapolation);
  CHECK(cfg.split.train_frac == 0.7);
  CHECK(cfg.split.valid_frac == 0.2);
  CHECK(cfg.target.layer_sizes == std::vector<int>{1, 5, 1});
  CHECK(cfg.fge.snapshots == 60);
  CHECK(cfg.fge.keep_top_k == 30);
  CHECK(cfg.pcae.beta == 0.0);
  CHECK(cfg.vi.max_iterations == 500);
  CHECK(cfg.vi.lr == 0.05);
  CHECK(cfg.method == Method::linear);
  CHECK(cfg.latent_grid == std::vector<int>{2});
  CHECK(cfg.lr_grid == std::vector<double>{0.01});
  CHECK(cfg.eval.samples == 50);
  CHECK(cfg.sigma_y == 0.2);
  CHECK(cfg.seed == 7);
  CHECK(cfg.out_dir == "elsewhere");
  CHECK(cfg.scale == 0.5);
  cfg.validate();
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"bogus": 1})"), doctest::Contains("bogus"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"dataset": {"rows": 5}})"), doctest::Contains("rows"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"vi": {"learning_rate": 0.1}})"), doctest::Contains("learning_rate"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_run_config(R"({"fge": {"seed": 3}})"), doctest::Contains("seed"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config("["), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config("[1, 2]"), std::invalid_argument);
}

TEST_CASE("bad enum values are rejected") {
  CHECK_THROWS_AS(parse_run_config(R"({"method": "ensemble"})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"split": {"kind": "doughnut"}})"), std::invalid_argument);
  CHECK_THROWS_AS(parse_run_config(R"({"target": {"layers": [1, 1], "activation": "sigmoid"}})"),
                  std::invalid_argument);
}

TEST_CASE("validation catches inconsistent configs") {
  RunConfig cfg;
  cfg.dataset.kind = "csv";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);  // csv without a path

  cfg = RunConfig{};
  cfg.lr_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = RunConfig{};
  cfg.sigma_y = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  cfg = RunConfig{};
  cfg.split.train_frac = 0.99;
  cfg.split.valid_frac = 0.02;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("scale shrinks the iteration budgets proportionally") {
  RunConfig cfg;
  cfg.scale = 0.01;
  const RunConfig scaled = apply_scale(cfg);
  CHECK(scaled.fge.map_iterations == 50);
  CHECK(scaled.fge.snapshots == 5);
  CHECK(scaled.fge.keep_top_k == 2);  // round(1.5) capped by the snapshot count
  CHECK(scaled.pcae.iterations == 500);
  CHECK(scaled.vi.max_iterations == 500);
  CHECK(scaled.scale == 1.0);

  // Budgets never scale to zero.
  cfg.scale = 1e-9;
  const RunConfig floor = apply_scale(cfg);
  CHECK(floor.fge.snapshots == 1);
  CHECK(floor.fge.keep_top_k == 1);
  CHECK(floor.vi.max_iterations == 1);

  // Unit scale is the identity.
  cfg.scale = 1.0;
  const RunConfig same = apply_scale(cfg);
  CHECK(same.fge.snapshots == 500);
  CHECK(same.vi.max_iterations == 50000);
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::projbnn, Method::bbb, Method::linear, Method::one_stage, Method::qz_only, Method::meta}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(method_from_string("gibbs"), std::invalid_argument);
}
