#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include "projbnn/ensemble.hpp"
#include "projbnn/generators.hpp"
#include "projbnn/rng.hpp"

using namespace projbnn;

namespace {

// one observation y = w*x with x = y = 10, sigma_y = 1, prior N(0, 0.1):
// conjugate posterior mean 100/110
Dataset conjugate_point() {
  Dataset d;
  d.x = MatrixXd::Constant(1, 1, 10.0);
  d.y = MatrixXd::Constant(1, 1, 10.0);
  return d;
}

FgeConfig small_cfg() {
  FgeConfig cfg;
  cfg.map_iterations = 4000;
  cfg.map_lr = 0.05;
  cfg.snapshots = 8;
  cfg.keep_top_k = 4;
  cfg.cycle_epochs = 4;
  cfg.batch_size = 64;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("cyclic learning rate endpoints and midpoint") {
  CHECK(cyclic_lr(0, 101, 0.01, 0.0001) == 0.01);
  CHECK(cyclic_lr(100, 101, 0.01, 0.0001) == 0.0001);
  CHECK(cyclic_lr(50, 101, 0.01, 0.0001) == doctest::Approx(0.00505));
  CHECK_THROWS_AS(cyclic_lr(-1, 10, 0.01, 0.001), std::invalid_argument);
  CHECK_THROWS_AS(cyclic_lr(10, 10, 0.01, 0.001), std::invalid_argument);
  CHECK_THROWS_AS(cyclic_lr(0, 1, 0.01, 0.001), std::invalid_argument);
  CHECK_THROWS_AS(cyclic_lr(0, 10, 0.001, 0.01), std::invalid_argument);
}

TEST_CASE("map training reaches the conjugate posterior mean") {
  const LinearModel model{1};
  FgeConfig cfg = small_cfg();
  const VectorXd w =
      train_map_core(model, VectorXd::Zero(1), conjugate_point(), 1.0, std::sqrt(0.1), cfg);
  CHECK(w[0] == doctest::Approx(100.0 / 110.0).epsilon(1e-6));
}

TEST_CASE("zero map iterations returns the initialization untouched") {
  const LinearModel model{1};
  FgeConfig cfg = small_cfg();
  cfg.map_iterations = 0;
  const VectorXd w = train_map_core(model, VectorXd::Constant(1, 0.25), conjugate_point(), 1.0, 1.0, cfg);
  CHECK(w[0] == 0.25);
}

TEST_CASE("map training is deterministic in the seed") {
  const FourModes fm = gen_toy_four_modes(2, 10);
  const auto norm = normalize(fm.data);
  const Splits splits = split(norm.data, SplitSpec{.seed = 5});
  FgeConfig cfg = small_cfg();
  cfg.map_iterations = 50;
  const ObservationModel obs{0.1};
  const WeightVector a = train_map(fm.target_arch, splits, obs, std::sqrt(0.1), cfg);
  const WeightVector b = train_map(fm.target_arch, splits, obs, std::sqrt(0.1), cfg);
  CHECK((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
  cfg.seed = 99;
  const WeightVector c = train_map(fm.target_arch, splits, obs, std::sqrt(0.1), cfg);
  CHECK((a.values - c.values).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("divergence reports the iteration") {
  const LinearModel model{1};
  Dataset d;
  d.x = MatrixXd::Constant(1, 1, 1e3);
  d.y = MatrixXd::Constant(1, 1, 1e3);
  FgeConfig cfg = small_cfg();
  cfg.map_use_adam = false;
  cfg.map_lr = 1e8;
  try {
    train_map_core(model, VectorXd::Constant(1, 1.0), d, 1.0, 1.0, cfg);
    FAIL("expected divergence");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("iteration") != std::string::npos);
  }
}

TEST_CASE("snapshot collection walks cycles and records validation rmse") {
  const FourModes fm = gen_toy_four_modes(4, 12);
  const auto norm = normalize(fm.data);
  const Splits splits = split(norm.data, SplitSpec{.seed = 5});
  FgeConfig cfg = small_cfg();
  cfg.map_iterations = 800;
  const ObservationModel obs{0.1};
  const WeightVector start = train_map(fm.target_arch, splits, obs, std::sqrt(0.1), cfg);
  const SnapshotSet snaps = collect_fge_snapshots(fm.target_arch, start, splits, obs, std::sqrt(0.1), cfg);
  CHECK(snaps.weights.rows() == cfg.snapshots);
  CHECK(snaps.weights.cols() == fm.target_arch.param_count());
  CHECK(snaps.valid_rmse.size() == cfg.snapshots);
  CHECK(snaps.valid_rmse.allFinite());
  CHECK(snaps.arch_fingerprint == fm.target_arch.fingerprint());

  // consecutive snapshots differ (the walk keeps moving)
  CHECK((snaps.weights.row(0) - snaps.weights.row(1)).cwiseAbs().maxCoeff() > 0.0);

  // identical seed and config reproduce the set exactly
  const SnapshotSet again = collect_fge_snapshots(fm.target_arch, start, splits, obs, std::sqrt(0.1), cfg);
  CHECK((again.weights - snaps.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK((again.valid_rmse - snaps.valid_rmse).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("filter_top_k keeps the best rows in stable order") {
  SnapshotSet s;
  s.weights.resize(4, 2);
  s.weights << 0, 0, 1, 1, 2, 2, 3, 3;
  s.valid_rmse.resize(4);
  s.valid_rmse << 3.0, 1.0, 1.0, 2.0;
  const SnapshotSet top = filter_top_k(s, 3);
  REQUIRE(top.weights.rows() == 3);
  CHECK(top.valid_rmse[0] == 1.0);
  CHECK(top.weights(0, 0) == 1.0);  // tie broken by original position
  CHECK(top.valid_rmse[1] == 1.0);
  CHECK(top.weights(1, 0) == 2.0);
  CHECK(top.valid_rmse[2] == 2.0);
  for (Index i = 0; i + 1 < top.valid_rmse.size(); ++i) CHECK(top.valid_rmse[i] <= top.valid_rmse[i + 1]);

  CHECK_THROWS_AS(filter_top_k(s, 5), std::invalid_argument);
  CHECK_THROWS_AS(filter_top_k(s, 0), std::invalid_argument);
}

TEST_CASE("snapshot csv round trip") {
  Architecture arch;
  arch.layer_sizes = {1, 1, 1};
  SnapshotSet s;
  Rng rng(7);
  s.weights = rng.normal_matrix(5, arch.param_count());
  s.valid_rmse = rng.normal_vector(5).cwiseAbs();
  s.arch_fingerprint = arch.fingerprint();

  const auto path = std::filesystem::temp_directory_path() / "projbnn_snaps_test.csv";
  save_snapshots_csv(s, path.string());
  const SnapshotSet back = load_snapshots_csv(path.string(), arch);
  CHECK((back.weights - s.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.valid_rmse - s.valid_rmse).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.arch_fingerprint == arch.fingerprint());

  Architecture other;
  other.layer_sizes = {1, 2, 1};
  CHECK_THROWS_AS(load_snapshots_csv(path.string(), other), std::invalid_argument);
  std::filesystem::remove(path);
}

TEST_CASE("rmse and logmeanexp frozen values") {
  CHECK(rmse(Eigen::Vector2d(3.0, 4.0), Eigen::Vector2d(0.0, 0.0)) == doctest::Approx(std::sqrt(12.5)));
  const Eigen::Vector2d lme(std::log(0.2), std::log(0.4));
  CHECK(logmeanexp(lme) == doctest::Approx(std::log(0.3)).epsilon(1e-12));
  CHECK_THROWS_AS(logmeanexp(VectorXd()), std::invalid_argument);
  CHECK_THROWS_AS(rmse(VectorXd(), VectorXd()), std::invalid_argument);
}
