#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "projbnn/generators.hpp"
#include "projbnn/multitask.hpp"
#include "support/finite_diff.hpp"

using namespace projbnn;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() / ("projbnn_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

Architecture small_target() {
  Architecture arch;
  arch.layer_sizes = {1, 2, 1};  // 7 weights
  arch.activation = Activation::rbf;
  return arch;
}

Dataset tiny_data(Index n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.x = rng.normal_matrix(n, 1);
  d.y = rng.normal_matrix(n, 1) * 0.3;
  return d;
}

MeanFieldGaussian random_factor(Index n, Rng& rng) {
  MeanFieldGaussian q;
  q.mu = rng.normal_vector(n) * 0.5;
  q.log_std = rng.normal_vector(n) * 0.3;
  return q;
}

Mapping small_decoder(Index d_z, Index d_w) {
  Architecture net;
  net.layer_sizes = {static_cast<int>(d_z), 4, static_cast<int>(d_w)};
  net.activation = Activation::tanh;
  return Mapping::mlp_map(net);
}

double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("task sets validate shape agreement across tasks") {
  TaskSet ts;
  ts.target_arch = small_target();
  CHECK_THROWS_AS(ts.validate(), std::invalid_argument);

  ts.tasks = {tiny_data(24, 1), tiny_data(30, 2)};
  ts.validate();
  CHECK(ts.task_count() == 2);

  TaskSet bad = ts;
  bad.tasks[1].x = MatrixXd::Zero(30, 2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  SplitSpec spec;
  spec.seed = 7;
  const std::vector<Splits> splits = split_tasks(ts, spec);
  REQUIRE(splits.size() == 2);
  CHECK(splits[0].train.n() == 19);
  CHECK(splits[0].valid.n() == 2);
  CHECK(splits[0].test.n() == 3);
  CHECK(splits[1].train.n() == 24);

  // Same base seed reproduces; tasks draw from distinct substreams.
  const std::vector<Splits> again = split_tasks(ts, spec);
  CHECK((splits[0].train.x - again[0].train.x).cwiseAbs().maxCoeff() == 0.0);
  TaskSet twin;
  twin.target_arch = ts.target_arch;
  twin.tasks = {tiny_data(24, 1), tiny_data(24, 1)};
  const std::vector<Splits> tw = split_tasks(twin, spec);
  CHECK((tw[0].train.x - tw[1].train.x).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("meta objective with one task equals the single-task objective") {
  const Architecture target = small_target();
  const Mapping decoder = small_decoder(2, target.param_count());
  const PriorSpec prior{0.0, 0.1};
  const ObservationModel obs{0.3};
  Rng rng(4);
  const MeanFieldGaussian q_z = random_factor(2, rng);
  const MeanFieldGaussian q_phi = random_factor(decoder.param_count(), rng);
  const Dataset d = tiny_data(3, 5);
  const MatrixXd eps = rng.normal_matrix(4, 2 + decoder.param_count());

  const double meta = elbo_meta({q_z}, q_phi, decoder, target, {TaskBatch{d.x, d.y, 3.0}}, obs, prior, eps);
  const double single = elbo_projbnn(q_z, q_phi, decoder, target, d.x, d.y, 3.0, obs, prior, eps);
  CHECK(meta == single);
}

TEST_CASE("shared decoder kl enters the meta objective once") {
  const Architecture target = small_target();
  const Mapping decoder = small_decoder(2, target.param_count());
  const PriorSpec prior{0.0, 0.1};
  const ObservationModel obs{0.1};
  Rng rng(6);

  std::vector<MeanFieldGaussian> q_z;
  std::vector<TaskBatch> batches;
  for (int m = 0; m < 3; ++m) {
    q_z.push_back(random_factor(2, rng));
    batches.push_back(TaskBatch{MatrixXd(0, 1), MatrixXd(0, 1), 0.0});
  }
  const MeanFieldGaussian q_phi = random_factor(decoder.param_count(), rng);
  const MatrixXd eps = rng.normal_matrix(5, 3 * 2 + decoder.param_count());

  double want = -kl_gaussian_diag(q_phi, prior);
  for (const MeanFieldGaussian& q : q_z) want -= kl_gaussian_diag(q, prior);
  const double got = elbo_meta(q_z, q_phi, decoder, target, batches, obs, prior, eps);
  CHECK(got == doctest::Approx(want).epsilon(1e-13));

  // Prior-matched factors make every term vanish.
  std::vector<MeanFieldGaussian> at(2, MeanFieldGaussian::at_prior(7, prior.std_dev()));
  const Mapping id = Mapping::identity_map(target.param_count());
  std::vector<TaskBatch> empty2(2, TaskBatch{MatrixXd(0, 1), MatrixXd(0, 1), 0.0});
  const double zero = elbo_meta(at, MeanFieldGaussian{}, id, target, empty2, obs, prior,
                                rng.normal_matrix(2, 14));
  CHECK(std::abs(zero) < 1e-12);
}

TEST_CASE("meta gradient matches finite differences over two tasks") {
  const Architecture target = small_target();
  const MlpModel model{target};
  const Index d_z = 2;
  const Mapping decoder = small_decoder(d_z, target.param_count());
  const Index d_phi = decoder.param_count();
  const PriorSpec prior{0.0, 0.1};
  const ObservationModel obs{0.5};

  Rng rng(12);
  std::vector<TaskBatch> batches;
  batches.push_back(TaskBatch{rng.normal_matrix(3, 1), rng.normal_matrix(3, 1), 6.0});
  batches.push_back(TaskBatch{rng.normal_matrix(2, 1), rng.normal_matrix(2, 1), 2.0});
  const MatrixXd eps = rng.normal_matrix(3, 2 * d_z + d_phi);

  VectorXd p0(2 * 2 * d_z + 2 * d_phi);
  p0.head(2 * 2 * d_z) = rng.normal_vector(2 * 2 * d_z) * 0.4;
  p0.segment(2 * 2 * d_z, d_phi) = rng.normal_vector(d_phi) * 0.4;
  p0.tail(d_phi) = (rng.normal_vector(d_phi) * 0.3).array() - 1.0;

  const auto unpack = [&](const VectorXd& p) {
    std::vector<MeanFieldGaussian> q_z(2);
    for (Index m = 0; m < 2; ++m) {
      q_z[static_cast<std::size_t>(m)].mu = p.segment(2 * m * d_z, d_z);
      q_z[static_cast<std::size_t>(m)].log_std = p.segment(2 * m * d_z + d_z, d_z);
    }
    MeanFieldGaussian q_phi;
    q_phi.mu = p.segment(4 * d_z, d_phi);
    q_phi.log_std = p.segment(4 * d_z + d_phi, d_phi);
    return std::make_pair(q_z, q_phi);
  };
  const auto direct = [&](const VectorXd& p) {
    const auto [q_z, q_phi] = unpack(p);
    return elbo_meta(q_z, q_phi, decoder, target, batches, obs, prior, eps);
  };

  ad::GradientWorkspace ws;
  VectorXd grad;
  const double value = ws.value_and_grad(
      [&](const VectorX<ad::Var>& p) {
        std::vector<VectorX<ad::Var>> mu_z(2);
        std::vector<VectorX<ad::Var>> log_std_z(2);
        for (Index m = 0; m < 2; ++m) {
          mu_z[static_cast<std::size_t>(m)] = p.segment(2 * m * d_z, d_z);
          log_std_z[static_cast<std::size_t>(m)] = p.segment(2 * m * d_z + d_z, d_z);
        }
        const VectorX<ad::Var> mu_phi = p.segment(4 * d_z, d_phi);
        const VectorX<ad::Var> log_std_phi = p.segment(4 * d_z + d_phi, d_phi);
        return elbo_core<ad::Var>(decoder, model, batches, mu_z, log_std_z, mu_phi, log_std_phi,
                                  VectorXd(0), eps, obs.sigma_y, prior);
      },
      p0, grad);

  CHECK(value == doctest::Approx(direct(p0)).epsilon(1e-12));
  const VectorXd fd = testsupport::central_diff(direct, p0);
  CHECK(testsupport::max_mixed_err(grad, fd) < 1e-6);
}

TEST_CASE("meta training with one task matches the one-stage ablation bitwise") {
  const Architecture target = small_target();
  const Splits sp{tiny_data(16, 30), tiny_data(4, 31), tiny_data(4, 32)};
  const ObservationModel obs{0.1};
  const PriorSpec prior{0.0, 0.1};

  AutoencoderParams ae;
  ae.encoder = Mapping::affine_map(target.param_count(), 2);
  ae.decoder = small_decoder(2, target.param_count());
  Rng init(33);
  ae.theta = init.normal_vector(ae.encoder.param_count()) * 0.3;
  ae.phi = init.normal_vector(ae.decoder.param_count()) * 0.3;
  ae.target_fingerprint = target.fingerprint();

  VarInferenceConfig cfg;
  cfg.mc_samples = 4;
  cfg.lr = 0.01;
  cfg.max_iterations = 30;
  cfg.check_every = 10;
  cfg.eval_samples = 4;
  cfg.batch_size = 8;
  cfg.seed = 11;

  const VIFit os = train_ablation(AblationKind::one_stage, target, ae, sp, obs, prior, cfg);
  const VIFit mt = train_meta(target, ae.decoder, {sp}, obs, prior, cfg);
  CHECK(os.method == "one_stage");
  CHECK(mt.method == "meta");
  REQUIRE(os.elbo_trace.size() == mt.elbo_trace.size());
  for (std::size_t i = 0; i < os.elbo_trace.size(); ++i) CHECK(os.elbo_trace[i] == mt.elbo_trace[i]);
  CHECK((os.q_phi.mu - mt.q_phi.mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK((os.q_phi.log_std - mt.q_phi.log_std).cwiseAbs().maxCoeff() == 0.0);
  CHECK((os.latent().mu - mt.latent().mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK((os.latent().log_std - mt.latent().log_std).cwiseAbs().maxCoeff() == 0.0);
  CHECK(os.best_iteration == mt.best_iteration);
}

TEST_CASE("meta training separates task latents on a sine family") {
  const SineTasks sines = gen_sine_tasks(3, 48, 2);
  REQUIRE(sines.amplitude.cwiseAbs().minCoeff() > 0.5);

  Architecture target;
  target.layer_sizes = {1, 8, 1};
  target.activation = Activation::tanh;
  TaskSet ts;
  ts.tasks = sines.tasks;
  ts.target_arch = target;
  SplitSpec spec;
  spec.seed = 13;
  const std::vector<Splits> tasks = split_tasks(ts, spec);

  const Mapping decoder = small_decoder(2, target.param_count());
  const ObservationModel obs{0.1};
  const PriorSpec prior{0.0, 0.1};
  VarInferenceConfig cfg;
  cfg.mc_samples = 5;
  cfg.lr = 0.01;
  cfg.max_iterations = 3000;
  cfg.check_every = 200;
  cfg.eval_samples = 10;
  cfg.batch_size = 16;
  cfg.seed = 14;

  const VIFit fit = train_meta(target, decoder, tasks, obs, prior, cfg);
  REQUIRE(fit.q_z.size() == 3);
  CHECK(fit.q_phi.size() == decoder.param_count());

  // Distinct functions need distinct codes, and every per-task mean fit must
  // beat predicting the task average.
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b) CHECK((fit.q_z[a].mu - fit.q_z[b].mu).norm() > 1e-3);
  for (std::size_t m = 0; m < 3; ++m) {
    const Dataset& train = tasks[m].train;
    const VectorXd w = decoder.apply<double>(fit.q_phi.mu, fit.q_z[m].mu);
    VectorXd pred(train.n());
    VectorXd xv(1);
    for (Index n = 0; n < train.n(); ++n) {
      xv[0] = train.x(n, 0);
      pred[n] = mlp_forward(target, w, xv)[0];
    }
    const double fit_rmse = rmse(pred, VectorXd(train.y.col(0)));
    const double y_mean = train.y.col(0).mean();
    const double y_std = std::sqrt((train.y.col(0).array() - y_mean).square().mean());
    CHECK(fit_rmse < y_std);
  }

  // Posterior draws are indexed per task.
  Rng rng(15);
  const MatrixXd draws = sample_posterior_weights(fit, 2, 8, rng);
  CHECK(draws.rows() == 8);
  CHECK(draws.cols() == target.param_count());
  CHECK(draws.allFinite());
}

TEST_CASE("default decoder is one hidden layer of 50 tanh units") {
  const Mapping dec = default_meta_decoder(2, 61);
  CHECK(dec.kind == MapKind::mlp);
  CHECK(dec.in_dim == 2);
  CHECK(dec.out_dim == 61);
  CHECK(dec.arch.layer_sizes == std::vector<int>{2, 50, 61});
  CHECK(dec.arch.activation == Activation::tanh);
  CHECK(dec.param_count() == 3 * 50 + 51 * 61);
}

TEST_CASE("latent grid decodes inverse-cdf codes") {
  const Architecture target = small_target();
  const Mapping decoder = small_decoder(2, target.param_count());
  Rng rng(20);
  const VectorXd phi = rng.normal_vector(decoder.param_count()) * 0.5;
  VectorXd x_grid(4);
  x_grid << -2.0, -0.5, 0.5, 2.0;

  const LatentGrid g3 = latent_grid_decode(phi, decoder, target, 3, x_grid);
  CHECK(g3.functions.rows() == 9);
  CHECK(g3.functions.cols() == 4);
  // Center cell of an odd grid decodes the origin.
  CHECK(g3.quantiles(4, 0) == 0.5);
  CHECK(g3.quantiles(4, 1) == 0.5);
  CHECK(g3.codes(4, 0) == 0.0);
  CHECK(g3.codes(4, 1) == 0.0);
  // Mirrored quantiles give negated codes.
  CHECK(g3.codes(0, 0) == doctest::Approx(-g3.codes(8, 0)).epsilon(1e-12));
  CHECK(g3.codes(0, 1) == doctest::Approx(-g3.codes(8, 1)).epsilon(1e-12));

  // Row order is (u index) major; the inverse CDF round-trips.
  const LatentGrid g10 = latent_grid_decode(phi, decoder, target, 10, x_grid);
  CHECK(g10.functions.rows() == 100);
  for (Index r = 0; r < 100; ++r) {
    CHECK(g10.quantiles(r, 0) == doctest::Approx((r / 10 + 0.5) / 10.0).epsilon(1e-15));
    CHECK(g10.quantiles(r, 1) == doctest::Approx((r % 10 + 0.5) / 10.0).epsilon(1e-15));
    CHECK(std_normal_cdf(g10.codes(r, 0)) == doctest::Approx(g10.quantiles(r, 0)).epsilon(1e-9));
    CHECK(std_normal_cdf(g10.codes(r, 1)) == doctest::Approx(g10.quantiles(r, 1)).epsilon(1e-9));
  }

  // Decoded rows agree with applying the decoder by hand.
  const VectorXd w = decoder.apply<double>(phi, VectorXd(g3.codes.row(2).transpose()));
  VectorXd xv(1);
  for (Index k = 0; k < 4; ++k) {
    xv[0] = x_grid[k];
    CHECK(g3.functions(2, k) == mlp_forward(target, w, xv)[0]);
  }

  CHECK_THROWS_AS(latent_grid_decode(phi, decoder, target, 1, x_grid), std::invalid_argument);
  CHECK_THROWS_AS(latent_grid_decode(VectorXd::Zero(3), decoder, target, 3, x_grid),
                  std::invalid_argument);
  const Mapping wide = small_decoder(3, target.param_count());
  CHECK_THROWS_AS(latent_grid_decode(VectorXd::Zero(wide.param_count()), wide, target, 3, x_grid),
                  std::invalid_argument);
}

TEST_CASE("latent grid csv lists quantiles, codes and function values") {
  const Architecture target = small_target();
  const Mapping decoder = small_decoder(2, target.param_count());
  Rng rng(25);
  const VectorXd phi = rng.normal_vector(decoder.param_count()) * 0.5;
  VectorXd x_grid(2);
  x_grid << -1.0, 1.0;
  const LatentGrid g = latent_grid_decode(phi, decoder, target, 2, x_grid);

  TempDir tmp;
  const std::string path = tmp.file("grid.csv");
  save_latent_grid_csv(g, path);

  std::ifstream in(path);
  std::string line;
  REQUIRE(static_cast<bool>(std::getline(in, line)));
  CHECK(line == "u,v,z0,z1,f_0,f_1");
  int rows = 0;
  std::string first;
  while (std::getline(in, line)) {
    if (rows == 0) first = line;
    ++rows;
  }
  CHECK(rows == 4);
  const std::string want = cat(format_double(g.quantiles(0, 0)), ",", format_double(g.quantiles(0, 1)), ",",
                               format_double(g.codes(0, 0)), ",", format_double(g.codes(0, 1)), ",",
                               format_double(g.functions(0, 0)), ",", format_double(g.functions(0, 1)));
  CHECK(first == want);
}
