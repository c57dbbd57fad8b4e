#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "projbnn/pipeline.hpp"

using namespace projbnn;
namespace fs = std::filesystem;

namespace {

int min_latent(const std::vector<int>& grid) { return *std::min_element(grid.begin(), grid.end()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"projected Bayesian neural networks: snapshot ensembles, weight-space autoencoders, variational inference"};
  app.require_subcommand(1);

  std::string config_path, out_override, method_override, kind, model_path;
  std::uint64_t seed = 0;
  double scale = 1.0, lr = 0.0;
  int latent_dim = 0, samples = 0;
  int n = 200, per_mode = 40, tasks = 8, per_task = 40;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration (JSON)");
    sub->add_option("--seed", seed, "run seed override");
    sub->add_option("--scale", scale, "factor on iteration and snapshot budgets");
    sub->add_option("--out", out_override, "output directory override");
  };
  auto given = [](CLI::App* sub, const std::string& name) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  auto resolve = [&](CLI::App* sub) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (given(sub, "--seed")) cfg.seed = seed;
    if (given(sub, "--scale")) cfg.scale = scale;
    if (given(sub, "--out")) cfg.out_dir = out_override;
    if (given(sub, "--method")) cfg.method = method_from_string(method_override);
    if (given(sub, "--latent-dim")) cfg.latent_grid = {latent_dim};
    if (given(sub, "--lr")) cfg.lr_grid = {lr};
    if (given(sub, "--samples")) cfg.eval.samples = samples;
    cfg.validate();
    return cfg;
  };

  CLI::App* gen = app.add_subcommand("gen-data", "write a generated dataset as CSV");
  gen->add_option("--kind", kind, "toy-rbf | four-modes | sine")->required();
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out_override, "output directory");
  gen->add_option("--n", n, "toy-rbf row count");
  gen->add_option("--per-mode", per_mode, "four-modes rows per cluster");
  gen->add_option("--tasks", tasks, "sine task count");
  gen->add_option("--per-task", per_task, "sine rows per task");
  gen->callback([&] {
    const fs::path dir = out_override.empty() ? fs::path(".") : fs::path(out_override);
    fs::create_directories(dir);
    if (kind == "toy-rbf") {
      save_csv(gen_toy_latent_rbf(seed, n).data, (dir / "data.csv").string());
      std::cout << "gen-data: toy-rbf, " << n << " rows -> " << (dir / "data.csv").string() << "\n";
    } else if (kind == "four-modes") {
      save_csv(gen_toy_four_modes(seed, per_mode).data, (dir / "data.csv").string());
      std::cout << "gen-data: four-modes, " << 4 * per_mode << " rows -> " << (dir / "data.csv").string() << "\n";
    } else if (kind == "sine") {
      save_sine_tasks(gen_sine_tasks(tasks, per_task, seed), dir.string());
      std::cout << "gen-data: sine, " << tasks << " tasks x " << per_task << " rows -> " << dir.string() << "\n";
    } else {
      throw std::invalid_argument(cat("unknown dataset kind '", kind, "'"));
    }
  });

  CLI::App* fge = app.add_subcommand("fge", "stage 1: harvest weight snapshots");
  add_common(fge);
  fge->callback([&] {
    const RunConfig cfg = apply_scale(resolve(fge));
    const PreparedData pd = prepare_data(cfg);
    fs::create_directories(cfg.out_dir);
    const SnapshotSet snaps = run_fge_stage(pd, cfg, std::cout);
    save_snapshots_csv(snaps, (fs::path(cfg.out_dir) / "snapshots.csv").string());
  });

  CLI::App* pcae = app.add_subcommand("pcae", "stage 2: fit the weight-space autoencoder");
  add_common(pcae);
  pcae->add_option("--latent-dim", latent_dim, "latent dimension (default: smallest grid entry)");
  pcae->callback([&] {
    const RunConfig cfg = apply_scale(resolve(pcae));
    const PreparedData pd = prepare_data(cfg);
    const SnapshotSet snaps = load_snapshots_csv((fs::path(cfg.out_dir) / "snapshots.csv").string(), pd.target);
    const PcaeResult res = run_pcae_stage(snaps, pd, cfg, min_latent(cfg.latent_grid), std::cout);
    save_autoencoder(res.params, (fs::path(cfg.out_dir) / "autoencoder.json").string());
  });

  CLI::App* vi = app.add_subcommand("vi", "stage 3: variational inference");
  add_common(vi);
  vi->add_option("--method", method_override, "projbnn | bbb | linear | one_stage | qz_only");
  vi->add_option("--latent-dim", latent_dim, "latent dimension for one_stage");
  vi->add_option("--lr", lr, "learning rate (default: the config's vi.lr)");
  vi->callback([&] {
    const RunConfig cfg = apply_scale(resolve(vi));
    require(cfg.method != Method::meta, "use the meta subcommand for multi-task runs");
    const PreparedData pd = prepare_data(cfg);
    AutoencoderParams ae;
    const AutoencoderParams* aep = nullptr;
    int dz = min_latent(cfg.latent_grid);
    if (cfg.method == Method::projbnn || cfg.method == Method::linear || cfg.method == Method::qz_only) {
      ae = load_autoencoder((fs::path(cfg.out_dir) / "autoencoder.json").string());
      aep = &ae;
      dz = static_cast<int>(ae.latent_dim());
    }
    const double rate = vi->count("--lr") ? lr : cfg.vi.lr;
    const VIFit fit = run_vi_stage(cfg.method, pd, aep, cfg, dz, rate, std::cout);
    save_model(ModelArtifact{pd.target, fit}, (fs::path(cfg.out_dir) / "model.json").string());
  });

  CLI::App* ev = app.add_subcommand("eval", "recompute metrics from a stored model");
  add_common(ev);
  ev->add_option("--model", model_path, "model artifact (default: <out>/model.json)");
  ev->add_option("--samples", samples, "posterior samples");
  ev->callback([&] {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig cfg = resolve(ev);
    const PreparedData pd = prepare_data(cfg);
    const std::string mpath =
        ev->count("--model") ? model_path : (fs::path(cfg.out_dir) / "model.json").string();
    const ModelArtifact m = load_model(mpath);
    require(m.target.input_dim() == pd.data.x.cols() && m.target.output_dim() == pd.data.y.cols(),
            "stored model expects ", m.target.input_dim(), "->", m.target.output_dim(),
            " data, the configured dataset is ", pd.data.x.cols(), "->", pd.data.y.cols());
    fs::create_directories(cfg.out_dir);
    MetricsDoc doc =
        run_eval_stage(m, pd, cfg, cfg.eval.samples, (fs::path(cfg.out_dir) / "bands.csv").string(), std::cout);
    doc.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_metrics(doc, (fs::path(cfg.out_dir) / "metrics.json").string());
  });

  CLI::App* meta = app.add_subcommand("meta", "multi-task pipeline with a shared decoder");
  add_common(meta);
  meta->add_option("--latent-dim", latent_dim, "restrict the latent grid to one dimension");
  meta->add_option("--lr", lr, "restrict the lr grid to one rate");
  meta->add_option("--samples", samples, "posterior samples for evaluation");
  meta->callback([&] {
    RunConfig cfg = resolve(meta);
    cfg.method = Method::meta;
    run_pipeline(cfg, std::cout);
  });

  CLI::App* pipe = app.add_subcommand("pipeline", "full run: data, stages, grid selection, evaluation");
  add_common(pipe);
  pipe->add_option("--method", method_override, "projbnn | bbb | linear | one_stage | qz_only | meta");
  pipe->add_option("--latent-dim", latent_dim, "restrict the latent grid to one dimension");
  pipe->add_option("--lr", lr, "restrict the lr grid to one rate");
  pipe->add_option("--samples", samples, "posterior samples for evaluation");
  pipe->callback([&] { run_pipeline(resolve(pipe), std::cout); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
