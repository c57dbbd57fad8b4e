#include "projbnn/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>

#include "projbnn/ensemble.hpp"
#include "projbnn/rng.hpp"

namespace projbnn {

namespace fs = std::filesystem;

namespace {

Architecture default_sine_target() {
  Architecture a;
  a.layer_sizes = {1, 8, 1};
  a.activation = Activation::tanh;
  return a;
}

Dataset concat_tasks(const std::vector<Dataset>& tasks) {
  Index rows = 0;
  for (const auto& t : tasks) rows += t.n();
  Dataset out;
  out.x.resize(rows, tasks.front().x.cols());
  out.y.resize(rows, tasks.front().y.cols());
  Index at = 0;
  for (const auto& t : tasks) {
    out.x.middleRows(at, t.n()) = t.x;
    out.y.middleRows(at, t.n()) = t.y;
    at += t.n();
  }
  return out;
}

void check_target(const Architecture& target, const Dataset& d) {
  target.validate();
  require(target.input_dim() == d.x.cols(), "target expects ", target.input_dim(), " inputs but the data has ",
          d.x.cols());
  require(target.output_dim() == d.y.cols(), "target expects ", target.output_dim(), " outputs but the data has ",
          d.y.cols());
}

}  // namespace

PreparedData prepare_data(const RunConfig& cfg) {
  cfg.validate();
  PreparedData pd;
  pd.label = cfg.dataset.kind;
  const std::uint64_t data_seed = derive_seed(cfg.seed, "stage.data");
  SplitSpec spec = cfg.split;
  spec.seed = derive_seed(cfg.seed, "stage.split");
  const bool override_target = !cfg.target.layer_sizes.empty();

  if (cfg.dataset.kind == "toy-rbf") {
    const ToyLatentRbf toy = gen_toy_latent_rbf(data_seed, cfg.dataset.n);
    pd.target = override_target ? cfg.target : toy.arch;
    pd.norm_stats = compute_norm_stats(toy.data);
    pd.data = apply_norm(toy.data, pd.norm_stats);
    pd.normalized = true;
  } else if (cfg.dataset.kind == "four-modes") {
    const FourModes fm = gen_toy_four_modes(data_seed, cfg.dataset.per_mode);
    pd.target = override_target ? cfg.target : fm.target_arch;
    pd.norm_stats = compute_norm_stats(fm.data);
    pd.data = apply_norm(fm.data, pd.norm_stats);
    pd.normalized = true;
    for (const auto& m : fm.modes) pd.mode_rows.push_back(m.rows);
  } else if (cfg.dataset.kind == "sine") {
    // tasks stay in raw units: amplitudes are the signal the tasks differ by
    const SineTasks st = gen_sine_tasks(cfg.dataset.tasks, cfg.dataset.per_task, data_seed);
    pd.target = override_target ? cfg.target : default_sine_target();
    pd.tasks = st.tasks;
    pd.data = concat_tasks(st.tasks);
    pd.task_splits = split_tasks(TaskSet{st.tasks, pd.target}, spec);
  } else {
    require(override_target, "csv datasets need an explicit target architecture");
    pd.label = fs::path(cfg.dataset.path).stem().string();
    pd.target = cfg.target;
    const Dataset raw = load_csv(cfg.dataset.path);
    pd.norm_stats = compute_norm_stats(raw);
    pd.data = apply_norm(raw, pd.norm_stats);
    pd.normalized = true;
  }
  check_target(pd.target, pd.data);
  pd.splits = split(pd.data, spec);
  return pd;
}

void save_sine_tasks(const SineTasks& st, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t m = 0; m < st.tasks.size(); ++m) {
    const std::string name = cat("task_", m, ".csv");
    save_csv(st.tasks[m], (fs::path(dir) / name).string());
    files.push_back(name);
  }
  nlohmann::json amp = nlohmann::json::array(), phase = nlohmann::json::array();
  for (Index m = 0; m < st.amplitude.size(); ++m) {
    amp.push_back(st.amplitude[m]);
    phase.push_back(st.phase[m]);
  }
  const nlohmann::json manifest{
      {"schema_version", kSchemaVersion}, {"kind", "tasks"}, {"amplitude", amp}, {"phase", phase}, {"files", files}};
  std::ofstream out(fs::path(dir) / "tasks.json");
  require(out.good(), "cannot write task manifest in '", dir, "'");
  out << manifest.dump(1) << '\n';
}

SnapshotSet run_fge_stage(const PreparedData& pd, const RunConfig& cfg, std::ostream& log) {
  const ObservationModel obs{cfg.sigma_y};
  const double prior_std = std::sqrt(cfg.prior_variance);
  const auto n_modes = static_cast<int>(pd.mode_rows.size());
  const int chains = cfg.map_restarts > 0 ? cfg.map_restarts : (n_modes >= 2 ? n_modes : 1);
  // one chain per mode, each MAP-trained with that mode held out, lands the
  // chains in distinct posterior basins before the shared cyclic exploration
  const bool hold_out_modes = cfg.map_restarts == 0 && n_modes >= 2;

  VectorXd centers(n_modes);
  if (hold_out_modes) {
    for (int m = 0; m < n_modes; ++m) {
      double acc = 0.0;
      for (int r : pd.mode_rows[static_cast<std::size_t>(m)]) acc += pd.data.x(r, 0);
      centers[m] = acc / static_cast<double>(pd.mode_rows[static_cast<std::size_t>(m)].size());
    }
  }

  const int per_chain = (cfg.fge.snapshots + chains - 1) / chains;
  SnapshotSet all;
  all.arch_fingerprint = pd.target.fingerprint();
  all.weights.resize(static_cast<Index>(chains) * per_chain, pd.target.param_count());
  all.valid_rmse.resize(static_cast<Index>(chains) * per_chain);
  for (int c = 0; c < chains; ++c) {
    FgeConfig fc = cfg.fge;
    fc.snapshots = per_chain;
    fc.keep_top_k = std::min(fc.keep_top_k, per_chain);
    fc.seed = derive_seed(cfg.seed, cat("stage.fge.", c));

    Splits map_splits = pd.splits;
    if (hold_out_modes) {
      std::vector<int> keep;
      for (Index r = 0; r < pd.splits.train.n(); ++r) {
        int nearest = 0;
        for (int m = 1; m < n_modes; ++m)
          if (std::abs(pd.splits.train.x(r, 0) - centers[m]) < std::abs(pd.splits.train.x(r, 0) - centers[nearest]))
            nearest = m;
        if (nearest != c) keep.push_back(static_cast<int>(r));
      }
      map_splits.train = pd.splits.train.take(keep);
    }
    const WeightVector w0 = train_map(pd.target, map_splits, obs, prior_std, fc);
    const SnapshotSet chain = collect_fge_snapshots(pd.target, w0, pd.splits, obs, prior_std, fc);
    all.weights.middleRows(static_cast<Index>(c) * per_chain, per_chain) = chain.weights;
    all.valid_rmse.segment(static_cast<Index>(c) * per_chain, per_chain) = chain.valid_rmse;
  }
  const int keep = std::min(cfg.fge.keep_top_k, static_cast<int>(all.weights.rows()));
  const SnapshotSet kept = filter_top_k(all, keep);
  log << "fge: " << chains << " chain(s), " << all.weights.rows() << " snapshots, kept " << kept.weights.rows()
      << ", best valid rmse " << format_double(kept.valid_rmse[0]) << "\n";
  return kept;
}

PcaeResult run_pcae_stage(const SnapshotSet& snaps, const PreparedData& pd, const RunConfig& cfg, int latent_dim,
                          std::ostream& log) {
  const ObservationModel obs{cfg.sigma_y};
  const auto dw = static_cast<int>(pd.target.param_count());
  require(latent_dim >= 1 && latent_dim <= dw, "latent dim must lie in [1, ", dw, "], got ", latent_dim);
  Mapping encoder, decoder;
  if (cfg.method == Method::linear) {
    encoder = Mapping::affine_map(dw, latent_dim);
    decoder = Mapping::affine_map(latent_dim, dw);
  } else {
    Architecture enc;
    enc.layer_sizes = {dw, 50, latent_dim};
    enc.activation = Activation::tanh;
    encoder = Mapping::mlp_map(enc);
    decoder = default_meta_decoder(latent_dim, dw);
  }
  PcaeConfig pc = cfg.pcae;
  pc.seed = derive_seed(cfg.seed, cat("stage.pcae.dz", latent_dim));
  PcaeResult res = train_pcae(snaps, pd.splits, pd.target, obs, encoder, decoder, pc);
  log << "pcae: dz=" << latent_dim << " recon_mse=" << format_double(res.recon_mse)
      << " decoded_train_ll=" << format_double(res.decoded_train_ll) << "\n";
  return res;
}

namespace {

AutoencoderParams one_stage_shell(const Architecture& target, int latent_dim) {
  AutoencoderParams shell;
  const auto dw = static_cast<int>(target.param_count());
  shell.encoder = Mapping::affine_map(dw, latent_dim);
  shell.decoder = default_meta_decoder(latent_dim, dw);
  shell.theta = VectorXd::Zero(shell.encoder.param_count());
  shell.phi = VectorXd::Zero(shell.decoder.param_count());
  shell.target_fingerprint = target.fingerprint();
  return shell;
}

}  // namespace

VIFit run_vi_stage(Method method, const PreparedData& pd, const AutoencoderParams* ae, const RunConfig& cfg,
                   int latent_dim, double lr, std::ostream& log) {
  const ObservationModel obs{cfg.sigma_y};
  const PriorSpec prior{0.0, cfg.prior_variance};
  VarInferenceConfig vc = cfg.vi;
  vc.lr = lr;
  vc.seed = derive_seed(cfg.seed, cat("stage.vi.dz", latent_dim, ".lr", format_double(lr)));

  VIFit fit;
  switch (method) {
    case Method::projbnn:
      require(ae != nullptr, "projbnn needs a trained autoencoder");
      fit = train_projbnn(pd.target, *ae, pd.splits, obs, prior, vc);
      break;
    case Method::bbb:
      fit = train_bbb(pd.target, pd.splits, obs, prior, vc);
      break;
    case Method::linear:
      require(ae != nullptr, "the linear ablation needs a trained autoencoder");
      fit = train_ablation(AblationKind::linear, pd.target, *ae, pd.splits, obs, prior, vc);
      break;
    case Method::one_stage:
      fit = train_ablation(AblationKind::one_stage, pd.target, one_stage_shell(pd.target, latent_dim), pd.splits, obs,
                           prior, vc);
      break;
    case Method::qz_only:
      require(ae != nullptr, "qz_only needs a trained autoencoder");
      fit = train_ablation(AblationKind::qz_only, pd.target, *ae, pd.splits, obs, prior, vc);
      break;
    case Method::meta:
      require(!pd.task_splits.empty(), "meta runs need a multi-task dataset");
      fit = train_meta(pd.target, default_meta_decoder(latent_dim, pd.target.param_count()), pd.task_splits, obs,
                       prior, vc);
      break;
  }
  log << "vi: method=" << fit.method << " dz=" << latent_dim << " lr=" << format_double(lr)
      << " iterations=" << fit.iterations_run << " best_iteration=" << fit.best_iteration << "\n";
  return fit;
}

namespace {

PredictiveSampleSet pooled_task_predictions(const ModelArtifact& m, const PreparedData& pd,
                                            const ObservationModel& obs, int n_samples, Rng& rng,
                                            bool use_test) {
  const auto n_tasks = static_cast<Index>(pd.task_splits.size());
  require(static_cast<Index>(m.fit.q_z.size()) == n_tasks, "fit covers ", m.fit.q_z.size(), " tasks but the data has ",
          n_tasks);
  std::vector<PredictiveSampleSet> parts;
  Index cols = 0;
  for (Index t = 0; t < n_tasks; ++t) {
    const Dataset& d = use_test ? pd.task_splits[static_cast<std::size_t>(t)].test
                                : pd.task_splits[static_cast<std::size_t>(t)].valid;
    const MatrixXd w = sample_posterior_weights(m.fit, t, n_samples, rng);
    parts.push_back(collect_predictive_samples(m.target, w, d, obs));
    cols += d.n();
  }
  PredictiveSampleSet pooled;
  pooled.sigma_y = obs.sigma_y;
  pooled.function_values.resize(n_samples, cols);
  pooled.point_loglik.resize(n_samples, cols);
  Index at = 0;
  for (const auto& p : parts) {
    pooled.function_values.middleCols(at, p.function_values.cols()) = p.function_values;
    pooled.point_loglik.middleCols(at, p.point_loglik.cols()) = p.point_loglik;
    at += p.function_values.cols();
  }
  return pooled;
}

VectorXd pooled_task_targets(const PreparedData& pd, bool use_test) {
  Index cols = 0;
  for (const auto& s : pd.task_splits) cols += (use_test ? s.test : s.valid).n();
  VectorXd y(cols);
  Index at = 0;
  for (const auto& s : pd.task_splits) {
    const Dataset& d = use_test ? s.test : s.valid;
    y.segment(at, d.n()) = d.y.col(0);
    at += d.n();
  }
  return y;
}

}  // namespace

double selection_valid_ll(const ModelArtifact& m, const PreparedData& pd, const RunConfig& cfg) {
  const ObservationModel obs{cfg.sigma_y};
  Rng rng = substream(cfg.seed, "stage.select");
  if (m.fit.method == "meta")
    return marginal_test_ll(pooled_task_predictions(m, pd, obs, cfg.vi.eval_samples, rng, false));
  const MatrixXd w = sample_posterior_weights(m.fit, 0, cfg.vi.eval_samples, rng);
  return marginal_test_ll(collect_predictive_samples(m.target, w, pd.splits.valid, obs));
}

MetricsDoc run_eval_stage(const ModelArtifact& m, const PreparedData& pd, const RunConfig& cfg, int eval_samples,
                          const std::string& bands_path, std::ostream& log) {
  const ObservationModel obs{cfg.sigma_y};
  Rng rng = substream(cfg.seed, "stage.eval");
  MetricsDoc doc;
  doc.method = m.fit.method;
  doc.dataset = pd.label;
  doc.split_kind = cfg.split.kind;
  doc.seed = cfg.seed;
  doc.eval_samples = eval_samples;

  if (m.fit.method == "meta") {
    const PredictiveSampleSet pooled = pooled_task_predictions(m, pd, obs, eval_samples, rng, true);
    doc.marginal_test_ll = marginal_test_ll(pooled);
    const VectorXd mean_pred = pooled.function_values.colwise().mean().transpose();
    doc.test_rmse = rmse(mean_pred, pooled_task_targets(pd, true));
  } else {
    const MatrixXd w = sample_posterior_weights(m.fit, 0, eval_samples, rng);
    const PredictiveSampleSet preds = collect_predictive_samples(m.target, w, pd.splits.test, obs);
    doc.marginal_test_ll = marginal_test_ll(preds);
    const VectorXd mean_pred = preds.function_values.colwise().mean().transpose();
    doc.test_rmse = rmse(mean_pred, pd.splits.test.y.col(0));
    if (!pd.mode_rows.empty()) {
      const PredictiveSampleSet full = collect_predictive_samples(m.target, w, pd.data, obs);
      doc.mode_coverage =
          mode_coverage(full, pd.mode_rows, pd.data.y.col(0), cfg.eval.coverage_threshold_sigmas * obs.sigma_y);
    }
    if (!bands_path.empty() && m.target.input_dim() == 1 && m.target.output_dim() == 1) {
      const double lo = pd.data.x.col(0).minCoeff(), hi = pd.data.x.col(0).maxCoeff();
      const double pad = 0.1 * (hi - lo);
      const VectorXd grid = VectorXd::LinSpaced(cfg.eval.grid_points, lo - pad, hi + pad);
      const MatrixXd fs = function_samples(m.target, w, grid);
      const Band band =
          predictive_bands(grid, PredictiveSampleSet{fs, MatrixXd(), obs.sigma_y}, cfg.eval.band_low, cfg.eval.band_high);
      save_bands_csv(band, bands_path);
    }
  }
  log << "eval: method=" << doc.method << " test_ll=" << format_double(doc.marginal_test_ll)
      << " rmse=" << format_double(doc.test_rmse);
  if (doc.mode_coverage) log << " coverage=" << *doc.mode_coverage;
  log << "\n";
  return doc;
}

namespace {

PipelineResult run_pipeline_impl(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  PreparedData pd = prepare_data(cfg);
  if (cfg.dataset.kind == "sine") {
    const SineTasks st =
        gen_sine_tasks(cfg.dataset.tasks, cfg.dataset.per_task, derive_seed(cfg.seed, "stage.data"));
    save_sine_tasks(st, (out / "tasks").string());
  } else {
    save_csv(pd.data, (out / "data.csv").string());
  }
  log << "data: " << pd.label << " n=" << pd.data.n() << " split=" << pd.splits.train.n() << "/"
      << pd.splits.valid.n() << "/" << pd.splits.test.n() << " (" << to_string(cfg.split.kind) << ")\n";

  const bool needs_snaps = cfg.method == Method::projbnn || cfg.method == Method::linear;
  SnapshotSet snaps;
  if (needs_snaps) {
    snaps = run_fge_stage(pd, cfg, log);
    save_snapshots_csv(snaps, (out / "snapshots.csv").string());
  }

  AutoencoderParams loaded_ae;
  const AutoencoderParams* fixed_ae = nullptr;
  if (cfg.method == Method::qz_only) {
    const fs::path ae_path = out / "autoencoder.json";
    require(fs::exists(ae_path), "method qz_only needs an existing decoder artifact at '", ae_path.string(),
            "'; run a projbnn pipeline into the same directory first");
    loaded_ae = load_autoencoder(ae_path.string());
    require(loaded_ae.target_fingerprint == pd.target.fingerprint(),
            "stored decoder artifact belongs to a different target network");
    fixed_ae = &loaded_ae;
  }

  std::vector<int> dzs = cfg.latent_grid;
  std::sort(dzs.begin(), dzs.end());
  dzs.erase(std::unique(dzs.begin(), dzs.end()), dzs.end());
  if (cfg.method == Method::bbb) dzs = {0};
  if (cfg.method == Method::qz_only) dzs = {static_cast<int>(loaded_ae.latent_dim())};
  std::vector<double> lrs = cfg.lr_grid;
  std::sort(lrs.begin(), lrs.end());
  lrs.erase(std::unique(lrs.begin(), lrs.end()), lrs.end());

  PipelineResult best;
  best.valid_ll = -std::numeric_limits<double>::infinity();
  AutoencoderParams best_ae;
  bool have_best_ae = false;
  for (int dz : dzs) {
    AutoencoderParams cell_ae;
    const AutoencoderParams* ae = fixed_ae;
    if (cfg.method == Method::projbnn || cfg.method == Method::linear) {
      cell_ae = run_pcae_stage(snaps, pd, cfg, dz, log).params;
      const fs::path dz_dir = out / "cells" / cat("dz", dz);
      fs::create_directories(dz_dir);
      save_autoencoder(cell_ae, (dz_dir / "autoencoder.json").string());
      ae = &cell_ae;
    }
    for (double lr : lrs) {
      ModelArtifact m{pd.target, run_vi_stage(cfg.method, pd, ae, cfg, dz, lr, log)};
      const std::string cell = (cfg.method == Method::bbb || cfg.method == Method::qz_only)
                                   ? cat("lr", format_double(lr))
                                   : cat("dz", dz, "_lr", format_double(lr));
      const fs::path cell_dir = out / "cells" / cell;
      fs::create_directories(cell_dir);
      save_model(m, (cell_dir / "model.json").string());
      const double vll = selection_valid_ll(m, pd, cfg);
      log << "select: cell " << cell << " valid_ll=" << format_double(vll) << "\n";
      if (vll > best.valid_ll) {
        best.valid_ll = vll;
        best.latent_dim = dz;
        best.lr = lr;
        best.model = std::move(m);
        if (ae == &cell_ae) {
          best_ae = cell_ae;
          have_best_ae = true;
        }
      }
    }
  }
  save_model(best.model, (out / "model.json").string());
  if (have_best_ae) save_autoencoder(best_ae, (out / "autoencoder.json").string());
  log << "select: best dz=" << best.latent_dim << " lr=" << format_double(best.lr)
      << " valid_ll=" << format_double(best.valid_ll) << "\n";

  best.metrics = run_eval_stage(best.model, pd, cfg, cfg.eval.samples, (out / "bands.csv").string(), log);
  return best;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& cfg0, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = apply_scale(cfg0);
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  std::error_code ec;
  fs::remove(out / "FAILED", ec);
  try {
    PipelineResult res = run_pipeline_impl(cfg, out, log);
    res.metrics.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_metrics(res.metrics, (out / "metrics.json").string());
    return res;
  } catch (const std::exception& e) {
    std::ofstream marker(out / "FAILED");
    marker << e.what() << '\n';
    throw;
  }
}

}  // namespace projbnn
