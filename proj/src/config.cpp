#include "projbnn/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>

namespace projbnn {

using nlohmann::json;

std::string to_string(Method m) {
  switch (m) {
    case Method::projbnn: return "projbnn";
    case Method::bbb: return "bbb";
    case Method::linear: return "linear";
    case Method::one_stage: return "one_stage";
    case Method::qz_only: return "qz_only";
    case Method::meta: return "meta";
  }
  throw std::invalid_argument("unknown method");
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::projbnn, Method::bbb, Method::linear, Method::one_stage, Method::qz_only, Method::meta})
    if (s == to_string(m)) return m;
  throw std::invalid_argument(cat("unknown method '", s, "'"));
}

void DataConfig::validate() const {
  const std::set<std::string> kinds{"toy-rbf", "four-modes", "sine", "csv"};
  require(kinds.count(kind) == 1, "unknown dataset kind '", kind, "'");
  require(kind != "csv" || !path.empty(), "dataset kind csv needs a path");
  require(n >= 20, "toy-rbf needs at least 20 rows, got ", n);
  require(per_mode >= 5, "four-modes needs at least 5 rows per mode, got ", per_mode);
  require(tasks >= 1, "sine needs at least one task, got ", tasks);
  require(per_task >= 20, "sine needs at least 20 rows per task, got ", per_task);
}

void EvalConfig::validate() const {
  require(samples >= 1, "eval samples must be positive, got ", samples);
  require(0.0 < band_low && band_low < band_high && band_high < 1.0,
          "band quantiles must satisfy 0 < low < high < 1, got ", band_low, " and ", band_high);
  require(coverage_threshold_sigmas > 0.0, "coverage threshold must be positive");
  require(grid_points >= 2, "band grid needs at least 2 points, got ", grid_points);
}

void RunConfig::validate() const {
  dataset.validate();
  require(split.train_frac > 0.0 && split.valid_frac > 0.0 && split.train_frac + split.valid_frac < 1.0,
          "invalid split fractions");
  if (!target.layer_sizes.empty()) target.validate();
  fge.validate();
  pcae.validate();
  vi.validate();
  require(!latent_grid.empty(), "latent grid is empty");
  for (int d : latent_grid) require(d >= 1, "latent dims must be positive, got ", d);
  require(!lr_grid.empty(), "lr grid is empty");
  for (double lr : lr_grid) require(lr > 0.0, "grid lrs must be positive, got ", lr);
  eval.validate();
  require(sigma_y > 0.0, "sigma_y must be positive, got ", sigma_y);
  require(prior_variance > 0.0, "prior variance must be positive, got ", prior_variance);
  require(map_restarts >= 0, "map restarts must be non-negative, got ", map_restarts);
  require(!out_dir.empty(), "output directory is empty");
  require(scale > 0.0, "scale must be positive, got ", scale);
}

namespace {

void check_keys(const json& j, const char* what, std::initializer_list<const char*> allowed) {
  require(j.is_object(), "config section '", what, "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    require(ok.count(key) == 1, "config section '", what, "': unknown key '", key, "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_dataset(const json& j, DataConfig& d) {
  check_keys(j, "dataset", {"kind", "path", "n", "per_mode", "tasks", "per_task"});
  read(j, "kind", d.kind);
  read(j, "path", d.path);
  read(j, "n", d.n);
  read(j, "per_mode", d.per_mode);
  read(j, "tasks", d.tasks);
  read(j, "per_task", d.per_task);
}

void parse_split(const json& j, SplitSpec& s) {
  check_keys(j, "split", {"kind", "train_frac", "valid_frac"});
  if (j.contains("kind")) s.kind = split_kind_from_string(j.at("kind").get<std::string>());
  read(j, "train_frac", s.train_frac);
  read(j, "valid_frac", s.valid_frac);
}

void parse_target(const json& j, Architecture& a) {
  check_keys(j, "target", {"layers", "activation", "rbf_center", "rbf_lengthscale"});
  read(j, "layers", a.layer_sizes);
  if (j.contains("activation")) a.activation = activation_from_string(j.at("activation").get<std::string>());
  read(j, "rbf_center", a.rbf_center);
  read(j, "rbf_lengthscale", a.rbf_lengthscale);
}

void parse_fge(const json& j, FgeConfig& f) {
  check_keys(j, "fge",
             {"map_lr", "map_iterations", "lr_max", "lr_min", "cycle_epochs", "snapshots", "keep_top_k",
              "batch_size", "map_use_adam", "cycles_use_adam"});
  read(j, "map_lr", f.map_lr);
  read(j, "map_iterations", f.map_iterations);
  read(j, "lr_max", f.lr_max);
  read(j, "lr_min", f.lr_min);
  read(j, "cycle_epochs", f.cycle_epochs);
  read(j, "snapshots", f.snapshots);
  read(j, "keep_top_k", f.keep_top_k);
  read(j, "batch_size", f.batch_size);
  read(j, "map_use_adam", f.map_use_adam);
  read(j, "cycles_use_adam", f.cycles_use_adam);
}

void parse_pcae(const json& j, PcaeConfig& p) {
  check_keys(j, "pcae",
             {"beta", "input_noise_std", "lr", "iterations", "batch_snapshots", "data_batch_size",
              "standardize_latent", "latent_target_std"});
  read(j, "beta", p.beta);
  read(j, "input_noise_std", p.input_noise_std);
  read(j, "lr", p.lr);
  read(j, "iterations", p.iterations);
  read(j, "batch_snapshots", p.batch_snapshots);
  read(j, "data_batch_size", p.data_batch_size);
  read(j, "standardize_latent", p.standardize_latent);
  read(j, "latent_target_std", p.latent_target_std);
}

void parse_vi(const json& j, VarInferenceConfig& v) {
  check_keys(j, "vi",
             {"mc_samples", "lr", "max_iterations", "early_stop_patience", "check_every", "eval_samples",
              "batch_size", "phi_logstd_init_mean", "phi_logstd_init_std"});
  read(j, "mc_samples", v.mc_samples);
  read(j, "lr", v.lr);
  read(j, "max_iterations", v.max_iterations);
  read(j, "early_stop_patience", v.early_stop_patience);
  read(j, "check_every", v.check_every);
  read(j, "eval_samples", v.eval_samples);
  read(j, "batch_size", v.batch_size);
  read(j, "phi_logstd_init_mean", v.phi_logstd_init_mean);
  read(j, "phi_logstd_init_std", v.phi_logstd_init_std);
}

void parse_eval(const json& j, EvalConfig& e) {
  check_keys(j, "eval", {"samples", "band_low", "band_high", "coverage_threshold_sigmas", "grid_points"});
  read(j, "samples", e.samples);
  read(j, "band_low", e.band_low);
  read(j, "band_high", e.band_high);
  read(j, "coverage_threshold_sigmas", e.coverage_threshold_sigmas);
  read(j, "grid_points", e.grid_points);
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(cat("config is not valid JSON: ", e.what()));
  }
  RunConfig cfg;
  try {
    check_keys(j, "run",
               {"dataset", "split", "target", "fge", "pcae", "vi", "method", "latent_grid", "lr_grid", "eval",
                "sigma_y", "prior_variance", "map_restarts", "seed", "out_dir", "scale"});
    if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg.dataset);
    if (j.contains("split")) parse_split(j.at("split"), cfg.split);
    if (j.contains("target")) parse_target(j.at("target"), cfg.target);
    if (j.contains("fge")) parse_fge(j.at("fge"), cfg.fge);
    if (j.contains("pcae")) parse_pcae(j.at("pcae"), cfg.pcae);
    if (j.contains("vi")) parse_vi(j.at("vi"), cfg.vi);
    if (j.contains("method")) cfg.method = method_from_string(j.at("method").get<std::string>());
    read(j, "latent_grid", cfg.latent_grid);
    read(j, "lr_grid", cfg.lr_grid);
    if (j.contains("eval")) parse_eval(j.at("eval"), cfg.eval);
    read(j, "sigma_y", cfg.sigma_y);
    read(j, "prior_variance", cfg.prior_variance);
    read(j, "map_restarts", cfg.map_restarts);
    read(j, "seed", cfg.seed);
    read(j, "out_dir", cfg.out_dir);
    read(j, "scale", cfg.scale);
  } catch (const json::exception& e) {
    throw std::invalid_argument(cat("config: ", e.what()));
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '", path, "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

namespace {

int scaled(int value, double scale) {
  return std::max(1, static_cast<int>(std::llround(static_cast<double>(value) * scale)));
}

}  // namespace

RunConfig apply_scale(RunConfig cfg) {
  cfg.validate();
  cfg.fge.map_iterations = scaled(cfg.fge.map_iterations, cfg.scale);
  cfg.fge.snapshots = scaled(cfg.fge.snapshots, cfg.scale);
  cfg.fge.keep_top_k = std::min(scaled(cfg.fge.keep_top_k, cfg.scale), cfg.fge.snapshots);
  cfg.pcae.iterations = scaled(cfg.pcae.iterations, cfg.scale);
  cfg.vi.max_iterations = scaled(cfg.vi.max_iterations, cfg.scale);
  cfg.scale = 1.0;
  return cfg;
}

}  // namespace projbnn
