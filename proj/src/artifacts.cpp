#include "projbnn/artifacts.hpp"

#include <json.hpp>

#include <fstream>
#include <set>

namespace projbnn {

using nlohmann::json;

namespace {

void check_keys(const json& j, const char* what, std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    require(ok.count(key) == 1, what, ": unknown key '", key, "'");
}

json to_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VectorXd vector_from(const json& a, const char* what) {
  require(a.is_array(), what, " must be an array");
  VectorXd v(static_cast<Index>(a.size()));
  for (Index i = 0; i < v.size(); ++i) v[i] = a[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json to_json(const Architecture& arch) {
  return json{{"layers", arch.layer_sizes},
              {"activation", to_string(arch.activation)},
              {"rbf_center", arch.rbf_center},
              {"rbf_lengthscale", arch.rbf_lengthscale}};
}

Architecture arch_from(const json& j) {
  check_keys(j, "architecture", {"layers", "activation", "rbf_center", "rbf_lengthscale"});
  Architecture arch;
  arch.layer_sizes = j.at("layers").get<std::vector<int>>();
  arch.activation = activation_from_string(j.at("activation").get<std::string>());
  arch.rbf_center = j.value("rbf_center", 0.0);
  arch.rbf_lengthscale = j.value("rbf_lengthscale", 1.0);
  arch.validate();
  return arch;
}

json to_json(const Mapping& m) {
  json j{{"kind", to_string(m.kind)}, {"in_dim", m.in_dim}, {"out_dim", m.out_dim}};
  if (m.kind == MapKind::mlp) j["arch"] = to_json(m.arch);
  return j;
}

Mapping mapping_from(const json& j) {
  check_keys(j, "mapping", {"kind", "in_dim", "out_dim", "arch"});
  const MapKind kind = map_kind_from_string(j.at("kind").get<std::string>());
  const auto in = j.at("in_dim").get<Index>();
  const auto out = j.at("out_dim").get<Index>();
  switch (kind) {
    case MapKind::identity:
      require(in == out, "identity mapping must have in_dim == out_dim");
      return Mapping::identity_map(in);
    case MapKind::affine:
      return Mapping::affine_map(in, out);
    case MapKind::mlp: {
      Mapping m = Mapping::mlp_map(arch_from(j.at("arch")));
      require(m.in_dim == in && m.out_dim == out, "mlp mapping dims disagree with its architecture");
      return m;
    }
  }
  throw std::invalid_argument("unknown mapping kind");
}

json to_json(const MeanFieldGaussian& q) {
  return json{{"mu", to_json(q.mu)}, {"log_std", to_json(q.log_std)}};
}

MeanFieldGaussian factor_from(const json& j, const char* what) {
  check_keys(j, what, {"mu", "log_std"});
  MeanFieldGaussian q{vector_from(j.at("mu"), what), vector_from(j.at("log_std"), what)};
  require(q.mu.size() == q.log_std.size(), what, ": mu and log_std sizes differ");
  return q;
}

void write_doc(const json& j, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot write '", path, "'");
  out << j.dump(1) << '\n';
  require(out.good(), "write to '", path, "' failed");
}

json read_doc(const std::string& path, const char* kind) {
  std::ifstream in(path);
  require(in.good(), "cannot open '", path, "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(cat("'", path, "' is not valid JSON: ", e.what()));
  }
  require(j.is_object(), "'", path, "' does not hold a JSON object");
  require(j.value("kind", "") == kind, "'", path, "' is not a ", kind, " document");
  require(j.value("schema_version", -1) == kSchemaVersion, "'", path, "' has unsupported schema version");
  return j;
}

}  // namespace

void save_autoencoder(const AutoencoderParams& ae, const std::string& path) {
  ae.validate();
  json j{{"schema_version", kSchemaVersion},
         {"kind", "autoencoder"},
         {"target_fingerprint", ae.target_fingerprint},
         {"encoder", to_json(ae.encoder)},
         {"decoder", to_json(ae.decoder)},
         {"theta", to_json(ae.theta)},
         {"phi", to_json(ae.phi)}};
  write_doc(j, path);
}

AutoencoderParams load_autoencoder(const std::string& path) {
  const json j = read_doc(path, "autoencoder");
  try {
    check_keys(j, "autoencoder", {"schema_version", "kind", "target_fingerprint", "encoder", "decoder", "theta", "phi"});
    AutoencoderParams ae;
    ae.encoder = mapping_from(j.at("encoder"));
    ae.decoder = mapping_from(j.at("decoder"));
    ae.theta = vector_from(j.at("theta"), "theta");
    ae.phi = vector_from(j.at("phi"), "phi");
    ae.target_fingerprint = j.at("target_fingerprint").get<std::uint64_t>();
    ae.validate();
    return ae;
  } catch (const json::exception& e) {
    throw std::invalid_argument(cat("'", path, "': ", e.what()));
  }
}

void save_model(const ModelArtifact& m, const std::string& path) {
  m.target.validate();
  m.fit.validate();
  json fit{{"method", m.fit.method},
           {"q_phi", to_json(m.fit.q_phi)},
           {"phi_point", to_json(m.fit.phi_point)},
           {"phi_mode", to_string(m.fit.phi_mode)},
           {"decoder", to_json(m.fit.decoder)},
           {"target_fingerprint", m.fit.target_fingerprint},
           {"elbo_trace", m.fit.elbo_trace},
           {"check_iterations", m.fit.check_iterations},
           {"valid_ll_trace", m.fit.valid_ll_trace},
           {"best_iteration", m.fit.best_iteration},
           {"best_valid_ll", m.fit.best_valid_ll},
           {"iterations_run", m.fit.iterations_run}};
  json qz = json::array();
  for (const auto& q : m.fit.q_z) qz.push_back(to_json(q));
  fit["q_z"] = qz;
  write_doc(json{{"schema_version", kSchemaVersion}, {"kind", "model"}, {"target", to_json(m.target)}, {"fit", fit}},
            path);
}

ModelArtifact load_model(const std::string& path) {
  const json j = read_doc(path, "model");
  try {
    check_keys(j, "model", {"schema_version", "kind", "target", "fit"});
    ModelArtifact m;
    m.target = arch_from(j.at("target"));
    const json& f = j.at("fit");
    check_keys(f, "fit",
               {"method", "q_z", "q_phi", "phi_point", "phi_mode", "decoder", "target_fingerprint", "elbo_trace",
                "check_iterations", "valid_ll_trace", "best_iteration", "best_valid_ll", "iterations_run"});
    m.fit.method = f.at("method").get<std::string>();
    for (const auto& q : f.at("q_z")) m.fit.q_z.push_back(factor_from(q, "q_z"));
    m.fit.q_phi = factor_from(f.at("q_phi"), "q_phi");
    m.fit.phi_point = vector_from(f.at("phi_point"), "phi_point");
    m.fit.phi_mode = phi_mode_from_string(f.at("phi_mode").get<std::string>());
    m.fit.decoder = mapping_from(f.at("decoder"));
    m.fit.target_fingerprint = f.at("target_fingerprint").get<std::uint64_t>();
    m.fit.elbo_trace = f.at("elbo_trace").get<std::vector<double>>();
    m.fit.check_iterations = f.at("check_iterations").get<std::vector<int>>();
    m.fit.valid_ll_trace = f.at("valid_ll_trace").get<std::vector<double>>();
    m.fit.best_iteration = f.at("best_iteration").get<int>();
    m.fit.best_valid_ll = f.at("best_valid_ll").get<double>();
    m.fit.iterations_run = f.at("iterations_run").get<int>();
    m.fit.validate();
    require(m.fit.target_fingerprint == m.target.fingerprint(),
            "'", path, "': stored fit belongs to a different target network");
    return m;
  } catch (const json::exception& e) {
    throw std::invalid_argument(cat("'", path, "': ", e.what()));
  }
}

void save_metrics(const MetricsDoc& m, const std::string& path) {
  json j{{"schema_version", kSchemaVersion},
         {"kind", "metrics"},
         {"method", m.method},
         {"dataset", m.dataset},
         {"split_kind", to_string(m.split_kind)},
         {"seed", m.seed},
         {"eval_samples", m.eval_samples},
         {"marginal_test_ll", m.marginal_test_ll},
         {"test_rmse", m.test_rmse},
         {"wall_clock_seconds", m.wall_clock_seconds}};
  if (m.mode_coverage) j["mode_coverage"] = *m.mode_coverage;
  write_doc(j, path);
}

MetricsDoc load_metrics(const std::string& path) {
  const json j = read_doc(path, "metrics");
  try {
    check_keys(j, "metrics",
               {"schema_version", "kind", "method", "dataset", "split_kind", "seed", "eval_samples",
                "marginal_test_ll", "test_rmse", "mode_coverage", "wall_clock_seconds"});
    MetricsDoc m;
    m.method = j.at("method").get<std::string>();
    m.dataset = j.at("dataset").get<std::string>();
    m.split_kind = split_kind_from_string(j.at("split_kind").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.eval_samples = j.at("eval_samples").get<int>();
    m.marginal_test_ll = j.at("marginal_test_ll").get<double>();
    m.test_rmse = j.at("test_rmse").get<double>();
    if (j.contains("mode_coverage")) m.mode_coverage = j.at("mode_coverage").get<int>();
    m.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw std::invalid_argument(cat("'", path, "': ", e.what()));
  }
}

}  // namespace projbnn
