#include "coda/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace coda {

namespace {

// Reads known keys out of an object and complains about whatever is left over.
class Fields {
 public:
  Fields(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        if (!it->is_number_unsigned()) throw ConfigError("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("expected a number");
      }
      out = it->template get<T>();
    } catch (const std::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const Json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

Task task_from(const std::string& s, const std::string& where) {
  try {
    return parse_task(s);
  } catch (const std::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

NormalizationMethod normalization_from(const std::string& s, const std::string& where) {
  if (s == "minmax") return NormalizationMethod::kMinMax;
  if (s == "zscore") return NormalizationMethod::kZScore;
  throw ConfigError(where + ": unknown normalization '" + s + "' (expected minmax or zscore)");
}

LatentSource latent_from(const std::string& s, const std::string& where) {
  if (s == "prior") return LatentSource::kPrior;
  if (s == "posterior") return LatentSource::kPosterior;
  throw ConfigError(where + ": unknown latent source '" + s + "' (expected prior or posterior)");
}

const char* latent_name(LatentSource s) { return s == LatentSource::kPrior ? "prior" : "posterior"; }

const char* normalization_name(NormalizationMethod m) {
  return m == NormalizationMethod::kMinMax ? "minmax" : "zscore";
}

}  // namespace

Json to_json(const PredictorConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"layers", c.layers},
          {"latent_dim", c.latent_dim},       {"hidden_dim", c.hidden_dim},
          {"lambda_ce", c.lambda_ce},         {"max_epochs", c.max_epochs},
          {"patience", c.patience},           {"tolerance", c.tolerance},
          {"seed", c.seed}};
}

Json to_json(const SimulatorConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"encoder_dim", c.encoder_dim},
          {"encoder_layers", c.encoder_layers},
          {"decoder_dim", c.decoder_dim},
          {"decoder_layers", c.decoder_layers},
          {"latent_dim", c.latent_dim},
          {"lambda_c", c.lambda_c},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"tolerance", c.tolerance},
          {"observation_std", c.observation_std},
          {"eps_var", c.eps_var},
          {"drift_head", c.drift_head},
          {"regularize_on", latent_name(c.regularize_on)},
          {"sample_from", latent_name(c.sample_from)},
          {"seed", c.seed}};
}

Json to_json(const DownstreamConfig& c) {
  return {{"hidden", c.hidden},     {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs}, {"patience", c.patience},
          {"tolerance", c.tolerance}, {"seed", c.seed}};
}

Json to_json(const PrelimConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"hidden_dim", c.hidden_dim},
          {"code_dim", c.code_dim},           {"decoder_dim", c.decoder_dim},
          {"max_epochs", c.max_epochs},       {"patience", c.patience},
          {"tolerance", c.tolerance},         {"grid_points", c.grid_points},
          {"seed", c.seed}};
}

Json to_json(const ExperimentConfig& c) {
  return {{"predictor", to_json(c.predictor)},
          {"simulator", to_json(c.simulator)},
          {"downstream", to_json(c.downstream)},
          {"prelim", to_json(c.prelim)},
          {"seeds", c.seeds},
          {"sample_rate", c.sample_rate},
          {"finetune_lr_factor", c.finetune_lr_factor},
          {"diagnostic_samples", c.diagnostic_samples}};
}

Json to_json(const DatasetSpec& c) {
  Json j = {{"kind", c.kind}, {"domains", c.domains}, {"n_per_domain", c.n_per_domain},
            {"noise", c.noise}, {"seed", c.seed}};
  if (c.kind == "csv") {
    j["csv_path"] = c.csv_path;
    j["domain_column"] = c.schema.domain_column;
    j["label_column"] = c.schema.label_column;
    j["feature_columns"] = c.schema.feature_columns;
    j["task"] = to_string(c.schema.task);
  }
  j["normalization"] = normalization_name(c.normalization);
  return j;
}

Json to_json(const RunConfig& c) {
  Json methods = Json::array();
  for (Method m : c.methods) methods.push_back(to_string(m));
  return {{"dataset", to_json(c.dataset)},
          {"experiment", to_json(c.experiment)},
          {"methods", methods},
          {"output_dir", c.output_dir}};
}

Json to_json(const ExperimentReport& r) {
  Json details = Json::object();
  for (const auto& [k, v] : r.details) details[k] = v;
  Json config = r.config_json.empty() ? Json() : Json::parse(r.config_json);
  return {{"method", r.method}, {"metric", r.metric}, {"seeds", r.seeds},
          {"values", r.values}, {"mean", r.mean},     {"std", r.std},
          {"seconds", r.seconds}, {"details", details}, {"config", config}};
}

Json to_json(const BoundReport& r) {
  return {{"d", r.d},     {"epsilon", r.epsilon}, {"a", r.a},
          {"delta", r.delta}, {"lhs", r.lhs},     {"rhs", r.rhs},
          {"violated", r.violated}};
}

PredictorConfig predictor_config_from_json(const Json& j) {
  PredictorConfig c;
  Fields f(j, "predictor");
  f.get("learning_rate", c.learning_rate);
  f.get("layers", c.layers);
  f.get("latent_dim", c.latent_dim);
  f.get("hidden_dim", c.hidden_dim);
  f.get("lambda_ce", c.lambda_ce);
  f.get("max_epochs", c.max_epochs);
  f.get("patience", c.patience);
  f.get("tolerance", c.tolerance);
  f.get("seed", c.seed);
  f.finish();
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("predictor: ") + e.what());
  }
  return c;
}

SimulatorConfig simulator_config_from_json(const Json& j) {
  SimulatorConfig c;
  Fields f(j, "simulator");
  f.get("learning_rate", c.learning_rate);
  f.get("encoder_dim", c.encoder_dim);
  f.get("encoder_layers", c.encoder_layers);
  f.get("decoder_dim", c.decoder_dim);
  f.get("decoder_layers", c.decoder_layers);
  f.get("latent_dim", c.latent_dim);
  f.get("lambda_c", c.lambda_c);
  f.get("batch_size", c.batch_size);
  f.get("max_epochs", c.max_epochs);
  f.get("patience", c.patience);
  f.get("tolerance", c.tolerance);
  f.get("observation_std", c.observation_std);
  f.get("eps_var", c.eps_var);
  f.get("drift_head", c.drift_head);
  std::string reg = latent_name(c.regularize_on), from = latent_name(c.sample_from);
  f.get("regularize_on", reg);
  f.get("sample_from", from);
  c.regularize_on = latent_from(reg, f.path("regularize_on"));
  c.sample_from = latent_from(from, f.path("sample_from"));
  f.get("seed", c.seed);
  f.finish();
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("simulator: ") + e.what());
  }
  return c;
}

DownstreamConfig downstream_config_from_json(const Json& j) {
  DownstreamConfig c;
  Fields f(j, "downstream");
  f.get("hidden", c.hidden);
  f.get("learning_rate", c.learning_rate);
  f.get("max_epochs", c.max_epochs);
  f.get("patience", c.patience);
  f.get("tolerance", c.tolerance);
  f.get("seed", c.seed);
  f.finish();
  if (!(c.learning_rate > 0.0)) throw ConfigError("downstream.learning_rate must be > 0");
  for (std::size_t h : c.hidden) {
    if (h == 0) throw ConfigError("downstream.hidden sizes must be positive");
  }
  return c;
}

PrelimConfig prelim_config_from_json(const Json& j) {
  PrelimConfig c;
  Fields f(j, "prelim");
  f.get("learning_rate", c.learning_rate);
  f.get("hidden_dim", c.hidden_dim);
  f.get("code_dim", c.code_dim);
  f.get("decoder_dim", c.decoder_dim);
  f.get("max_epochs", c.max_epochs);
  f.get("patience", c.patience);
  f.get("tolerance", c.tolerance);
  f.get("grid_points", c.grid_points);
  f.get("seed", c.seed);
  f.finish();
  if (!(c.learning_rate > 0.0)) throw ConfigError("prelim.learning_rate must be > 0");
  if (c.grid_points < 2) throw ConfigError("prelim.grid_points must be >= 2");
  return c;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  Fields f(j, "experiment");
  if (const Json* s = f.sub("predictor")) c.predictor = predictor_config_from_json(*s);
  if (const Json* s = f.sub("simulator")) c.simulator = simulator_config_from_json(*s);
  if (const Json* s = f.sub("downstream")) c.downstream = downstream_config_from_json(*s);
  if (const Json* s = f.sub("prelim")) c.prelim = prelim_config_from_json(*s);
  f.get("seeds", c.seeds);
  f.get("sample_rate", c.sample_rate);
  f.get("finetune_lr_factor", c.finetune_lr_factor);
  f.get("diagnostic_samples", c.diagnostic_samples);
  f.finish();
  if (c.seeds.empty()) throw ConfigError("experiment.seeds must not be empty");
  if (!(c.sample_rate > 0.0)) throw ConfigError("experiment.sample_rate must be > 0");
  if (!(c.finetune_lr_factor > 0.0)) {
    throw ConfigError("experiment.finetune_lr_factor must be > 0");
  }
  return c;
}

DatasetSpec dataset_spec_from_json(const Json& j) {
  DatasetSpec c;
  Fields f(j, "dataset");
  f.get("kind", c.kind);
  f.get("domains", c.domains);
  f.get("n_per_domain", c.n_per_domain);
  f.get("noise", c.noise);
  f.get("seed", c.seed);
  f.get("csv_path", c.csv_path);
  f.get("domain_column", c.schema.domain_column);
  f.get("label_column", c.schema.label_column);
  f.get("feature_columns", c.schema.feature_columns);
  std::string task = to_string(c.schema.task);
  f.get("task", task);
  c.schema.task = task_from(task, f.path("task"));
  std::string norm = normalization_name(c.normalization);
  f.get("normalization", norm);
  c.normalization = normalization_from(norm, f.path("normalization"));
  f.finish();
  if (c.kind != "moons" && c.kind != "csv") {
    throw ConfigError("dataset.kind: unknown kind '" + c.kind + "' (expected moons or csv)");
  }
  if (c.kind == "csv" && c.csv_path.empty()) throw ConfigError("dataset.csv_path is required");
  if (c.kind == "moons" && c.domains < 3) throw ConfigError("dataset.domains must be >= 3");
  return c;
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  Fields f(j, "config");
  if (const Json* s = f.sub("dataset")) c.dataset = dataset_spec_from_json(*s);
  if (const Json* s = f.sub("experiment")) c.experiment = experiment_config_from_json(*s);
  std::vector<std::string> names;
  f.get("methods", names);
  if (!names.empty()) {
    c.methods.clear();
    for (const std::string& n : names) {
      try {
        c.methods.push_back(parse_method(n));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("config.methods: ") + e.what());
      }
    }
  }
  f.get("output_dir", c.output_dir);
  f.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

NormalizedStream load_dataset(const DatasetSpec& spec) {
  const DomainStream raw = spec.kind == "csv"
                               ? load_csv_stream(spec.csv_path, spec.schema)
                               : make_moons_stream(spec.domains, spec.n_per_domain, spec.noise,
                                                   spec.seed);
  return fit_apply_normalization(raw, spec.normalization);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Json checkpoint_to_json(const std::string& kind, const ParamList& params, const Json& meta) {
  Json tensors = Json::array();
  for (const Tensor& t : params.tensors()) {
    tensors.push_back({{"shape", {t.rows(), t.cols()}}, {"values", t.values()}});
  }
  return {{"version", kCheckpointVersion},
          {"kind", kind},
          {"meta", meta.is_null() ? Json::object() : meta},
          {"tensors", tensors}};
}

void checkpoint_from_json(const Json& j, const std::string& kind, ParamList& params) {
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint version " + j.at("version").dump());
    }
    if (j.at("kind").get<std::string>() != kind) {
      throw ConfigError("checkpoint holds a '" + j.at("kind").get<std::string>() +
                        "' model, expected '" + kind + "'");
    }
    const Json& tensors = j.at("tensors");
    if (tensors.size() != params.size()) {
      throw ConfigError("checkpoint has " + std::to_string(tensors.size()) +
                        " tensors, model has " + std::to_string(params.size()));
    }
    std::vector<Tensor> restored;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      const auto shape = tensors[i].at("shape").get<std::vector<std::size_t>>();
      const Tensor& like = params.tensors()[i];
      if (shape.size() != 2 || shape[0] != like.rows() || shape[1] != like.cols()) {
        throw ConfigError("checkpoint tensor " + std::to_string(i) + " has the wrong shape");
      }
      restored.emplace_back(Shape{shape[0], shape[1]},
                            tensors[i].at("values").get<std::vector<double>>());
    }
    params.tensors() = std::move(restored);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace coda
