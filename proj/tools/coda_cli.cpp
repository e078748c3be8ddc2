// coda command-line tool: data generation, pipeline runs, sweeps, bound checks.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "coda/config.hpp"

namespace fs = std::filesystem;
using namespace coda;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

fs::path default_out_dir(const std::string& fallback) {
  if (const char* env = std::getenv("CODA_OUT_DIR"); env && *env) return env;
  return fallback;
}

std::string csv_of(const DomainDataset& d) {
  std::ostringstream s;
  write_domain_csv(s, d);
  return s.str();
}

std::string csv_of(const CorrelationMatrix& c) {
  std::ostringstream s;
  write_matrix_csv(s, c);
  return s.str();
}

std::size_t thread_cap(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_gen_moons(std::size_t domains, std::size_t n, double noise, std::uint64_t seed,
                  const fs::path& out) {
  const DomainStream stream = make_moons_stream(domains, n, noise, seed);
  std::vector<const DomainDataset*> all;
  for (const DomainDataset& d : stream.sources) all.push_back(&d);
  all.push_back(&stream.target.reveal_for_evaluation());

  Json files = Json::array();
  for (const DomainDataset* d : all) {
    std::ostringstream name;
    name << "domain_" << std::setw(2) << std::setfill('0') << d->domain_index() << ".csv";
    write_file_atomic(out / name.str(), csv_of(*d));
    files.push_back({{"domain", d->domain_index()}, {"file", name.str()}, {"rows", d->rows()}});
  }
  const Json manifest = {{"generator", "rotated-moons"},
                         {"domains", domains},
                         {"n_per_domain", n},
                         {"noise", noise},
                         {"seed", seed},
                         {"degrees_per_domain", kMoonsDegreesPerDomain},
                         {"files", files}};
  write_file_atomic(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "wrote " << all.size() << " domain files to " << out.string() << "\n";
  return kExitOk;
}

// Resolves the output directory: flag, then config, then environment, then default.
fs::path output_dir_for(const std::string& flag, const fs::path& config_path,
                        const RunConfig& config) {
  if (!flag.empty()) return flag;
  std::ifstream in(config_path);
  const Json raw = Json::parse(in, nullptr, false);
  if (raw.is_object() && raw.contains("output_dir")) return config.output_dir;
  return default_out_dir(config.output_dir);
}

int cmd_run(const fs::path& config_path, const std::string& out_flag, std::size_t threads) {
  const RunConfig config = load_run_config(config_path);
  const fs::path out = output_dir_for(out_flag, config_path, config);
  const NormalizedStream data = load_dataset(config.dataset);
  const DomainStream& stream = data.stream;

  const std::vector<CorrelationMatrix> sources = source_correlations(stream);
  for (std::size_t t = 0; t < sources.size(); ++t) {
    write_file_atomic(out / "correlations" / ("source_" + std::to_string(t) + ".csv"),
                      csv_of(sources[t]));
  }

  Json reports = Json::array();
  std::vector<ExperimentReport> all;
  for (Method method : config.methods) {
    std::vector<SeedArtifacts> artifacts;
    ExperimentReport r =
        run_experiment(stream, method, config.experiment, &data.stats, &artifacts, threads);
    for (const SeedArtifacts& a : artifacts) {
      const std::string tag = to_string(method) + "_seed" + std::to_string(a.seed);
      if (a.predicted) {
        write_file_atomic(out / "correlations" / ("predicted_" + tag + ".csv"),
                          csv_of(*a.predicted));
      }
      if (a.generated) {
        write_file_atomic(out / "generated" / (tag + ".csv"), csv_of(*a.generated));
      }
    }
    std::cerr << r.method << ": mean " << r.mean << " (" << r.seconds << " s)\n";
    reports.push_back(to_json(r));
    all.push_back(std::move(r));
  }
  const Json doc = {{"config", to_json(config)},
                    {"normalization",
                     {{"kept", data.stats.kept_names}, {"dropped", data.stats.dropped_names}}},
                    {"reports", reports}};
  write_file_atomic(out / "report.json", doc.dump(2) + "\n");
  std::ostringstream text;
  write_report_text(text, all);
  write_file_atomic(out / "report.txt", text.str());
  std::cout << text.str();
  return kExitOk;
}

int cmd_sweep(const fs::path& config_path, const std::string& param_name,
              const std::vector<double>& values, const std::string& out_flag,
              std::size_t threads, bool validate) {
  const SweepParam param = parse_sweep_param(param_name);
  if (values.empty()) throw CLI::ValidationError("--values", "needs at least one value");
  const RunConfig config = load_run_config(config_path);
  const fs::path out = output_dir_for(out_flag, config_path, config);
  const NormalizedStream data = load_dataset(config.dataset);
  const std::vector<SweepPoint> points =
      sweep(data.stream, param, values, config.experiment, &data.stats, threads, validate);

  Json reports = Json::array();
  for (const SweepPoint& p : points) {
    Json entry{{"value", p.value}, {"report", to_json(p.report)}};
    if (p.validation) entry["validation"] = to_json(*p.validation);
    reports.push_back(std::move(entry));
  }
  const std::string stem = "sweep_" + to_string(param);
  write_file_atomic(out / (stem + ".json"), reports.dump(2) + "\n");
  std::ostringstream csv;
  write_sweep_csv(csv, param, points);
  write_file_atomic(out / (stem + ".csv"), csv.str());
  std::cout << csv.str();
  return kExitOk;
}

int cmd_verify_bound(std::size_t pairs, std::size_t max_support, std::size_t dims,
                     std::uint64_t seed, bool identical, const std::string& out) {
  PairGeneratorConfig gen;
  gen.max_dim = dims;
  gen.max_support = max_support;
  std::mt19937_64 rng(seed);
  Json reports = Json::array();
  std::size_t violations = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    auto [p, q] = random_pair(rng, gen);
    if (identical) q = p;
    const BoundReport b = verify_bound(p, q);
    const Lemma2Report l = lemma2_check(p, q);
    Json j = to_json(b);
    j["lemma2_ok"] = l.all_ok();
    if (b.violated || !l.all_ok()) ++violations;
    reports.push_back(std::move(j));
  }
  const std::string text = reports.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
  std::cerr << pairs << " pairs, " << violations << " violations\n";
  return violations == 0 ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coda: correlation-aware future domain generation"};
  app.require_subcommand(1);
  std::size_t threads = 1;
  app.add_option("--threads", threads, "Cap on worker threads across seeds (0 = all cores)")
      ->capture_default_str();

  auto* gen = app.add_subcommand("gen-moons", "Write a rotated two-moons stream, one CSV per domain");
  std::size_t domains = 10, n = 200;
  double noise = kMoonsDefaultNoise;
  std::uint64_t seed = 0;
  std::string gen_out;
  gen->add_option("--domains", domains, "Number of domains")->capture_default_str()
      ->check(CLI::Range(3, 1000));
  gen->add_option("--n", n, "Rows per domain (even)")->capture_default_str();
  gen->add_option("--noise", noise, "Gaussian noise std")->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", seed, "Random seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory (default: $CODA_OUT_DIR or coda-out)");

  auto* run = app.add_subcommand("run", "Run the configured methods and write reports");
  std::string config_path, run_out;
  run->add_option("--config", config_path, "Run config JSON")->required();
  run->add_option("--out", run_out, "Output directory override");

  auto* sw = app.add_subcommand("sweep", "Repeat the CODA run over values of one parameter");
  std::string sweep_config, param, sweep_out;
  bool validate = false;
  std::vector<double> values;
  sw->add_option("--config", sweep_config, "Run config JSON")->required();
  sw->add_option("--param", param, "lambda_c or sample_rate")->required()
      ->check(CLI::IsMember({"lambda_c", "sample_rate"}));
  sw->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sw->add_option("--out", sweep_out, "Output directory override");
  sw->add_flag("--validate", validate,
               "Also score each value with the last source held out as validation");

  auto* vb = app.add_subcommand("verify-bound", "Check the correlation bound on random pairs");
  std::size_t pairs = 1000, max_support = 16, dims = 4;
  std::uint64_t vb_seed = 0;
  bool identical = false;
  std::string vb_out;
  vb->add_option("--pairs", pairs, "Number of random pairs")->capture_default_str()
      ->check(CLI::PositiveNumber);
  vb->add_option("--max-support", max_support, "Largest support size")->capture_default_str()
      ->check(CLI::Range(2, 24));
  vb->add_option("--dims", dims, "Largest dimension")->capture_default_str()
      ->check(CLI::Range(2, 16));
  vb->add_option("--seed", vb_seed, "Random seed")->capture_default_str();
  vb->add_flag("--identical", identical, "Use Q = P for every pair");
  vb->add_option("--out", vb_out, "Write the JSON array here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    const std::size_t cap = thread_cap(threads);
    if (*gen) {
      return cmd_gen_moons(domains, n, noise, seed,
                           gen_out.empty() ? default_out_dir("coda-out") : fs::path(gen_out));
    }
    if (*run) return cmd_run(config_path, run_out, cap);
    if (*sw) return cmd_sweep(sweep_config, param, values, sweep_out, cap, validate);
    if (*vb) return cmd_verify_bound(pairs, max_support, dims, vb_seed, identical, vb_out);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
