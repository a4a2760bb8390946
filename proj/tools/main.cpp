#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nlmemboot/bootstrap.hpp"
#include "nlmemboot/errors.hpp"
#include "nlmemboot/fim.hpp"
#include "nlmemboot/io.hpp"
#include "nlmemboot/scenario.hpp"
#include "nlmemboot/serialize.hpp"
#include "nlmemboot/study.hpp"
#include "nlmemboot/svg_report.hpp"

namespace fs = std::filesystem;
using namespace nlmemboot;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;       // malformed input or configuration
constexpr int kExitEstimation = 3;  // estimation failure
constexpr int kExitMissing = 4;     // missing prerequisite artifact

struct MissingArtifactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("NLMEMBOOT_OUT")) return env;
  return ".";
}

ScenarioSpec load_scenario(const std::string& name_or_path) {
  if (fs::exists(name_or_path) && !fs::is_directory(name_or_path))
    return scenario_from_json(nlohmann::json::parse(read_file(name_or_path)));
  try {
    return scenario_preset(name_or_path);
  } catch (const InvalidInputError&) {
    std::string msg = "unknown scenario '" + name_or_path + "'. Catalog:";
    for (const auto& n : scenario_catalog()) msg += "\n  " + n;
    throw InvalidInputError(msg);
  }
}

PopulationParams default_init(double gamma) {
  PopulationParams p;
  p.mu.resize(4);
  p.mu << 5.0, 30.0, 500.0, gamma;
  p.omega.resize(3, 3);
  p.omega << 0.09, 0.0, 0.0, 0.0, 0.49, 0.245, 0.0, 0.245, 0.49;
  p.sigma.resize(1);
  p.sigma << 0.1;
  return p;
}

struct FitOptions {
  std::string data_path;
  std::string model = "emax";
  std::string error = "proportional";
  std::vector<double> init_mu;
  std::vector<double> init_omega2;
  double init_cov = 0.245;
  std::vector<double> init_sigma;
  int conditional_m = 100;
  std::uint64_t seed = 12345;
  std::string out;
};

int cmd_fit(const FitOptions& opt) {
  const Dataset data = read_dataset_csv(opt.data_path);
  ErrorModel error = ErrorModel::Proportional;
  if (opt.error == "constant" || opt.error == "const")
    error = ErrorModel::Constant;
  else if (opt.error == "combined")
    error = ErrorModel::Combined;
  else if (opt.error != "proportional" && opt.error != "prop")
    throw InvalidInputError("unknown error model: " + opt.error);

  const ModelSpec spec = ModelSpec::sig_emax(error);
  PopulationParams init = default_init(opt.model == "hill" ? 3.0 : 1.0);
  if (!opt.init_mu.empty()) {
    if (opt.init_mu.size() != 4)
      throw InvalidInputError("--init-mu needs 4 values: E0,Emax,ED50,gamma");
    for (int p = 0; p < 4; ++p) init.mu(p) = opt.init_mu[p];
  }
  if (!opt.init_omega2.empty()) {
    if (opt.init_omega2.size() != 3)
      throw InvalidInputError("--init-omega2 needs 3 values");
    for (int d = 0; d < 3; ++d) init.omega(d, d) = opt.init_omega2[d];
  }
  init.omega(1, 2) = init.omega(2, 1) = opt.init_cov;
  if (!opt.init_sigma.empty()) {
    init.sigma.resize(static_cast<Eigen::Index>(opt.init_sigma.size()));
    for (std::size_t i = 0; i < opt.init_sigma.size(); ++i)
      init.sigma(i) = opt.init_sigma[i];
  } else if (error == ErrorModel::Combined) {
    init.sigma.resize(2);
    init.sigma << 0.5, 0.1;
  }

  SaemSettings settings;
  settings.seed = opt.seed;
  const PopulationEstimate estimate = fit_saem(spec, data, init, settings);

  const fs::path out = resolve_out(opt.out);
  atomic_write(out / "fit.json",
               estimate_to_json(spec, estimate, true).dump(2) + "\n");
  if (opt.conditional_m > 0) {
    ConditionalSettings cs;
    const ConditionalDraws draws =
        sample_conditional(spec, data, estimate.theta_hat, opt.conditional_m, cs,
                           Rng(opt.seed).split("conditional").key());
    atomic_write(out / "conditional.json", conditional_to_json(draws).dump() + "\n");
  }
  std::cout << "fit written to " << (out / "fit.json").string() << "\n";
  return kExitOk;
}

struct BootstrapOptions {
  std::string data_path;
  std::vector<std::string> schemes = {"case"};
  int B = 200;
  int M = 100;
  std::uint64_t seed = 1;
  bool stratify = false;
  bool fit_first = false;
  int parallelism = 1;
  std::string fit_dir;
  std::string out;
};

int cmd_bootstrap(const BootstrapOptions& opt) {
  const Dataset data = read_dataset_csv(opt.data_path);
  const fs::path out = resolve_out(opt.out);
  const fs::path fit_dir = opt.fit_dir.empty() ? out : fs::path(opt.fit_dir);

  if (opt.fit_first) {
    FitOptions fit_opt;
    fit_opt.data_path = opt.data_path;
    fit_opt.conditional_m = opt.M;
    fit_opt.seed = opt.seed;
    fit_opt.out = fit_dir.string();
    cmd_fit(fit_opt);
  }

  const fs::path fit_path = fit_dir / "fit.json";
  if (!fs::exists(fit_path))
    throw MissingArtifactError("no fit artifact at " + fit_path.string() +
                               "; run `nlmemboot fit` first or pass --fit-first");
  ModelSpec spec;
  const PopulationEstimate estimate =
      estimate_from_json(nlohmann::json::parse(read_file(fit_path)), &spec);

  std::optional<ConditionalDraws> conditional;
  const fs::path cond_path = fit_dir / "conditional.json";
  if (fs::exists(cond_path))
    conditional = conditional_from_json(nlohmann::json::parse(read_file(cond_path)));

  for (const auto& scheme : opt.schemes) {
    BootstrapConfig config;
    config.scheme = scheme_from_name(scheme);
    config.B = opt.B;
    config.M = opt.M;
    config.seed = opt.seed;
    if (opt.stratify) config.stratify_by = "group";
    if ((config.scheme == Scheme::NP || config.scheme == Scheme::CNP) &&
        !conditional)
      throw MissingArtifactError(
          scheme + " bootstrap needs conditional draws: rerun `nlmemboot fit` "
                   "with --M > 0 (or use --fit-first) so conditional.json exists");
    const BootstrapRun run =
        run_bootstrap(spec, data, estimate, conditional ? &*conditional : nullptr,
                      config, estimate.settings, opt.parallelism);
    atomic_write(out / ("bootstrap_" + scheme + ".csv"), bootstrap_csv(run));
    atomic_write(out / ("bootstrap_" + scheme + "_summary.json"),
                 summary_to_json(summarize_run(run)).dump(2) + "\n");
    std::cout << "bootstrap " << scheme << ": " << run.n_success() << "/"
              << config.B << " refits ok\n";
  }
  return kExitOk;
}

struct SimulateOptions {
  std::string scenario;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_simulate(const SimulateOptions& opt) {
  const ScenarioSpec scenario = load_scenario(opt.scenario);
  const Dataset data = simulate_dataset(scenario.model, scenario.theta_true,
                                        scenario.design, opt.seed);
  const fs::path out = resolve_out(opt.out);
  write_dataset_csv(out / (scenario.name + "_dataset.csv"), data);
  // Scenario echo, editable and replayable through --scenario <file>.
  atomic_write(out / (scenario.name + "_scenario.json"),
               scenario_to_json(scenario).dump(2) + "\n");
  std::cout << "dataset written to "
            << (out / (scenario.name + "_dataset.csv")).string() << "\n";
  return kExitOk;
}

struct StudyOptions {
  std::string scenario;
  int K = -1, B = -1, M = -1;
  std::vector<std::string> methods;
  std::vector<double> alphas;
  std::uint64_t seed = 20240101;
  int parallelism = 1;
  bool long_run = false;
  std::string out;
};

void write_study_outputs(const fs::path& dir, const CoverageReport& report,
                         const std::vector<double>& alphas) {
  atomic_write(dir / "coverage.csv", coverage_csv(report));
  atomic_write(dir / "bias.csv", bias_csv(report));
  for (double alpha : alphas) {
    const std::string name =
        "coverage_" + report.scenario_name + "_alpha" + format_g6(alpha) + ".svg";
    atomic_write(dir / name, coverage_svg(report, alpha));
  }
}

int cmd_study(const StudyOptions& opt) {
  ScenarioSpec scenario = load_scenario(opt.scenario);
  if (opt.long_run) {
    scenario.K = 200;
    scenario.B = 200;
  }
  if (opt.K > 0) scenario.K = opt.K;
  if (opt.B > 0) scenario.B = opt.B;
  if (opt.M > 0) scenario.M = opt.M;
  if (!opt.methods.empty()) scenario.methods = opt.methods;
  if (!opt.alphas.empty()) scenario.alphas = opt.alphas;
  scenario.validate();

  const fs::path out = resolve_out(opt.out);
  const fs::path study_dir = out / ("study_" + scenario.name);
  const CoverageReport report =
      run_study(scenario, opt.seed, opt.parallelism, study_dir.string());
  write_study_outputs(study_dir, report, scenario.alphas);
  if (report.flagged)
    std::cerr << "warning: " << report.n_failed_fits
              << " replicate fits failed (>20%); report flagged\n";
  std::cout << "study outputs in " << study_dir.string() << "\n";
  return kExitOk;
}

int cmd_report(const std::string& study_dir_in) {
  const fs::path dir = study_dir_in;
  const fs::path meta_path = dir / "meta.json";
  if (!fs::exists(meta_path))
    throw MissingArtifactError("no study at " + dir.string() +
                               " (meta.json missing); run `nlmemboot study` first");
  const auto meta = nlohmann::json::parse(read_file(meta_path));
  const ScenarioSpec scenario = scenario_from_json(meta.at("scenario"));

  std::vector<ReplicateRecord> records;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("rep_", 0) == 0 && entry.path().extension() == ".json")
      records.push_back(
          replicate_from_json(nlohmann::json::parse(read_file(entry.path()))));
  }
  if (records.empty())
    throw MissingArtifactError("study at " + dir.string() + " has no replicates");
  if (static_cast<int>(records.size()) < scenario.K)
    std::cerr << "warning: " << records.size() << " of " << scenario.K
              << " replicates present; reporting the completed subset\n";
  const CoverageReport report = aggregate_records(scenario, std::move(records));
  write_study_outputs(dir, report, scenario.alphas);
  std::cout << "report rebuilt in " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NLMEM bootstrap toolkit: SAEM fits, conditional sampling, "
               "asymptotic and bootstrap confidence intervals, coverage studies"};
  app.require_subcommand(1);

  FitOptions fit_opt;
  auto* fit = app.add_subcommand("fit", "fit a dose-response NLMEM by SAEM");
  fit->add_option("--data", fit_opt.data_path, "dataset CSV (id,x,y)")->required();
  fit->add_option("--model", fit_opt.model, "emax or hill (gamma init 1 or 3)")
      ->check(CLI::IsMember({"emax", "hill"}));
  fit->add_option("--error", fit_opt.error, "constant, proportional or combined");
  fit->add_option("--init-mu", fit_opt.init_mu, "E0,Emax,ED50,gamma")->delimiter(',');
  fit->add_option("--init-omega2", fit_opt.init_omega2, "omega2 diagonal")
      ->delimiter(',');
  fit->add_option("--init-cov", fit_opt.init_cov, "cov(Emax, ED50) init");
  fit->add_option("--init-sigma", fit_opt.init_sigma, "sigma init")->delimiter(',');
  fit->add_option("--M", fit_opt.conditional_m,
                  "conditional draws per subject (0 disables)");
  fit->add_option("--seed", fit_opt.seed, "RNG seed");
  fit->add_option("--out", fit_opt.out, "output directory (default $NLMEMBOOT_OUT)");

  BootstrapOptions boot_opt;
  auto* boot = app.add_subcommand("bootstrap", "bootstrap a previous fit");
  boot->add_option("--data", boot_opt.data_path, "dataset CSV")->required();
  boot->add_option("--scheme", boot_opt.schemes, "case, par, np, cnp")
      ->delimiter(',');
  boot->add_option("--B", boot_opt.B, "bootstrap replicates");
  boot->add_option("--M", boot_opt.M, "conditional draws (cnp)");
  boot->add_option("--seed", boot_opt.seed, "RNG seed");
  boot->add_flag("--stratify", boot_opt.stratify,
                 "stratify case resampling by design group");
  boot->add_flag("--fit-first", boot_opt.fit_first, "run the fit before bootstrapping");
  boot->add_option("--fit", boot_opt.fit_dir, "directory holding fit.json");
  boot->add_option("--parallelism", boot_opt.parallelism, "worker threads");
  boot->add_option("--out", boot_opt.out, "output directory");

  SimulateOptions sim_opt;
  auto* sim = app.add_subcommand("simulate", "simulate a dataset from a scenario");
  sim->add_option("--scenario", sim_opt.scenario, "preset name or scenario file")
      ->required();
  sim->add_option("--seed", sim_opt.seed, "RNG seed");
  sim->add_option("--out", sim_opt.out, "output directory");

  StudyOptions study_opt;
  auto* study = app.add_subcommand("study", "run a coverage/bias study");
  study->add_option("--scenario", study_opt.scenario, "preset name or scenario file")
      ->required();
  study->add_option("--K", study_opt.K, "simulated datasets");
  study->add_option("--B", study_opt.B, "bootstraps per dataset");
  study->add_option("--M", study_opt.M, "conditional draws per subject");
  study->add_option("--methods", study_opt.methods,
                    "subset of asymptotic,case,par,np,cnp")
      ->delimiter(',');
  study->add_option("--alpha", study_opt.alphas, "confidence levels")->delimiter(',');
  study->add_option("--seed", study_opt.seed, "master seed");
  study->add_option("--parallelism", study_opt.parallelism, "worker threads");
  study->add_flag("--long-run", study_opt.long_run,
                  "paper-scale profile (K=200, B=200)");
  study->add_option("--out", study_opt.out, "output directory");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "rebuild reports from a study directory");
  report->add_option("--study", report_dir, "study directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*fit) return cmd_fit(fit_opt);
    if (*boot) return cmd_bootstrap(boot_opt);
    if (*sim) return cmd_simulate(sim_opt);
    if (*study) return cmd_study(study_opt);
    if (*report) return cmd_report(report_dir);
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InvalidConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const EstimationError& e) {
    std::cerr << "estimation failed: " << e.what() << "\n";
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "estimation failed: " << e.what() << "\n";
    return kExitEstimation;
  }
  return kExitOk;
}
