#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlmemboot/scenario.hpp"
#include "nlmemboot/stats.hpp"

namespace nlmemboot {

/// One uncertainty method's output for one simulated dataset: the point
/// estimate (bootstrap mean, or theta_hat for the asymptotic method), its SE
/// counterpart, and CIs per confidence level.
struct MethodResult {
  std::string method;
  Eigen::VectorXd estimate;
  Eigen::VectorXd se;
  std::map<double, std::vector<Interval>> cis;  // alpha -> per parameter
  int n_boot_success = 0;
  int n_boot_failed = 0;
};

struct ReplicateRecord {
  int k = 0;
  bool fit_ok = false;
  std::string message;
  Eigen::VectorXd theta_hat;  // packed, original fit
  std::vector<MethodResult> methods;
};

/// Simulate dataset k, fit it (initialized at the truth), then evaluate every
/// configured method. Deterministic given (master_seed, k).
ReplicateRecord run_replicate(const ScenarioSpec& scenario, int k,
                              std::uint64_t master_seed);

// Evaluation metrics.
double coverage_rate(const std::vector<Interval>& cis, double theta0);
double mc_se(double expected_coverage, int k_replicates);
double relative_bias_params(const std::vector<double>& estimates, double theta0);
double empirical_se(const std::vector<double>& estimates, double theta0);
double relative_bias_se(const std::vector<double>& ses, double se_empirical);

struct CoverageRow {
  std::string scenario, method, parameter;
  double alpha = 0.0;
  double coverage = 0.0;
  double mc_se = 0.0;
  int k_available = 0;
};

struct BiasRow {
  std::string scenario, method, parameter;
  double rb_param_pct = 0.0;   // NaN when theta0 == 0
  double rb_se_pct = 0.0;      // NaN when the empirical SE is 0
  double se_empirical = 0.0;
};

struct CoverageReport {
  std::string scenario_name;
  std::vector<std::string> parameter_names;
  std::vector<CoverageRow> coverage;
  std::vector<BiasRow> bias;
  std::vector<ReplicateRecord> records;  // sorted by k
  int n_failed_fits = 0;
  bool flagged = false;  // more than 20% of the fits failed
};

CoverageReport aggregate_records(const ScenarioSpec& scenario,
                                 std::vector<ReplicateRecord> records);

/// Run the K replicates (in parallel when asked) and aggregate. When
/// persist_dir is non-empty each replicate is written there as it finishes
/// and existing replicates of the same study are reused, so interrupted
/// studies resume.
CoverageReport run_study(const ScenarioSpec& scenario, std::uint64_t master_seed,
                         int parallelism = 1, const std::string& persist_dir = "");

std::string coverage_csv(const CoverageReport& report);
std::string bias_csv(const CoverageReport& report);

}  // namespace nlmemboot
