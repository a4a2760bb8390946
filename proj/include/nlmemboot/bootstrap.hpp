#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlmemboot/conditional.hpp"
#include "nlmemboot/model.hpp"
#include "nlmemboot/rng.hpp"
#include "nlmemboot/saem.hpp"
#include "nlmemboot/stats.hpp"

namespace nlmemboot {

enum class Scheme { Case, Par, NP, CNP };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

enum class CnpResidualPool { PerSubject, Global };
enum class CnpEtaDraw { SubjectThenSample, PooledFlat };

/// Which random-effect correction to apply in the NP bootstrap. The
/// covariance-matching form maps the empirical covariance of the corrected
/// estimates onto omega_hat exactly; the literal form applies the appendix
/// print A = V_S D_S^{-1/2} V_O D_O^{-1/2}, kept for forensic comparison.
enum class EvdForm { CovarianceMatching, LiteralAppendix };

struct BootstrapConfig {
  Scheme scheme = Scheme::Case;
  int B = 200;
  std::string stratify_by;   // "group": stratified Case resampling by design group
  CnpResidualPool cnp_residual_pool = CnpResidualPool::PerSubject;
  CnpEtaDraw cnp_eta_draw = CnpEtaDraw::SubjectThenSample;
  int M = 100;               // conditional draws per subject for CNP
  std::uint64_t seed = 1;

  void validate() const;
};

struct ReplicateFit {
  enum class Status { Ok, EstimationFailed, NumericFailed };
  Status status = Status::Ok;
  std::string message;
  Eigen::VectorXd theta;  // packed layout; empty when failed
};

struct BootstrapRun {
  Scheme scheme = Scheme::Case;
  std::vector<std::string> parameter_names;
  std::vector<ReplicateFit> replicates;  // size B, replicate order

  int n_success() const;
  int n_failed() const;
  bool unreliable() const;  // more than half of the refits failed

  /// Successful estimates of one packed parameter, replicate order.
  std::vector<double> parameter_values(int param_index) const;
};

struct ParameterSummary {
  double mean = 0.0;
  double se = 0.0;  // sample SD over successful replicates
  Interval ci90, ci95;
};

struct BootstrapSummary {
  Scheme scheme = Scheme::Case;
  int n_success = 0, n_failed = 0;
  bool unreliable = false;
  std::vector<std::string> parameter_names;
  std::vector<ParameterSummary> parameters;
};

/// Case bootstrap: N subjects drawn with replacement (within each group when
/// stratified, preserving group sizes); resampled subjects keep their donor's
/// design and observations but get fresh unique ids.
Dataset resample_case(const Dataset& data, const std::string& stratify_by, Rng& rng);

/// Parametric bootstrap: eta* ~ N(0, omega_hat), eps* ~ N(0, 1) and responses
/// rebuilt on the original design. A non-PSD omega_hat is clipped to the
/// nearest PSD matrix with a warning on stderr.
Dataset resample_parametric(const ModelSpec& spec, const PopulationParams& theta_hat,
                            const Design& design, Rng& rng);

struct EvdCorrectionResult {
  Eigen::MatrixXd corrected;      // one row per subject
  bool diagonal_fallback = false; // singular S forced per-dimension scaling
};

/// Center the per-subject estimates and rescale them through the eigenvalue
/// decompositions of their empirical covariance S and of omega_hat, so the
/// corrected set has empirical covariance omega_hat.
EvdCorrectionResult correct_random_effects_evd(
    const Eigen::MatrixXd& ebe, const Eigen::MatrixXd& omega_hat,
    EvdForm form = EvdForm::CovarianceMatching);

/// Center to mean zero and scale to sample standard deviation one (n-1).
std::vector<double> correct_residuals(const std::vector<double>& residuals);

/// Weighted residuals (y - f(x, mu_hat, ebe_i)) / g for every observation,
/// flattened in dataset order.
std::vector<double> ebe_residuals(const ModelSpec& spec, const Dataset& data,
                                  const PopulationParams& theta_hat,
                                  const Eigen::MatrixXd& ebe);

/// Non-parametric residual bootstrap: corrected random effects resampled per
/// subject slot, corrected residuals resampled globally, design preserved.
Dataset resample_nonparametric(const ModelSpec& spec,
                               const PopulationParams& theta_hat,
                               const Eigen::MatrixXd& ebe,
                               const std::vector<double>& residuals,
                               const Design& design, Rng& rng,
                               EvdForm form = EvdForm::CovarianceMatching);

/// Conditional non-parametric bootstrap: random effects and residuals are
/// resampled from the per-subject conditional draws (centered, never
/// variance-inflated), and responses rebuilt on the original design.
Dataset resample_conditional_np(const ModelSpec& spec,
                                const PopulationParams& theta_hat,
                                const ConditionalDraws& conditional,
                                const Design& design, const BootstrapConfig& config,
                                Rng& rng);

/// Full resample-and-refit loop. Refits start from the original theta_hat;
/// failures are recorded, not fatal. Replicates own RNG streams keyed by
/// (seed, replicate index), so results do not depend on the thread schedule.
BootstrapRun run_bootstrap(const ModelSpec& spec, const Dataset& data,
                           const PopulationEstimate& estimate,
                           const ConditionalDraws* conditional,
                           const BootstrapConfig& config,
                           const SaemSettings& fit_settings, int parallelism = 1);

/// Percentile interval [Q(alpha/2), Q(1-alpha/2)] from the type-7 empirical
/// quantile; unavailable with fewer than two finite values.
Interval percentile_ci(const std::vector<double>& values, double alpha);

BootstrapSummary summarize_run(const BootstrapRun& run);

}  // namespace nlmemboot
