#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlmemboot/rng.hpp"

namespace nlmemboot {

enum class Structural { Intercept, SigEmax };
enum class ErrorModel { Constant, Proportional, Combined };
enum class Transform { Normal, LogNormal, Fixed };

/// Structural model, residual error model, per-parameter transforms and the
/// pattern of estimated variance/covariance terms. The pattern is a symmetric
/// boolean mask over all parameters; a true diagonal entry marks a parameter
/// carrying a random effect, so Fixed-transform parameters must have a false
/// diagonal.
struct ModelSpec {
  Structural structural = Structural::SigEmax;
  ErrorModel error_model = ErrorModel::Proportional;
  std::vector<Transform> transforms;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> omega_pattern;

  int n_params() const;
  std::vector<std::string> param_names() const;

  /// Parameter indices that carry a random effect, in parameter order.
  std::vector<int> random_dims() const;
  int n_random() const { return static_cast<int>(random_dims().size()); }

  int n_sigma() const { return error_model == ErrorModel::Combined ? 2 : 1; }
  std::vector<std::string> sigma_names() const;

  /// Throws InvalidInputError when the pattern is asymmetric, a Fixed
  /// parameter has a random effect, or a covariance lacks its variances.
  void validate() const;

  /// The dose-response model of the simulation study: E0, Emax, ED50
  /// log-normal with the (Emax, ED50) covariance estimated, gamma shared by
  /// all subjects, proportional residual error unless overridden.
  static ModelSpec sig_emax(ErrorModel error = ErrorModel::Proportional);

  /// One-parameter constant model, handy for linear random-intercept setups.
  static ModelSpec intercept(Transform transform,
                             bool random_effect = true,
                             ErrorModel error = ErrorModel::Constant);
};

/// Population parameters theta = (mu, Omega, sigma) on the natural scale.
struct PopulationParams {
  Eigen::VectorXd mu;      // one entry per structural parameter
  Eigen::MatrixXd omega;   // over random-effect dimensions only
  Eigen::VectorXd sigma;   // residual coefficient(s), >= 0

  void validate(const ModelSpec& spec) const;
};

struct SubjectDesign {
  std::string id;
  std::vector<double> x;   // dose per observation, >= 0
  std::string group;       // optional stratification label
};

struct Design {
  std::vector<SubjectDesign> subjects;

  int n_subjects() const { return static_cast<int>(subjects.size()); }
  int n_observations() const;
  void validate() const;
  bool operator==(const Design& other) const;
};

/// Observed (or simulated) data aligned with a design.
struct Dataset {
  Design design;
  std::vector<std::vector<double>> y;  // y[i][j] matches design.subjects[i].x[j]

  // Provenance when simulated.
  bool simulated = false;
  std::uint64_t seed = 0;
  std::optional<PopulationParams> generating_theta;

  void validate() const;
};

/// Flat parameter vector layout shared by the estimator, bootstrap tables and
/// reports: mu entries first, then omega variances (parameter order), then
/// estimated covariances (upper triangle, row-major), then sigma.
struct ParamLayout {
  explicit ParamLayout(const ModelSpec& spec);

  std::vector<std::string> names;
  int n_fixed = 0;      // structural fixed effects (all mu entries)
  int n_variance = 0;   // omega entries + sigma coefficients
  int size() const { return n_fixed + n_variance; }

  Eigen::VectorXd pack(const PopulationParams& p) const;
  PopulationParams unpack(const Eigen::VectorXd& v) const;

  int index_of(const std::string& name) const;  // -1 when absent

 private:
  ModelSpec spec_;
  std::vector<std::pair<int, int>> omega_entries_;  // (eta row, eta col)
};

/// Dose-response value for one subject. Convention 0^gamma = 0 for gamma > 0,
/// so the placebo dose returns E0 exactly.
double evaluate_structural(Structural model, const Eigen::VectorXd& psi, double x);

/// Residual standard deviation g at a structural value f.
double evaluate_error_sd(ErrorModel model, const Eigen::VectorXd& sigma, double f);

/// Individual parameters psi from fixed effects and random effects:
/// LogNormal psi = mu*exp(eta), Normal psi = mu + eta, Fixed psi = mu.
Eigen::VectorXd transform_psi(const ModelSpec& spec, const Eigen::VectorXd& mu,
                              const Eigen::VectorXd& eta);

/// Simulate y_ij = f(x_ij, psi_i) + g(...)*eps_ij with eta_i ~ N(0, Omega)
/// and eps_ij ~ N(0,1). Per-subject streams are keyed by subject id, so the
/// same seed gives a bit-identical dataset regardless of evaluation order.
Dataset simulate_dataset(const ModelSpec& spec, const PopulationParams& theta,
                         const Design& design, std::uint64_t seed);

}  // namespace nlmemboot
