#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlmemboot/model.hpp"
#include "nlmemboot/rng.hpp"
#include "nlmemboot/saem.hpp"

namespace nlmemboot::detail {

/// View of one subject's data plus its position in the original dataset.
struct SubjectRef {
  int original_index = 0;
  const SubjectDesign* design = nullptr;
  const std::vector<double>* y = nullptr;
};

/// Subjects sorted by id. All SAEM accumulations run in this order, which
/// together with id-keyed RNG streams makes fits invariant to subject order.
std::vector<SubjectRef> canonical_subjects(const Dataset& data);

/// Population-level context for subject likelihood evaluations. Random-effect
/// dimensions are parameterized on the phi scale: phi_d = lambda_d + eta_d
/// with psi = exp(phi) for log-normal parameters and psi = phi for normal
/// ones. Non-random parameters come from mu on the natural scale.
struct LikContext {
  const ModelSpec* spec = nullptr;
  Eigen::VectorXd mu;       // natural scale, full length; random dims unused
  Eigen::VectorXd sigma;
  std::vector<int> random_dims;
  double g_floor = 1e-10;

  // Hot-path shortcut for the standard dose-response parameterization
  // (E0, Emax, ED50 log-normal with random effects, gamma shared): x^gamma is
  // cached per unique dose and ED50^gamma collapses to one exp. Refresh after
  // every change to mu.
  bool fast_sigemax = false;
  std::vector<double> cached_doses;
  std::vector<double> cached_dose_pow;
  void refresh_dose_cache(const std::vector<double>& unique_doses);

  Eigen::VectorXd psi_from_phi(const Eigen::VectorXd& phi) const;
};

struct LikEval {
  double loglik = 0.0;   // data log density up to an additive constant
  double wrss = 0.0;     // sum of squared weighted residuals
  Eigen::VectorXd f;
  Eigen::VectorXd r;     // y - f
  bool valid = false;
};

/// Data log-likelihood of one subject at phi; invalid parameter regions
/// yield valid=false with loglik=-inf instead of throwing.
LikEval eval_subject(const LikContext& ctx, const SubjectRef& subj,
                     const Eigen::VectorXd& phi);

/// Gaussian prior over phi with mean lambda and covariance omega.
struct PriorContext {
  Eigen::VectorXd lambda;
  Eigen::MatrixXd omega;
  Eigen::MatrixXd proposal_factor;       // L with L L^T = omega
  Eigen::LDLT<Eigen::MatrixXd> solver;

  PriorContext() = default;
  PriorContext(Eigen::VectorXd lambda_in, const Eigen::MatrixXd& omega_in);
  double log_density(const Eigen::VectorXd& phi) const;  // quadratic part only
};

struct ChainState {
  Eigen::VectorXd phi;
  LikEval lik;
  double log_prior = 0.0;
};

ChainState make_chain_state(const LikContext& ctx, const SubjectRef& subj,
                            const PriorContext& prior, const Eigen::VectorXd& phi);

struct KernelScales {
  double joint = 1.0;
  Eigen::VectorXd component;

  static KernelScales defaults(const MhSettings& mh, int dim);
};

struct AcceptCounts {
  long long prior_accepted = 0, prior_proposed = 0;
  long long joint_accepted = 0, joint_proposed = 0;
  Eigen::ArrayXd comp_accepted, comp_proposed;

  explicit AcceptCounts(int dim = 0)
      : comp_accepted(Eigen::ArrayXd::Zero(dim)),
        comp_proposed(Eigen::ArrayXd::Zero(dim)) {}

  long long accepted_total() const;
  long long proposed_total() const;
};

/// One sweep: n_reps transitions of the prior independence kernel, the joint
/// random walk and the componentwise random walk, in that order.
void mh_sweep(const LikContext& ctx, const SubjectRef& subj,
              const PriorContext& prior, const KernelScales& scales, int n_reps,
              ChainState& state, Rng& rng, AcceptCounts& counts);

/// Robbins-Monro style log-scale update toward the target acceptance.
void adapt_scales(const MhSettings& mh, const AcceptCounts& counts,
                  KernelScales& scales);

}  // namespace nlmemboot::detail
