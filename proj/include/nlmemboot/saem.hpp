#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "nlmemboot/model.hpp"

namespace nlmemboot {

/// Metropolis-Hastings proposal configuration. Each sweep applies three
/// kernels in sequence: an independence proposal from the population prior,
/// a joint random walk and a componentwise random walk; the random-walk
/// scales adapt toward the target acceptance.
struct MhSettings {
  int n_kernel_reps = 2;
  double target_acceptance = 0.4;
  double adapt_rate = 0.4;
  double scale_joint = 0.0;      // <= 0 picks 2.38 / sqrt(dim)
  double scale_component = 2.4;
};

struct SaemSettings {
  int n_burn = 10;       // chain equilibration, no parameter updates
  int n_explore = 300;   // step size 1
  int n_smooth = 100;    // step size 1/(k - n_explore)
  int n_chains = 0;      // 0: one chain when N >= 50, else ceil(50 / N)
  MhSettings mh;
  std::uint64_t seed = 12345;

  double sigma_floor = 1e-8;
  double omega_floor = 1e-10;
  int anneal_iterations = -1;    // < 0: half of n_explore
  double anneal_factor = 0.98;
  bool record_trace = true;
  bool compute_se = true;        // fill FIM-based SEs after the fit

  int resolved_chains(int n_subjects) const;
  void validate() const;
};

/// Fit result: point estimates, asymptotic SEs from the first-order FIM,
/// and the per-iteration trace of natural-scale parameters.
struct PopulationEstimate {
  PopulationParams theta_hat;
  Eigen::VectorXd se;               // packed layout; NaN when unavailable
  Eigen::MatrixXd fim;              // block-diagonal in the packed layout
  std::vector<Eigen::VectorXd> trace;
  std::uint64_t seed = 0;
  SaemSettings settings;
};

/// Maximum-likelihood estimation by stochastic approximation EM. Subjects
/// are processed in a canonical id order with id-keyed RNG streams, so the
/// result is deterministic for a given seed and invariant to subject order.
PopulationEstimate fit_saem(const ModelSpec& spec, const Dataset& data,
                            const PopulationParams& init,
                            const SaemSettings& settings);

}  // namespace nlmemboot
