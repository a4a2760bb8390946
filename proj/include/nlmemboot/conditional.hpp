#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nlmemboot/model.hpp"
#include "nlmemboot/saem.hpp"

namespace nlmemboot {

struct ConditionalSettings {
  int burn_in = 500;        // adaptation phase, discarded
  int pilot = 1000;         // post-adaptation steps used to estimate IACT
  double iact_span = 10.0;  // retained chain must span this many IACTs
  int max_thin = 200;
  MhSettings mh;
};

struct SubjectDraws {
  std::string id;
  Eigen::MatrixXd eta;          // M x n_random
  Eigen::VectorXd log_density;  // unnormalized conditional log density per draw
  Eigen::MatrixXd residuals;    // M x n_i weighted residuals
  Eigen::VectorXd cond_mean;    // per random dimension
  Eigen::VectorXd cond_sd;
  double acceptance = 0.0;
  int thin = 1;
};

/// Per-subject samples of eta from p(eta_i | y_i; theta_hat), with the
/// weighted residuals (y - f)/g derived for every draw.
struct ConditionalDraws {
  int M = 0;
  std::vector<std::string> random_dim_names;
  std::vector<SubjectDraws> subjects;   // dataset order

  void validate() const;
};

ConditionalDraws sample_conditional(const ModelSpec& spec, const Dataset& data,
                                    const PopulationParams& theta_hat, int M,
                                    const ConditionalSettings& settings,
                                    std::uint64_t seed);

enum class EbeMode { Mean, Mode };

/// Per-subject point estimates of eta: the sample mean of the draws, or the
/// draw with the highest conditional density. One row per subject.
Eigen::MatrixXd compute_ebe(const ConditionalDraws& draws, EbeMode mode);

}  // namespace nlmemboot
