#pragma once

#include <vector>

#include <Eigen/Dense>

#include "nlmemboot/model.hpp"
#include "nlmemboot/stats.hpp"

namespace nlmemboot {

struct FimResult {
  Eigen::MatrixXd fim;   // packed layout order, block-diagonal
  Eigen::VectorXd se;    // sqrt(diag(inverse)); NaN when unavailable
};

/// First-order linearized Fisher information at theta_hat. The model is
/// linearized around eta = 0, giving y_i ~ N(E_i(mu), F_i Omega F_i^T + G_i)
/// per subject; the matrix is block-diagonal by construction, one block for
/// the fixed effects and one for the variance parameters, with all
/// cross-block entries exactly zero. Model derivatives use central finite
/// differences with step max(1e-4 |theta_p|, 1e-6).
FimResult compute_fim(const ModelSpec& spec, const Dataset& data,
                      const PopulationParams& theta_hat);

/// Wald interval theta_hat_p -+ z_{1-alpha/2} * se_p per packed parameter;
/// parameters without an SE get an unavailable interval.
std::vector<Interval> asymptotic_ci(const Eigen::VectorXd& theta_packed,
                                    const Eigen::VectorXd& se, double alpha);

}  // namespace nlmemboot
