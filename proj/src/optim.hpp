#pragma once

#include <functional>

#include <Eigen/Dense>

namespace nlmemboot::detail {

/// Derivative-free Nelder-Mead minimizer. The objective may return +inf to
/// reject infeasible points. Returns the best vertex found.
Eigen::VectorXd nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const Eigen::VectorXd& start, double initial_step, int max_evals,
    double tol = 1e-9);

}  // namespace nlmemboot::detail
