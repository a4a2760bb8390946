#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace nlmemboot {

/// Closed interval, possibly unavailable (e.g. missing SE, too few values).
struct Interval {
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  bool available = false;

  bool contains(double v) const { return available && lo <= v && v <= hi; }
};

/// Empirical quantile by linear interpolation between order statistics at
/// rank h = (n-1)p + 1 (the common "type 7" definition). `values` need not
/// be sorted; p is clamped to [0, 1].
double quantile_type7(std::vector<double> values, double p);

double mean(const std::vector<double>& values);

/// Sample standard deviation, divisor n-1.
double sample_sd(const std::vector<double>& values);

/// Standard normal quantile z_p.
double normal_quantile(double p);

/// Sample covariance of row vectors (divisor n-1).
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows);

/// Clip negative eigenvalues to zero and resymmetrize.
Eigen::MatrixXd clip_to_psd(const Eigen::MatrixXd& m);

/// True when all eigenvalues are >= -1e-10 times the largest one.
bool is_psd(const Eigen::MatrixXd& m);

/// Factor L with L L^T equal to the PSD matrix (eigendecomposition based, so
/// singular matrices are handled); draws are L * z with z standard normal.
Eigen::MatrixXd psd_sqrt_factor(const Eigen::MatrixXd& m);

/// Integrated autocorrelation time of a scalar chain, by Geyer's initial
/// positive sequence estimator. Returns at least 1.
double integrated_autocorr_time(const std::vector<double>& chain);

}  // namespace nlmemboot
