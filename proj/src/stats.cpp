#include "nlmemboot/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "nlmemboot/errors.hpp"

namespace nlmemboot {

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInputError("quantile of empty set");
  p = std::clamp(p, 0.0, 1.0);
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (n == 1) return values[0];
  const double h = static_cast<double>(n - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return values[n - 1];
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

double mean(const std::vector<double>& values) {
  if (values.empty()) throw InvalidInputError("mean of empty set");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double sample_sd(const std::vector<double>& values) {
  const auto n = values.size();
  if (n < 2) throw InvalidInputError("sample sd needs at least two values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidInputError("normal quantile requires p in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows) {
  const Eigen::Index n = rows.rows();
  if (n < 2) throw InvalidInputError("covariance needs at least two rows");
  const Eigen::RowVectorXd m = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - m;
  return centered.transpose() * centered / static_cast<double>(n - 1);
}

Eigen::MatrixXd clip_to_psd(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

bool is_psd(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const double max_ev = es.eigenvalues().maxCoeff();
  return es.eigenvalues().minCoeff() >= -1e-10 * std::max(max_ev, 0.0);
}

Eigen::MatrixXd psd_sqrt_factor(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal();
}

double integrated_autocorr_time(const std::vector<double>& chain) {
  const auto n = chain.size();
  if (n < 4) return 1.0;
  const double m = mean(chain);
  std::vector<double> c(chain.size());
  for (std::size_t i = 0; i < n; ++i) c[i] = chain[i] - m;
  double c0 = 0.0;
  for (double v : c) c0 += v * v;
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return 1.0;

  auto gamma = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += c[i] * c[i + lag];
    return s / static_cast<double>(n) / c0;
  };

  // Sum of adjacent autocorrelation pairs while they stay positive.
  double tau = 1.0;
  for (std::size_t lag = 1; lag + 1 < n / 2; lag += 2) {
    const double pair = gamma(lag) + gamma(lag + 1);
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  return std::max(tau, 1.0);
}

}  // namespace nlmemboot
