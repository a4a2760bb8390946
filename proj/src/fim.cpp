#include "nlmemboot/fim.hpp"

#include <cmath>
#include <limits>

#include "nlmemboot/errors.hpp"

namespace nlmemboot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double fd_step(double value) { return std::max(1e-4 * std::abs(value), 1e-6); }

// Structural values for one subject at given mu and eta.
Eigen::VectorXd predict(const ModelSpec& spec, const Eigen::VectorXd& mu,
                        const Eigen::VectorXd& eta,
                        const std::vector<double>& x) {
  const Eigen::VectorXd psi = transform_psi(spec, mu, eta);
  Eigen::VectorXd f(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    f(j) = evaluate_structural(spec.structural, psi, x[j]);
  return f;
}

// Marginal covariance of the linearized model from packed variance
// parameters (omega entries then sigma), holding F and f fixed.
Eigen::MatrixXd build_v(const ModelSpec& spec, const ParamLayout& layout,
                        const Eigen::VectorXd& variance_params,
                        const Eigen::MatrixXd& F, const Eigen::VectorXd& f0,
                        const Eigen::VectorXd& mu) {
  Eigen::VectorXd packed(layout.size());
  packed.head(layout.n_fixed) = mu;
  packed.tail(layout.n_variance) = variance_params;
  const PopulationParams p = layout.unpack(packed);
  Eigen::MatrixXd v = F * p.omega * F.transpose();
  for (Eigen::Index j = 0; j < f0.size(); ++j) {
    const double g = evaluate_error_sd(spec.error_model, p.sigma, f0(j));
    v(j, j) += g * g;
  }
  return v;
}

// Invert one symmetric block. A singular block leaves its standard errors
// unavailable (NaN) rather than failing the whole fit.
Eigen::VectorXd block_se(const Eigen::MatrixXd& block) {
  const Eigen::Index n = block.rows();
  Eigen::VectorXd se = Eigen::VectorXd::Constant(n, kNaN);
  if (n == 0) return se;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (block + block.transpose()));
  const double max_ev = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(max_ev > 0.0) || !std::isfinite(max_ev)) return se;
  if (es.eigenvalues().minCoeff() <= 1e-12 * max_ev) return se;
  const Eigen::MatrixXd inv = es.eigenvectors() *
                              es.eigenvalues().cwiseInverse().asDiagonal() *
                              es.eigenvectors().transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    if (inv(i, i) > 0.0 && std::isfinite(inv(i, i))) se(i) = std::sqrt(inv(i, i));
  return se;
}

}  // namespace

FimResult compute_fim(const ModelSpec& spec, const Dataset& data,
                      const PopulationParams& theta_hat) {
  spec.validate();
  data.validate();
  theta_hat.validate(spec);

  const ParamLayout layout(spec);
  const int n_fixed = layout.n_fixed;
  const int n_var = layout.n_variance;
  const int d = spec.n_random();
  const Eigen::VectorXd packed = layout.pack(theta_hat);
  const Eigen::VectorXd variance_params = packed.tail(n_var);

  Eigen::MatrixXd a_block = Eigen::MatrixXd::Zero(n_fixed, n_fixed);
  Eigen::MatrixXd b_block = Eigen::MatrixXd::Zero(n_var, n_var);
  const Eigen::VectorXd eta0 = Eigen::VectorXd::Zero(d);

  for (std::size_t i = 0; i < data.design.subjects.size(); ++i) {
    const auto& x = data.design.subjects[i].x;
    const auto n_i = static_cast<Eigen::Index>(x.size());
    const Eigen::VectorXd f0 = predict(spec, theta_hat.mu, eta0, x);

    // dE/dmu by central differences.
    Eigen::MatrixXd jac(n_i, n_fixed);
    for (int p = 0; p < n_fixed; ++p) {
      const double h = fd_step(theta_hat.mu(p));
      Eigen::VectorXd mu_hi = theta_hat.mu, mu_lo = theta_hat.mu;
      mu_hi(p) += h;
      mu_lo(p) -= h;
      jac.col(p) = (predict(spec, mu_hi, eta0, x) - predict(spec, mu_lo, eta0, x)) /
                   (2.0 * h);
    }

    // df/deta at eta = 0.
    Eigen::MatrixXd F(n_i, d);
    for (int q = 0; q < d; ++q) {
      const double h = 1e-6;
      Eigen::VectorXd eta_hi = eta0, eta_lo = eta0;
      eta_hi(q) += h;
      eta_lo(q) -= h;
      F.col(q) = (predict(spec, theta_hat.mu, eta_hi, x) -
                  predict(spec, theta_hat.mu, eta_lo, x)) /
                 (2.0 * h);
    }

    const Eigen::MatrixXd v =
        build_v(spec, layout, variance_params, F, f0, theta_hat.mu);
    Eigen::LDLT<Eigen::MatrixXd> v_solver(v);
    if (v_solver.info() != Eigen::Success)
      throw NumericError("linearized covariance is not factorizable");

    a_block += jac.transpose() * v_solver.solve(jac);

    std::vector<Eigen::MatrixXd> v_derivs(n_var);
    for (int a = 0; a < n_var; ++a) {
      const double h = fd_step(variance_params(a));
      Eigen::VectorXd hi = variance_params, lo = variance_params;
      hi(a) += h;
      lo(a) -= h;
      v_derivs[a] = (build_v(spec, layout, hi, F, f0, theta_hat.mu) -
                     build_v(spec, layout, lo, F, f0, theta_hat.mu)) /
                    (2.0 * h);
    }
    std::vector<Eigen::MatrixXd> w(n_var);
    for (int a = 0; a < n_var; ++a) w[a] = v_solver.solve(v_derivs[a]);
    for (int a = 0; a < n_var; ++a)
      for (int b = a; b < n_var; ++b) {
        const double t = 0.5 * (w[a] * w[b]).trace();
        b_block(a, b) += t;
        if (a != b) b_block(b, a) += t;
      }
  }

  FimResult out;
  out.fim = Eigen::MatrixXd::Zero(layout.size(), layout.size());
  out.fim.topLeftCorner(n_fixed, n_fixed) = 0.5 * (a_block + a_block.transpose());
  out.fim.bottomRightCorner(n_var, n_var) = 0.5 * (b_block + b_block.transpose());

  out.se.resize(layout.size());
  out.se.head(n_fixed) = block_se(out.fim.topLeftCorner(n_fixed, n_fixed));
  out.se.tail(n_var) = block_se(out.fim.bottomRightCorner(n_var, n_var));
  return out;
}

std::vector<Interval> asymptotic_ci(const Eigen::VectorXd& theta_packed,
                                    const Eigen::VectorXd& se, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidInputError("alpha must be in (0, 1)");
  if (theta_packed.size() != se.size())
    throw InvalidInputError("estimate/SE size mismatch");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::vector<Interval> out(theta_packed.size());
  for (Eigen::Index p = 0; p < theta_packed.size(); ++p) {
    if (std::isfinite(se(p)) && se(p) >= 0.0) {
      out[p].lo = theta_packed(p) - z * se(p);
      out[p].hi = theta_packed(p) + z * se(p);
      out[p].available = true;
    }
  }
  return out;
}

}  // namespace nlmemboot
