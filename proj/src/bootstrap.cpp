#include "nlmemboot/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

#include "nlmemboot/errors.hpp"
#include "parallel.hpp"

namespace nlmemboot {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Case: return "case";
    case Scheme::Par: return "par";
    case Scheme::NP: return "np";
    case Scheme::CNP: return "cnp";
  }
  throw InvalidInputError("unknown scheme");
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "case") return Scheme::Case;
  if (name == "par") return Scheme::Par;
  if (name == "np") return Scheme::NP;
  if (name == "cnp") return Scheme::CNP;
  throw InvalidInputError("unknown bootstrap scheme: " + name);
}

void BootstrapConfig::validate() const {
  if (B < 1) throw InvalidInputError("B must be >= 1");
  if (scheme == Scheme::CNP && M < 1)
    throw InvalidInputError("CNP needs M >= 1 conditional draws");
}

int BootstrapRun::n_success() const {
  int n = 0;
  for (const auto& r : replicates)
    if (r.status == ReplicateFit::Status::Ok) ++n;
  return n;
}

int BootstrapRun::n_failed() const {
  return static_cast<int>(replicates.size()) - n_success();
}

bool BootstrapRun::unreliable() const {
  return 2 * n_failed() > static_cast<int>(replicates.size());
}

std::vector<double> BootstrapRun::parameter_values(int param_index) const {
  std::vector<double> values;
  for (const auto& r : replicates)
    if (r.status == ReplicateFit::Status::Ok) values.push_back(r.theta(param_index));
  return values;
}

namespace {

std::string fresh_id(int index, int width) {
  std::string digits = std::to_string(index + 1);
  while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
  return "b" + digits;
}

}  // namespace

Dataset resample_case(const Dataset& data, const std::string& stratify_by, Rng& rng) {
  data.validate();
  const auto& subjects = data.design.subjects;
  const int n = static_cast<int>(subjects.size());
  const int width = static_cast<int>(std::to_string(n).size());

  std::vector<int> donors;
  donors.reserve(n);
  if (stratify_by.empty()) {
    for (int i = 0; i < n; ++i)
      donors.push_back(static_cast<int>(rng.uniform_int(n)));
  } else {
    // Strata in order of first appearance; each keeps its exact size.
    std::vector<std::string> stratum_order;
    std::map<std::string, std::vector<int>> strata;
    for (int i = 0; i < n; ++i) {
      const auto& g = subjects[i].group;
      if (!strata.count(g)) stratum_order.push_back(g);
      strata[g].push_back(i);
    }
    for (const auto& g : stratum_order) {
      const auto& members = strata[g];
      if (members.empty()) throw InvalidInputError("empty stratum: " + g);
      for (std::size_t s = 0; s < members.size(); ++s)
        donors.push_back(members[rng.uniform_int(members.size())]);
    }
  }

  Dataset out;
  out.design.subjects.reserve(n);
  out.y.reserve(n);
  for (int i = 0; i < n; ++i) {
    SubjectDesign sd = subjects[donors[i]];
    sd.id = fresh_id(i, width);
    out.design.subjects.push_back(std::move(sd));
    out.y.push_back(data.y[donors[i]]);
  }
  return out;
}

Dataset resample_parametric(const ModelSpec& spec, const PopulationParams& theta_hat,
                            const Design& design, Rng& rng) {
  spec.validate();
  design.validate();
  Eigen::MatrixXd omega = theta_hat.omega;
  if (!is_psd(omega)) {
    std::cerr << "warning: omega_hat is not PSD; clipping eigenvalues at 0\n";
    omega = clip_to_psd(omega);
  }
  const Eigen::MatrixXd factor = psd_sqrt_factor(omega);

  Dataset out;
  out.design = design;
  out.y.resize(design.subjects.size());
  for (std::size_t i = 0; i < design.subjects.size(); ++i) {
    const Eigen::VectorXd eta = factor * rng.normal_vector(factor.cols());
    const Eigen::VectorXd psi = transform_psi(spec, theta_hat.mu, eta);
    auto& yi = out.y[i];
    yi.reserve(design.subjects[i].x.size());
    for (double x : design.subjects[i].x) {
      const double f = evaluate_structural(spec.structural, psi, x);
      const double g = evaluate_error_sd(spec.error_model, theta_hat.sigma, f);
      yi.push_back(f + g * rng.normal());
    }
  }
  return out;
}

namespace {

// Symmetric matrix power through the eigendecomposition; negative eigenvalues
// are clipped, zero eigenvalues map to zero.
Eigen::MatrixXd sym_power(const Eigen::MatrixXd& m, double exponent) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd d = es.eigenvalues().cwiseMax(0.0);
  for (Eigen::Index i = 0; i < d.size(); ++i)
    d(i) = d(i) > 0.0 ? std::pow(d(i), exponent) : 0.0;
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

EvdCorrectionResult correct_random_effects_evd(const Eigen::MatrixXd& ebe,
                                               const Eigen::MatrixXd& omega_hat,
                                               EvdForm form) {
  const Eigen::Index n = ebe.rows();
  const Eigen::Index d = ebe.cols();
  if (n < 2) throw InvalidInputError("EVD correction needs at least two subjects");
  if (omega_hat.rows() != d || omega_hat.cols() != d)
    throw InvalidInputError("omega_hat dimension mismatch");

  EvdCorrectionResult out;
  if (d == 0) {
    out.corrected.resize(n, 0);
    return out;
  }

  const Eigen::RowVectorXd mean = ebe.colwise().mean();
  const Eigen::MatrixXd centered = ebe.rowwise() - mean;
  const Eigen::MatrixXd s = centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_s(s);
  const double max_ev = es_s.eigenvalues().cwiseAbs().maxCoeff();
  const bool singular = !(max_ev > 0.0) ||
                        es_s.eigenvalues().minCoeff() <= 1e-12 * max_ev;

  if (singular) {
    std::cerr << "warning: singular EBE covariance; falling back to "
                 "per-dimension scaling\n";
    out.diagonal_fallback = true;
    out.corrected = centered;
    for (Eigen::Index k = 0; k < d; ++k) {
      const double sd = std::sqrt(std::max(s(k, k), 0.0));
      const double target = std::sqrt(std::max(omega_hat(k, k), 0.0));
      const double scale = sd > 0.0 ? target / sd : 0.0;
      out.corrected.col(k) *= scale;
    }
    return out;
  }

  Eigen::MatrixXd a;
  if (form == EvdForm::CovarianceMatching) {
    a = sym_power(s, -0.5) * sym_power(omega_hat, 0.5);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_o(
        0.5 * (omega_hat + omega_hat.transpose()));
    Eigen::VectorXd ds = es_s.eigenvalues().cwiseMax(0.0);
    Eigen::VectorXd dow = es_o.eigenvalues().cwiseMax(0.0);
    for (Eigen::Index i = 0; i < d; ++i) {
      ds(i) = ds(i) > 0.0 ? 1.0 / std::sqrt(ds(i)) : 0.0;
      dow(i) = dow(i) > 0.0 ? 1.0 / std::sqrt(dow(i)) : 0.0;
    }
    a = es_s.eigenvectors() * ds.asDiagonal() * es_o.eigenvectors() *
        dow.asDiagonal();
  }
  out.corrected = centered * a;
  return out;
}

std::vector<double> correct_residuals(const std::vector<double>& residuals) {
  if (residuals.size() < 2)
    throw InvalidInputError("residual correction needs at least two values");
  const double m = mean(residuals);
  const double sd = sample_sd(residuals);
  if (sd == 0.0) throw InvalidInputError("residuals have zero empirical SD");
  std::vector<double> out(residuals.size());
  for (std::size_t i = 0; i < residuals.size(); ++i)
    out[i] = (residuals[i] - m) / sd;
  return out;
}

std::vector<double> ebe_residuals(const ModelSpec& spec, const Dataset& data,
                                  const PopulationParams& theta_hat,
                                  const Eigen::MatrixXd& ebe) {
  data.validate();
  if (ebe.rows() != static_cast<Eigen::Index>(data.design.subjects.size()))
    throw InvalidInputError("EBE rows do not match subject count");
  std::vector<double> out;
  out.reserve(data.design.n_observations());
  for (std::size_t i = 0; i < data.design.subjects.size(); ++i) {
    const Eigen::VectorXd psi =
        transform_psi(spec, theta_hat.mu, ebe.row(i).transpose());
    for (std::size_t j = 0; j < data.design.subjects[i].x.size(); ++j) {
      const double f =
          evaluate_structural(spec.structural, psi, data.design.subjects[i].x[j]);
      const double g =
          std::max(evaluate_error_sd(spec.error_model, theta_hat.sigma, f), 1e-10);
      out.push_back((data.y[i][j] - f) / g);
    }
  }
  return out;
}

namespace {

// Center residuals; scale to unit sample SD unless the pool is constant
// (a constant pool centers to all zeros, the degenerate noise-free case).
std::vector<double> center_and_maybe_scale(const std::vector<double>& pool) {
  const double sd = pool.size() >= 2 ? sample_sd(pool) : 0.0;
  if (sd == 0.0) {
    std::vector<double> out(pool.size());
    const double m = mean(pool);
    for (std::size_t i = 0; i < pool.size(); ++i) out[i] = pool[i] - m;
    return out;
  }
  return correct_residuals(pool);
}

Dataset assemble_responses(const ModelSpec& spec, const PopulationParams& theta_hat,
                           const Design& design,
                           const std::vector<Eigen::VectorXd>& eta_star,
                           const std::vector<std::vector<double>>& eps_star) {
  Dataset out;
  out.design = design;
  out.y.resize(design.subjects.size());
  for (std::size_t i = 0; i < design.subjects.size(); ++i) {
    const Eigen::VectorXd psi = transform_psi(spec, theta_hat.mu, eta_star[i]);
    auto& yi = out.y[i];
    yi.reserve(design.subjects[i].x.size());
    for (std::size_t j = 0; j < design.subjects[i].x.size(); ++j) {
      const double f =
          evaluate_structural(spec.structural, psi, design.subjects[i].x[j]);
      const double g = evaluate_error_sd(spec.error_model, theta_hat.sigma, f);
      yi.push_back(f + g * eps_star[i][j]);
    }
  }
  return out;
}

}  // namespace

Dataset resample_nonparametric(const ModelSpec& spec,
                               const PopulationParams& theta_hat,
                               const Eigen::MatrixXd& ebe,
                               const std::vector<double>& residuals,
                               const Design& design, Rng& rng, EvdForm form) {
  design.validate();
  const int n = design.n_subjects();
  if (ebe.rows() != n) throw InvalidInputError("EBE rows do not match design");

  const EvdCorrectionResult corr =
      correct_random_effects_evd(ebe, theta_hat.omega, form);
  const std::vector<double> eps_pool = center_and_maybe_scale(residuals);
  if (eps_pool.empty()) throw InvalidInputError("empty residual pool");

  std::vector<Eigen::VectorXd> eta_star(n);
  std::vector<std::vector<double>> eps_star(n);
  for (int i = 0; i < n; ++i) {
    const auto donor = static_cast<Eigen::Index>(rng.uniform_int(n));
    eta_star[i] = corr.corrected.row(donor).transpose();
    auto& e = eps_star[i];
    e.reserve(design.subjects[i].x.size());
    for (std::size_t j = 0; j < design.subjects[i].x.size(); ++j)
      e.push_back(eps_pool[rng.uniform_int(eps_pool.size())]);
  }
  return assemble_responses(spec, theta_hat, design, eta_star, eps_star);
}

Dataset resample_conditional_np(const ModelSpec& spec,
                                const PopulationParams& theta_hat,
                                const ConditionalDraws& conditional,
                                const Design& design, const BootstrapConfig& config,
                                Rng& rng) {
  design.validate();
  conditional.validate();
  const int n = design.n_subjects();
  if (static_cast<int>(conditional.subjects.size()) != n)
    throw InvalidInputError("conditional draws do not match design");
  const int m_draws = conditional.M;
  const int d = static_cast<int>(conditional.random_dim_names.size());

  // Residual pools, centered within each pool.
  std::vector<std::vector<double>> subject_pools;
  std::vector<double> global_pool;
  if (config.cnp_residual_pool == CnpResidualPool::PerSubject) {
    subject_pools.resize(n);
    for (int i = 0; i < n; ++i) {
      const auto& res = conditional.subjects[i].residuals;
      if (res.size() < 2)
        throw InvalidConfigError(
            "per-subject residual pool needs M*n_i >= 2 (subject " +
            conditional.subjects[i].id + ")");
      std::vector<double> pool(res.data(), res.data() + res.size());
      const double m = mean(pool);
      for (auto& v : pool) v -= m;
      subject_pools[i] = std::move(pool);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const auto& res = conditional.subjects[i].residuals;
      global_pool.insert(global_pool.end(), res.data(), res.data() + res.size());
    }
    if (global_pool.size() < 2)
      throw InvalidConfigError("global residual pool needs at least two values");
    const double m = mean(global_pool);
    for (auto& v : global_pool) v -= m;
  }

  // Random effects centered by the across-subject grand mean, preserving
  // the between-subject dispersion of the conditional draws.
  Eigen::RowVectorXd grand_mean = Eigen::RowVectorXd::Zero(d);
  for (int i = 0; i < n; ++i) grand_mean += conditional.subjects[i].eta.colwise().sum();
  grand_mean /= static_cast<double>(n) * static_cast<double>(m_draws);

  std::vector<Eigen::VectorXd> eta_star(n);
  std::vector<std::vector<double>> eps_star(n);
  for (int i = 0; i < n; ++i) {
    int donor_subject, donor_draw;
    if (config.cnp_eta_draw == CnpEtaDraw::SubjectThenSample) {
      donor_subject = static_cast<int>(rng.uniform_int(n));
      donor_draw = static_cast<int>(rng.uniform_int(m_draws));
    } else {
      const auto flat = rng.uniform_int(static_cast<std::uint64_t>(n) * m_draws);
      donor_subject = static_cast<int>(flat / m_draws);
      donor_draw = static_cast<int>(flat % m_draws);
    }
    eta_star[i] = (conditional.subjects[donor_subject].eta.row(donor_draw) -
                   grand_mean)
                      .transpose();

    const auto& pool = config.cnp_residual_pool == CnpResidualPool::PerSubject
                           ? subject_pools[i]
                           : global_pool;
    auto& e = eps_star[i];
    e.reserve(design.subjects[i].x.size());
    for (std::size_t j = 0; j < design.subjects[i].x.size(); ++j)
      e.push_back(pool[rng.uniform_int(pool.size())]);
  }
  return assemble_responses(spec, theta_hat, design, eta_star, eps_star);
}

BootstrapRun run_bootstrap(const ModelSpec& spec, const Dataset& data,
                           const PopulationEstimate& estimate,
                           const ConditionalDraws* conditional,
                           const BootstrapConfig& config,
                           const SaemSettings& fit_settings, int parallelism) {
  spec.validate();
  data.validate();
  config.validate();

  if ((config.scheme == Scheme::NP || config.scheme == Scheme::CNP) &&
      conditional == nullptr)
    throw InvalidConfigError(
        scheme_name(config.scheme) +
        " bootstrap needs conditional draws; rerun the fit with conditional "
        "sampling enabled");

  const ParamLayout layout(spec);

  // Inputs shared by every replicate of the residual schemes.
  Eigen::MatrixXd ebe;
  std::vector<double> raw_residuals;
  if (config.scheme == Scheme::NP) {
    ebe = compute_ebe(*conditional, EbeMode::Mean);
    raw_residuals = ebe_residuals(spec, data, estimate.theta_hat, ebe);
  }

  BootstrapRun run;
  run.scheme = config.scheme;
  run.parameter_names = layout.names;
  run.replicates.resize(config.B);

  const Rng base = Rng(config.seed).split("bootstrap").split(scheme_name(config.scheme));

  detail::parallel_for(config.B, parallelism, [&](int b) {
    Rng rng = base.split(static_cast<std::uint64_t>(b));
    ReplicateFit& rep = run.replicates[b];
    try {
      Dataset resampled;
      switch (config.scheme) {
        case Scheme::Case:
          resampled = resample_case(data, config.stratify_by, rng);
          break;
        case Scheme::Par:
          resampled = resample_parametric(spec, estimate.theta_hat,
                                          data.design, rng);
          break;
        case Scheme::NP:
          resampled = resample_nonparametric(spec, estimate.theta_hat, ebe,
                                             raw_residuals, data.design, rng);
          break;
        case Scheme::CNP:
          resampled = resample_conditional_np(spec, estimate.theta_hat,
                                              *conditional, data.design, config,
                                              rng);
          break;
      }
      SaemSettings refit = fit_settings;
      refit.seed = rng.split("fit").key();
      refit.record_trace = false;
      refit.compute_se = false;
      const PopulationEstimate fit =
          fit_saem(spec, resampled, estimate.theta_hat, refit);
      rep.theta = layout.pack(fit.theta_hat);
      rep.status = ReplicateFit::Status::Ok;
    } catch (const EstimationError& e) {
      rep.status = ReplicateFit::Status::EstimationFailed;
      rep.message = e.what();
    } catch (const NumericError& e) {
      rep.status = ReplicateFit::Status::NumericFailed;
      rep.message = e.what();
    }
  });

  if (run.unreliable())
    std::cerr << "warning: more than half of the " << scheme_name(config.scheme)
              << " bootstrap refits failed; run flagged unreliable\n";
  return run;
}

Interval percentile_ci(const std::vector<double>& values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw InvalidInputError("alpha must be in (0, 1)");
  std::vector<double> finite;
  finite.reserve(values.size());
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  Interval out;
  if (finite.size() < 2) return out;
  out.lo = quantile_type7(finite, alpha / 2.0);
  out.hi = quantile_type7(finite, 1.0 - alpha / 2.0);
  out.available = true;
  return out;
}

BootstrapSummary summarize_run(const BootstrapRun& run) {
  if (run.n_success() < 2)
    throw InvalidInputError("bootstrap summary needs at least two successful refits");
  BootstrapSummary out;
  out.scheme = run.scheme;
  out.n_success = run.n_success();
  out.n_failed = run.n_failed();
  out.unreliable = run.unreliable();
  out.parameter_names = run.parameter_names;
  const int n_params = static_cast<int>(run.parameter_names.size());
  out.parameters.resize(n_params);
  for (int p = 0; p < n_params; ++p) {
    const std::vector<double> values = run.parameter_values(p);
    out.parameters[p].mean = mean(values);
    out.parameters[p].se = sample_sd(values);
    out.parameters[p].ci90 = percentile_ci(values, 0.10);
    out.parameters[p].ci95 = percentile_ci(values, 0.05);
  }
  return out;
}

}  // namespace nlmemboot
