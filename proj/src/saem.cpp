#include "nlmemboot/saem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlmemboot/errors.hpp"
#include "nlmemboot/fim.hpp"
#include "nlmemboot/stats.hpp"
#include "mh_internal.hpp"
#include "optim.hpp"

namespace nlmemboot {

using detail::AcceptCounts;
using detail::ChainState;
using detail::KernelScales;
using detail::LikContext;
using detail::PriorContext;
using detail::SubjectRef;

int SaemSettings::resolved_chains(int n_subjects) const {
  if (n_chains > 0) return n_chains;
  if (n_subjects >= 50) return 1;
  return (50 + n_subjects - 1) / n_subjects;
}

void SaemSettings::validate() const {
  if (n_burn < 1 || n_explore < 1 || n_smooth < 1)
    throw InvalidInputError("SAEM iteration counts must be >= 1");
  if (n_chains < 0) throw InvalidInputError("n_chains must be >= 0");
  if (!(mh.target_acceptance > 0.0 && mh.target_acceptance < 1.0))
    throw InvalidInputError("target acceptance must be in (0, 1)");
  if (mh.n_kernel_reps < 1) throw InvalidInputError("n_kernel_reps must be >= 1");
  if (sigma_floor <= 0.0 || omega_floor <= 0.0)
    throw InvalidInputError("variance floors must be positive");
}

namespace {

// Phi-scale fixed effect for one random dimension.
double lambda_from_mu(Transform t, double mu) {
  return t == Transform::LogNormal ? std::log(mu) : mu;
}
double mu_from_lambda(Transform t, double lambda) {
  return t == Transform::LogNormal ? std::exp(lambda) : lambda;
}

// Variance annealing: keep each diagonal from shrinking faster than the decay
// factor, rescaling covariances so correlations are preserved.
Eigen::MatrixXd anneal_omega(const Eigen::MatrixXd& estimate,
                             const Eigen::MatrixXd& previous, double factor) {
  const Eigen::Index d = estimate.rows();
  Eigen::VectorXd scale(d);
  Eigen::MatrixXd out = estimate;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double target = std::max(estimate(i, i), factor * previous(i, i));
    scale(i) = estimate(i, i) > 0.0 ? std::sqrt(target / estimate(i, i)) : 1.0;
    out(i, i) = target;
  }
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (i != j) out(i, j) = estimate(i, j) * scale(i) * scale(j);
  return out;
}

Eigen::MatrixXd project_to_pattern(const ModelSpec& spec,
                                   const Eigen::MatrixXd& omega) {
  const auto dims = spec.random_dims();
  Eigen::MatrixXd out = omega;
  for (std::size_t a = 0; a < dims.size(); ++a)
    for (std::size_t b = 0; b < dims.size(); ++b)
      if (a != b && !spec.omega_pattern(dims[a], dims[b])) out(a, b) = 0.0;
  return out;
}

}  // namespace

PopulationEstimate fit_saem(const ModelSpec& spec, const Dataset& data,
                            const PopulationParams& init,
                            const SaemSettings& settings) {
  spec.validate();
  data.validate();
  init.validate(spec);
  settings.validate();

  const auto random_dims = spec.random_dims();
  const int d = static_cast<int>(random_dims.size());
  const int n_obs_total = data.design.n_observations();
  const ParamLayout layout(spec);

  {
    double y_min = std::numeric_limits<double>::infinity();
    double y_max = -y_min;
    for (const auto& yi : data.y)
      for (double v : yi) {
        y_min = std::min(y_min, v);
        y_max = std::max(y_max, v);
      }
    if (spec.error_model == ErrorModel::Proportional && y_min == y_max)
      throw EstimationError(
          "degenerate data: all observations identical under a proportional "
          "error model");
  }

  const auto subjects = detail::canonical_subjects(data);
  const int n_subjects = static_cast<int>(subjects.size());
  const int n_chains = settings.resolved_chains(n_subjects);

  // Non-random ("fixed") structural parameters, updated by direct
  // minimization of the complete-data likelihood.
  std::vector<int> fixed_dims;
  for (int p = 0; p < spec.n_params(); ++p)
    if (!spec.omega_pattern(p, p)) fixed_dims.push_back(p);

  std::vector<double> unique_doses;
  for (const auto& s : data.design.subjects)
    for (double x : s.x)
      if (std::find(unique_doses.begin(), unique_doses.end(), x) ==
          unique_doses.end())
        unique_doses.push_back(x);

  LikContext ctx;
  ctx.spec = &spec;
  ctx.mu = init.mu;
  ctx.sigma = init.sigma.cwiseMax(settings.sigma_floor);
  ctx.random_dims = random_dims;
  ctx.refresh_dose_cache(unique_doses);

  Eigen::VectorXd lambda(d);
  for (int k = 0; k < d; ++k)
    lambda(k) = lambda_from_mu(spec.transforms[random_dims[k]], init.mu(random_dims[k]));

  Eigen::MatrixXd omega = clip_to_psd(init.omega);
  for (int k = 0; k < d; ++k)
    omega(k, k) = std::max(omega(k, k), settings.omega_floor);

  const Rng base = Rng(settings.seed).split("saem");

  // Chain states, one per (subject, chain), initialized from the prior.
  std::vector<std::vector<ChainState>> chains(subjects.size());
  {
    PriorContext prior(lambda, omega);
    for (std::size_t si = 0; si < subjects.size(); ++si) {
      chains[si].reserve(n_chains);
      for (int c = 0; c < n_chains; ++c) {
        Rng stream = base.split("init").split(static_cast<std::uint64_t>(c))
                         .split(subjects[si].design->id);
        const Eigen::VectorXd phi =
            lambda + prior.proposal_factor * stream.normal_vector(d);
        chains[si].push_back(detail::make_chain_state(ctx, subjects[si], prior, phi));
      }
    }
  }

  KernelScales scales = KernelScales::defaults(settings.mh, d);

  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(d, d);
  double s3 = 0.0;

  const int anneal_iters =
      settings.anneal_iterations >= 0 ? settings.anneal_iterations
                                      : settings.n_explore / 2;
  Eigen::MatrixXd omega_prev = omega;
  Eigen::VectorXd sigma_prev = ctx.sigma;

  std::vector<Eigen::VectorXd> trace;
  const int total_iters = settings.n_burn + settings.n_explore + settings.n_smooth;

  auto current_theta = [&]() {
    PopulationParams theta;
    theta.mu = ctx.mu;
    theta.omega = omega;
    theta.sigma = ctx.sigma;
    return theta;
  };

  for (int iter = 1; iter <= total_iters; ++iter) {
    PriorContext prior(lambda, omega);
    AcceptCounts counts(d);
    const Rng iter_base = base.split("iter").split(static_cast<std::uint64_t>(iter));

    for (std::size_t si = 0; si < subjects.size(); ++si) {
      for (int c = 0; c < n_chains; ++c) {
        Rng stream = iter_base.split(static_cast<std::uint64_t>(c))
                         .split(subjects[si].design->id);
        // Prior moved since last iteration; refresh the cached density.
        chains[si][c].log_prior = prior.log_density(chains[si][c].phi);
        detail::mh_sweep(ctx, subjects[si], prior, scales, settings.mh.n_kernel_reps,
                         chains[si][c], stream, counts);
      }
    }
    detail::adapt_scales(settings.mh, counts, scales);

    if (iter <= settings.n_burn) continue;
    const int k = iter - settings.n_burn;
    const double step =
        k <= settings.n_explore ? 1.0 : 1.0 / static_cast<double>(k - settings.n_explore);

    // Chain-averaged sufficient statistics, accumulated in canonical order.
    Eigen::VectorXd stat1 = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd stat2 = Eigen::MatrixXd::Zero(d, d);
    double stat3 = 0.0;
    const double inv_chains = 1.0 / static_cast<double>(n_chains);
    for (std::size_t si = 0; si < subjects.size(); ++si) {
      for (int c = 0; c < n_chains; ++c) {
        const auto& st = chains[si][c];
        stat1 += inv_chains * st.phi;
        stat2 += inv_chains * (st.phi * st.phi.transpose());
        stat3 += inv_chains * st.lik.wrss;
      }
    }

    s1 += step * (stat1 - s1);
    s2 += step * (stat2 - s2);
    s3 += step * (stat3 - s3);

    if (d > 0) {
      lambda = s1 / static_cast<double>(n_subjects);
      Eigen::MatrixXd omega_hat =
          s2 / static_cast<double>(n_subjects) - lambda * lambda.transpose();
      omega_hat = clip_to_psd(project_to_pattern(spec, omega_hat));
      if (k <= anneal_iters)
        omega_hat = anneal_omega(omega_hat, omega_prev, settings.anneal_factor);
      for (int i = 0; i < d; ++i)
        omega_hat(i, i) = std::max(omega_hat(i, i), settings.omega_floor);
      omega = omega_hat;
      omega_prev = omega;
      for (int i = 0; i < d; ++i)
        ctx.mu(random_dims[i]) =
            mu_from_lambda(spec.transforms[random_dims[i]], lambda(i));
    }

    if (!fixed_dims.empty()) {
      // Complete-data likelihood in the non-random parameters at the current
      // draws, minimized directly and then stochastically averaged.
      auto objective = [&](const Eigen::VectorXd& cand) {
        LikContext cand_ctx = ctx;
        for (std::size_t q = 0; q < fixed_dims.size(); ++q)
          cand_ctx.mu(fixed_dims[q]) = cand(q);
        cand_ctx.refresh_dose_cache(unique_doses);
        double nll = 0.0;
        for (std::size_t si = 0; si < subjects.size(); ++si)
          for (int c = 0; c < n_chains; ++c) {
            const auto ev = detail::eval_subject(cand_ctx, subjects[si],
                                                 chains[si][c].phi);
            if (!ev.valid) return std::numeric_limits<double>::infinity();
            nll -= inv_chains * ev.loglik;
          }
        return nll;
      };
      Eigen::VectorXd current(fixed_dims.size());
      for (std::size_t q = 0; q < fixed_dims.size(); ++q)
        current(q) = ctx.mu(fixed_dims[q]);
      // Warm-started refinement: the stochastic averaging only needs partial
      // per-iteration progress, so a short simplex run is enough.
      const int budget = 6 + 10 * static_cast<int>(fixed_dims.size());
      const Eigen::VectorXd best =
          detail::nelder_mead(objective, current, 0.05, budget, 1e-10);
      for (std::size_t q = 0; q < fixed_dims.size(); ++q)
        ctx.mu(fixed_dims[q]) = current(q) + step * (best(q) - current(q));
      ctx.refresh_dose_cache(unique_doses);
    }

    if (spec.error_model == ErrorModel::Combined) {
      auto objective = [&](const Eigen::VectorXd& cand) {
        if (cand(0) < 0.0 || cand(1) < 0.0)
          return std::numeric_limits<double>::infinity();
        double nll = 0.0;
        for (std::size_t si = 0; si < subjects.size(); ++si)
          for (int c = 0; c < n_chains; ++c) {
            const auto& st = chains[si][c];
            for (Eigen::Index j = 0; j < st.lik.f.size(); ++j) {
              const double g = std::max(cand(0) + cand(1) * std::abs(st.lik.f(j)),
                                        ctx.g_floor);
              const double r = st.lik.r(j);
              nll += inv_chains * (std::log(g) + 0.5 * r * r / (g * g));
            }
          }
        return nll;
      };
      const Eigen::VectorXd best =
          detail::nelder_mead(objective, ctx.sigma, 0.1, 80, 1e-10);
      Eigen::VectorXd next = ctx.sigma + step * (best - ctx.sigma);
      if (k <= anneal_iters)
        next = next.cwiseMax(std::sqrt(settings.anneal_factor) * sigma_prev);
      ctx.sigma = next.cwiseMax(settings.sigma_floor);
    } else {
      double sigma_hat = std::sqrt(std::max(s3, 0.0) / n_obs_total);
      if (k <= anneal_iters)
        sigma_hat = std::max(sigma_hat,
                             std::sqrt(settings.anneal_factor) * sigma_prev(0));
      ctx.sigma(0) = std::max(sigma_hat, settings.sigma_floor);
    }
    sigma_prev = ctx.sigma;

    if (!ctx.mu.allFinite() || !omega.allFinite() || !ctx.sigma.allFinite()) {
      throw NumericError("non-finite parameter update at SAEM iteration " +
                         std::to_string(k));
    }
    if (settings.record_trace) trace.push_back(layout.pack(current_theta()));
  }

  PopulationEstimate est;
  est.theta_hat = current_theta();
  est.trace = std::move(trace);
  est.seed = settings.seed;
  est.settings = settings;
  if (settings.compute_se) {
    const FimResult fr = compute_fim(spec, data, est.theta_hat);
    est.fim = fr.fim;
    est.se = fr.se;
  } else {
    est.fim.resize(0, 0);
    est.se = Eigen::VectorXd::Constant(layout.size(),
                                       std::numeric_limits<double>::quiet_NaN());
  }
  return est;
}

}  // namespace nlmemboot
