#include "mh_internal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlmemboot/errors.hpp"
#include "nlmemboot/stats.hpp"

namespace nlmemboot::detail {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

std::vector<SubjectRef> canonical_subjects(const Dataset& data) {
  std::vector<SubjectRef> refs;
  refs.reserve(data.design.subjects.size());
  for (std::size_t i = 0; i < data.design.subjects.size(); ++i)
    refs.push_back({static_cast<int>(i), &data.design.subjects[i], &data.y[i]});
  std::sort(refs.begin(), refs.end(), [](const SubjectRef& a, const SubjectRef& b) {
    return a.design->id < b.design->id;
  });
  return refs;
}

Eigen::VectorXd LikContext::psi_from_phi(const Eigen::VectorXd& phi) const {
  Eigen::VectorXd psi = mu;
  for (std::size_t d = 0; d < random_dims.size(); ++d) {
    const int p = random_dims[d];
    psi(p) = spec->transforms[p] == Transform::LogNormal ? std::exp(phi(d)) : phi(d);
  }
  return psi;
}

void LikContext::refresh_dose_cache(const std::vector<double>& unique_doses) {
  fast_sigemax =
      spec->structural == Structural::SigEmax && random_dims.size() == 3 &&
      random_dims[0] == 0 && random_dims[1] == 1 && random_dims[2] == 2 &&
      spec->transforms[0] == Transform::LogNormal &&
      spec->transforms[1] == Transform::LogNormal &&
      spec->transforms[2] == Transform::LogNormal && mu(3) > 0.0;
  if (!fast_sigemax) return;
  cached_doses = unique_doses;
  cached_dose_pow.resize(unique_doses.size());
  for (std::size_t k = 0; k < unique_doses.size(); ++k)
    cached_dose_pow[k] =
        unique_doses[k] == 0.0 ? 0.0 : std::pow(unique_doses[k], mu(3));
}

namespace {

inline double error_sd_inline(ErrorModel model, const Eigen::VectorXd& sigma,
                              double f) {
  switch (model) {
    case ErrorModel::Constant: return sigma(0);
    case ErrorModel::Proportional: return sigma(0) * std::abs(f);
    case ErrorModel::Combined: return sigma(0) + sigma(1) * std::abs(f);
  }
  return 0.0;
}

}  // namespace

LikEval eval_subject(const LikContext& ctx, const SubjectRef& subj,
                     const Eigen::VectorXd& phi) {
  LikEval out;
  const auto n = static_cast<Eigen::Index>(subj.design->x.size());
  out.f.resize(n);
  out.r.resize(n);

  const bool proportional = ctx.spec->error_model == ErrorModel::Proportional;
  double ll = 0.0, wrss = 0.0;
  auto accumulate = [&](Eigen::Index j, double f) {
    const double g = std::max(error_sd_inline(ctx.spec->error_model, ctx.sigma, f),
                              ctx.g_floor);
    const double r = (*subj.y)[j] - f;
    out.f(j) = f;
    out.r(j) = r;
    ll += -std::log(g) - 0.5 * r * r / (g * g);
    const double w = proportional ? std::max(std::abs(f), ctx.g_floor) : 1.0;
    wrss += (r / w) * (r / w);
  };

  if (ctx.fast_sigemax) {
    const double e0 = std::exp(phi(0));
    const double emax = std::exp(phi(1));
    const double ed50_pow = std::exp(ctx.mu(3) * phi(2));  // ED50^gamma
    for (Eigen::Index j = 0; j < n; ++j) {
      const double x = subj.design->x[j];
      double t = -1.0;
      for (std::size_t k = 0; k < ctx.cached_doses.size(); ++k)
        if (ctx.cached_doses[k] == x) {
          t = ctx.cached_dose_pow[k];
          break;
        }
      if (t < 0.0) t = x == 0.0 ? 0.0 : std::pow(x, ctx.mu(3));
      accumulate(j, e0 + emax * t / (t + ed50_pow));
    }
  } else {
    Eigen::VectorXd psi;
    try {
      psi = ctx.psi_from_phi(phi);
      for (Eigen::Index j = 0; j < n; ++j)
        accumulate(j, evaluate_structural(ctx.spec->structural, psi,
                                          subj.design->x[j]));
    } catch (const InvalidInputError&) {
      out.loglik = kNegInf;
      return out;
    }
  }

  if (!std::isfinite(ll)) {
    out.loglik = kNegInf;
    return out;
  }
  out.loglik = ll;
  out.wrss = wrss;
  out.valid = true;
  return out;
}

PriorContext::PriorContext(Eigen::VectorXd lambda_in, const Eigen::MatrixXd& omega_in)
    : lambda(std::move(lambda_in)), omega(omega_in) {
  proposal_factor = psd_sqrt_factor(omega);
  solver.compute(omega);
}

double PriorContext::log_density(const Eigen::VectorXd& phi) const {
  if (lambda.size() == 0) return 0.0;
  const Eigen::VectorXd d = phi - lambda;
  return -0.5 * d.dot(solver.solve(d));
}

ChainState make_chain_state(const LikContext& ctx, const SubjectRef& subj,
                            const PriorContext& prior, const Eigen::VectorXd& phi) {
  ChainState state;
  state.phi = phi;
  state.lik = eval_subject(ctx, subj, phi);
  state.log_prior = prior.log_density(phi);
  return state;
}

KernelScales KernelScales::defaults(const MhSettings& mh, int dim) {
  KernelScales s;
  s.joint = mh.scale_joint > 0.0
                ? mh.scale_joint
                : 2.38 / std::sqrt(std::max(1, dim));
  s.component = Eigen::VectorXd::Constant(std::max(0, dim), mh.scale_component);
  return s;
}

long long AcceptCounts::accepted_total() const {
  return prior_accepted + joint_accepted +
         static_cast<long long>(comp_accepted.sum());
}

long long AcceptCounts::proposed_total() const {
  return prior_proposed + joint_proposed +
         static_cast<long long>(comp_proposed.sum());
}

void mh_sweep(const LikContext& ctx, const SubjectRef& subj,
              const PriorContext& prior, const KernelScales& scales, int n_reps,
              ChainState& state, Rng& rng, AcceptCounts& counts) {
  const int dim = static_cast<int>(state.phi.size());
  if (dim == 0) return;

  // Independence proposal from the population prior: the prior density
  // cancels against the proposal, leaving the data likelihood ratio.
  for (int rep = 0; rep < n_reps; ++rep) {
    const Eigen::VectorXd cand =
        prior.lambda + prior.proposal_factor * rng.normal_vector(dim);
    const LikEval cand_lik = eval_subject(ctx, subj, cand);
    ++counts.prior_proposed;
    if (std::log(rng.uniform() + 1e-300) < cand_lik.loglik - state.lik.loglik) {
      state.phi = cand;
      state.lik = cand_lik;
      state.log_prior = prior.log_density(cand);
      ++counts.prior_accepted;
    }
  }

  // Joint random walk shaped by the prior covariance.
  for (int rep = 0; rep < n_reps; ++rep) {
    const Eigen::VectorXd cand =
        state.phi + scales.joint * (prior.proposal_factor * rng.normal_vector(dim));
    const LikEval cand_lik = eval_subject(ctx, subj, cand);
    const double cand_prior = prior.log_density(cand);
    ++counts.joint_proposed;
    if (std::log(rng.uniform() + 1e-300) <
        cand_lik.loglik + cand_prior - state.lik.loglik - state.log_prior) {
      state.phi = cand;
      state.lik = cand_lik;
      state.log_prior = cand_prior;
      ++counts.joint_accepted;
    }
  }

  // Componentwise random walk.
  for (int rep = 0; rep < n_reps; ++rep) {
    for (int d = 0; d < dim; ++d) {
      Eigen::VectorXd cand = state.phi;
      const double sd = std::sqrt(std::max(prior.omega(d, d), 1e-12));
      cand(d) += scales.component(d) * sd * rng.normal();
      const LikEval cand_lik = eval_subject(ctx, subj, cand);
      const double cand_prior = prior.log_density(cand);
      counts.comp_proposed(d) += 1.0;
      if (std::log(rng.uniform() + 1e-300) <
          cand_lik.loglik + cand_prior - state.lik.loglik - state.log_prior) {
        state.phi = cand;
        state.lik = cand_lik;
        state.log_prior = cand_prior;
        counts.comp_accepted(d) += 1.0;
      }
    }
  }
}

namespace {
double adapted(double scale, double rate, double acc, double target) {
  const double next = scale * std::exp(rate * (acc - target));
  return std::clamp(next, 1e-3, 1e3);
}
}  // namespace

void adapt_scales(const MhSettings& mh, const AcceptCounts& counts,
                  KernelScales& scales) {
  if (counts.joint_proposed > 0) {
    const double acc = static_cast<double>(counts.joint_accepted) /
                       static_cast<double>(counts.joint_proposed);
    scales.joint = adapted(scales.joint, mh.adapt_rate, acc, mh.target_acceptance);
  }
  for (Eigen::Index d = 0; d < scales.component.size(); ++d) {
    if (counts.comp_proposed(d) > 0) {
      const double acc = counts.comp_accepted(d) / counts.comp_proposed(d);
      scales.component(d) =
          adapted(scales.component(d), mh.adapt_rate, acc, mh.target_acceptance);
    }
  }
}

}  // namespace nlmemboot::detail
