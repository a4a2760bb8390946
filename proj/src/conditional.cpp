#include "nlmemboot/conditional.hpp"

#include <algorithm>
#include <cmath>

#include "nlmemboot/errors.hpp"
#include "nlmemboot/stats.hpp"
#include "mh_internal.hpp"

namespace nlmemboot {

using detail::AcceptCounts;
using detail::ChainState;
using detail::KernelScales;
using detail::LikContext;
using detail::PriorContext;

void ConditionalDraws::validate() const {
  if (M < 1) throw InvalidInputError("conditional draws need M >= 1");
  for (const auto& s : subjects) {
    if (s.eta.rows() != M)
      throw InvalidInputError("subject " + s.id + " has wrong draw count");
    if (s.residuals.rows() != M)
      throw InvalidInputError("subject " + s.id + " has wrong residual rows");
  }
}

ConditionalDraws sample_conditional(const ModelSpec& spec, const Dataset& data,
                                    const PopulationParams& theta_hat, int M,
                                    const ConditionalSettings& settings,
                                    std::uint64_t seed) {
  spec.validate();
  data.validate();
  theta_hat.validate(spec);
  if (M < 1) throw InvalidInputError("M must be >= 1");
  if (settings.burn_in < 0 || settings.pilot < 8)
    throw InvalidInputError("bad conditional sampler settings");

  const auto random_dims = spec.random_dims();
  const int d = static_cast<int>(random_dims.size());

  LikContext ctx;
  ctx.spec = &spec;
  ctx.mu = theta_hat.mu;
  ctx.sigma = theta_hat.sigma.cwiseMax(1e-10);
  ctx.random_dims = random_dims;
  {
    std::vector<double> unique_doses;
    for (const auto& s : data.design.subjects)
      for (double x : s.x)
        if (std::find(unique_doses.begin(), unique_doses.end(), x) ==
            unique_doses.end())
          unique_doses.push_back(x);
    ctx.refresh_dose_cache(unique_doses);
  }

  Eigen::VectorXd lambda(d);
  for (int k = 0; k < d; ++k)
    lambda(k) = spec.transforms[random_dims[k]] == Transform::LogNormal
                    ? std::log(theta_hat.mu(random_dims[k]))
                    : theta_hat.mu(random_dims[k]);
  Eigen::MatrixXd omega = clip_to_psd(theta_hat.omega);
  for (int k = 0; k < d; ++k) omega(k, k) = std::max(omega(k, k), 1e-10);
  const PriorContext prior(lambda, omega);

  const auto subjects = detail::canonical_subjects(data);
  const Rng base = Rng(seed).split("conditional");

  ConditionalDraws out;
  out.M = M;
  const auto pnames = spec.param_names();
  for (int p : random_dims) out.random_dim_names.push_back(pnames[p]);
  out.subjects.resize(subjects.size());

  for (const auto& subj : subjects) {
    Rng stream = base.split(subj.design->id);
    KernelScales scales = KernelScales::defaults(settings.mh, d);

    ChainState state = detail::make_chain_state(
        ctx, subj, prior, lambda + prior.proposal_factor * stream.normal_vector(d));

    // Adaptation phase.
    for (int it = 0; it < settings.burn_in; ++it) {
      AcceptCounts counts(d);
      detail::mh_sweep(ctx, subj, prior, scales, settings.mh.n_kernel_reps, state,
                       stream, counts);
      detail::adapt_scales(settings.mh, counts, scales);
    }

    // Pilot phase with frozen scales, to estimate the autocorrelation time.
    AcceptCounts pilot_counts(d);
    std::vector<std::vector<double>> pilot(d);
    for (int it = 0; it < settings.pilot; ++it) {
      detail::mh_sweep(ctx, subj, prior, scales, settings.mh.n_kernel_reps, state,
                       stream, pilot_counts);
      for (int k = 0; k < d; ++k) pilot[k].push_back(state.phi(k));
    }
    if (d > 0 && pilot_counts.accepted_total() == 0)
      throw SamplerError("no accepted move for subject " + subj.design->id +
                         " after adaptation");

    double iact_max = 1.0;
    for (int k = 0; k < d; ++k)
      iact_max = std::max(iact_max, integrated_autocorr_time(pilot[k]));
    int thin = static_cast<int>(std::ceil(iact_max));
    thin = std::max(thin, static_cast<int>(std::ceil(
                              settings.iact_span * iact_max / std::max(1, M))));
    thin = std::clamp(thin, 1, settings.max_thin);

    auto& sd = out.subjects[subj.original_index];
    sd.id = subj.design->id;
    sd.thin = thin;
    const auto n_i = static_cast<Eigen::Index>(subj.design->x.size());
    sd.eta.resize(M, d);
    sd.log_density.resize(M);
    sd.residuals.resize(M, n_i);

    AcceptCounts counts(d);
    for (int m = 0; m < M; ++m) {
      for (int t = 0; t < thin; ++t)
        detail::mh_sweep(ctx, subj, prior, scales, settings.mh.n_kernel_reps, state,
                         stream, counts);
      sd.eta.row(m) = (state.phi - lambda).transpose();
      sd.log_density(m) = state.lik.loglik + state.log_prior;
      for (Eigen::Index j = 0; j < n_i; ++j) {
        const double g = std::max(
            evaluate_error_sd(spec.error_model, ctx.sigma, state.lik.f(j)),
            ctx.g_floor);
        sd.residuals(m, j) = state.lik.r(j) / g;
      }
    }
    sd.acceptance =
        counts.proposed_total() > 0
            ? static_cast<double>(counts.accepted_total()) /
                  static_cast<double>(counts.proposed_total())
            : 0.0;
    sd.cond_mean = sd.eta.colwise().mean();
    sd.cond_sd.resize(d);
    for (int k = 0; k < d; ++k) {
      if (M < 2) {
        sd.cond_sd(k) = 0.0;
      } else {
        const Eigen::VectorXd col = sd.eta.col(k);
        sd.cond_sd(k) = std::sqrt((col.array() - col.mean()).square().sum() /
                                  static_cast<double>(M - 1));
      }
    }
  }
  return out;
}

Eigen::MatrixXd compute_ebe(const ConditionalDraws& draws, EbeMode mode) {
  if (draws.subjects.empty() || draws.M < 1)
    throw InvalidInputError("compute_ebe needs non-empty draws");
  const int d = static_cast<int>(draws.random_dim_names.size());
  Eigen::MatrixXd out(draws.subjects.size(), d);
  for (std::size_t i = 0; i < draws.subjects.size(); ++i) {
    const auto& s = draws.subjects[i];
    if (mode == EbeMode::Mean) {
      out.row(i) = s.eta.colwise().mean();
    } else {
      Eigen::Index best = 0;
      s.log_density.maxCoeff(&best);
      out.row(i) = s.eta.row(best);
    }
  }
  return out;
}

}  // namespace nlmemboot
