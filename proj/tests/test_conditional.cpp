#include <doctest.h>

#include <cmath>

#include "nlmemboot/conditional.hpp"
#include "nlmemboot/errors.hpp"
#include "nlmemboot/model.hpp"

using namespace nlmemboot;

namespace {

// One-parameter random-intercept setup: the conditional of eta given a
// subject's data is a closed-form normal (conjugate) posterior.
struct Conjugate {
  ModelSpec spec = ModelSpec::intercept(Transform::Normal, true,
                                        ErrorModel::Constant);
  PopulationParams theta;
  Dataset data;

  Conjugate(int n_subjects, int n_obs, double mu, double omega2, double sigma,
            std::uint64_t seed) {
    theta.mu.resize(1);
    theta.mu << mu;
    theta.omega.resize(1, 1);
    theta.omega << omega2;
    theta.sigma.resize(1);
    theta.sigma << sigma;
    Design d;
    for (int i = 0; i < n_subjects; ++i)
      d.subjects.push_back(
          {std::to_string(i + 1), std::vector<double>(n_obs, 0.0), ""});
    data = simulate_dataset(spec, theta, d, seed);
  }

  // Analytic posterior of eta_i.
  void posterior(int i, double* mean, double* var) const {
    const double omega2 = theta.omega(0, 0);
    const double sigma2 = theta.sigma(0) * theta.sigma(0);
    const int n = static_cast<int>(data.y[i].size());
    double sum = 0.0;
    for (double v : data.y[i]) sum += v - theta.mu(0);
    const double precision = 1.0 / omega2 + n / sigma2;
    *var = 1.0 / precision;
    *mean = (sum / sigma2) / precision;
  }
};

}  // namespace

TEST_CASE("conditional sampler matches the conjugate posterior") {
  const Conjugate model(8, 4, 10.0, 4.0, 1.0, 12);
  ConditionalSettings settings;
  const int m_draws = 4000;
  const ConditionalDraws draws = sample_conditional(
      model.spec, model.data, model.theta, m_draws, settings, 99);

  REQUIRE(static_cast<int>(draws.subjects.size()) == 8);
  for (int i = 0; i < 3; ++i) {
    double post_mean, post_var;
    model.posterior(i, &post_mean, &post_var);
    const auto& s = draws.subjects[i];
    REQUIRE(s.eta.rows() == m_draws);
    const double est_mean = s.cond_mean(0);
    const double est_sd = s.cond_sd(0);
    CHECK(std::abs(est_mean - post_mean) / std::sqrt(post_var) < 0.05);
    CHECK(est_sd * est_sd == doctest::Approx(post_var).epsilon(0.10));
  }
}

TEST_CASE("thinned draws pass a KS test against the analytic conditional") {
  const Conjugate model(3, 4, 10.0, 4.0, 1.0, 29);
  ConditionalSettings settings;
  const int m_draws = 10000;
  const ConditionalDraws draws = sample_conditional(
      model.spec, model.data, model.theta, m_draws, settings, 202);

  for (int i = 0; i < 3; ++i) {
    double post_mean, post_var;
    model.posterior(i, &post_mean, &post_var);
    std::vector<double> sorted(m_draws);
    for (int m = 0; m < m_draws; ++m) sorted[m] = draws.subjects[i].eta(m, 0);
    std::sort(sorted.begin(), sorted.end());
    double d_stat = 0.0;
    for (int m = 0; m < m_draws; ++m) {
      const double z = (sorted[m] - post_mean) / std::sqrt(post_var);
      const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
      d_stat = std::max(d_stat, std::abs(cdf - (m + 1.0) / m_draws));
      d_stat = std::max(d_stat, std::abs(cdf - m / static_cast<double>(m_draws)));
    }
    // Asymptotic critical value at significance 0.01.
    const double critical = 1.6276 / std::sqrt(static_cast<double>(m_draws));
    CHECK(d_stat < critical);
  }
}

TEST_CASE("M=1 yields one vector per subject") {
  const Conjugate model(5, 3, 1.0, 1.0, 0.5, 3);
  ConditionalSettings settings;
  settings.burn_in = 50;
  settings.pilot = 50;
  const ConditionalDraws draws =
      sample_conditional(model.spec, model.data, model.theta, 1, settings, 4);
  for (const auto& s : draws.subjects) {
    CHECK(s.eta.rows() == 1);
    CHECK(s.residuals.rows() == 1);
    CHECK(s.residuals.cols() == 3);
  }
}

TEST_CASE("conditional concentrates when sigma is tiny") {
  const Conjugate model(4, 4, 5.0, 1.0, 1e-4, 8);
  ConditionalSettings settings;
  settings.burn_in = 300;
  settings.pilot = 300;
  const ConditionalDraws draws =
      sample_conditional(model.spec, model.data, model.theta, 500, settings, 5);
  for (const auto& s : draws.subjects)
    CHECK(s.cond_sd(0) < 0.01 * std::sqrt(model.theta.omega(0, 0)));
}

TEST_CASE("residuals stored per draw match their definition") {
  const Conjugate model(3, 2, 2.0, 1.0, 0.7, 15);
  ConditionalSettings settings;
  settings.burn_in = 50;
  settings.pilot = 60;
  const ConditionalDraws draws =
      sample_conditional(model.spec, model.data, model.theta, 20, settings, 6);
  for (int i = 0; i < 3; ++i) {
    const auto& s = draws.subjects[i];
    for (int m = 0; m < 20; ++m)
      for (int j = 0; j < 2; ++j) {
        const double f = model.theta.mu(0) + s.eta(m, 0);
        const double expected = (model.data.y[i][j] - f) / model.theta.sigma(0);
        CHECK(s.residuals(m, j) == doctest::Approx(expected).epsilon(1e-10));
      }
  }
}

TEST_CASE("EBE extraction") {
  ConditionalDraws draws;
  draws.M = 3;
  draws.random_dim_names = {"mu"};
  SubjectDraws s;
  s.id = "1";
  s.eta.resize(3, 1);
  s.eta << -1.0, 0.0, 1.0;
  s.log_density.resize(3);
  s.log_density << -2.0, -0.5, -1.0;
  s.residuals.resize(3, 1);
  s.residuals.setZero();
  s.cond_mean = s.eta.colwise().mean();
  s.cond_sd.resize(1);
  s.cond_sd << 1.0;
  draws.subjects.push_back(s);

  const Eigen::MatrixXd mean_ebe = compute_ebe(draws, EbeMode::Mean);
  CHECK(mean_ebe(0, 0) == doctest::Approx(0.0));
  const Eigen::MatrixXd mode_ebe = compute_ebe(draws, EbeMode::Mode);
  CHECK(mode_ebe(0, 0) == 0.0);  // the highest-density draw

  // Degenerate draws: both modes return that vector.
  draws.subjects[0].eta.setConstant(0.7);
  draws.subjects[0].log_density.setConstant(-1.0);
  CHECK(compute_ebe(draws, EbeMode::Mean)(0, 0) == doctest::Approx(0.7));
  CHECK(compute_ebe(draws, EbeMode::Mode)(0, 0) == 0.7);
}

TEST_CASE("conditional draws validate their shape") {
  ConditionalDraws draws;
  draws.M = 2;
  SubjectDraws s;
  s.id = "1";
  s.eta.resize(1, 1);
  s.eta.setZero();
  s.residuals.resize(1, 1);
  draws.subjects.push_back(s);
  CHECK_THROWS_AS(draws.validate(), InvalidInputError);
}
