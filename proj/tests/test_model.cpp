#include <doctest.h>

#include <cmath>
#include <random>

#include "nlmemboot/errors.hpp"
#include "nlmemboot/io.hpp"
#include "nlmemboot/model.hpp"
#include "nlmemboot/stats.hpp"

using namespace nlmemboot;

namespace {

Eigen::VectorXd psi4(double e0, double emax, double ed50, double gamma) {
  Eigen::VectorXd p(4);
  p << e0, emax, ed50, gamma;
  return p;
}

Design uniform_design(int n_subjects, const std::vector<double>& doses,
                      const std::string& group = "") {
  Design d;
  for (int i = 0; i < n_subjects; ++i)
    d.subjects.push_back({std::to_string(i + 1), doses, group});
  return d;
}

PopulationParams table1_theta(double gamma = 1.0, double sigma = 0.1) {
  PopulationParams theta;
  theta.mu.resize(4);
  theta.mu << 5.0, 30.0, 500.0, gamma;
  theta.omega.resize(3, 3);
  theta.omega << 0.09, 0, 0, 0, 0.49, 0.245, 0, 0.245, 0.49;
  theta.sigma.resize(1);
  theta.sigma << sigma;
  return theta;
}

}  // namespace

TEST_CASE("dose-response values") {
  CHECK(evaluate_structural(Structural::SigEmax, psi4(5, 30, 500, 1), 0.0) == 5.0);
  CHECK(evaluate_structural(Structural::SigEmax, psi4(5, 30, 500, 3), 500.0) ==
        doctest::Approx(20.0).epsilon(1e-12));
  CHECK(evaluate_structural(Structural::SigEmax, psi4(5, 30, 500, 1), 1000.0) ==
        doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("dose-response input validation") {
  CHECK_THROWS_AS(
      evaluate_structural(Structural::SigEmax, psi4(5, 30, 500, 1), -1.0),
      InvalidInputError);
  CHECK_THROWS_AS(
      evaluate_structural(Structural::SigEmax, psi4(5, 30, 0, 1), 10.0),
      InvalidInputError);
  CHECK_THROWS_AS(
      evaluate_structural(Structural::SigEmax, psi4(5, 30, 500, 0), 10.0),
      InvalidInputError);
  Eigen::VectorXd bad = psi4(5, 30, 500, 1);
  bad(1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(evaluate_structural(Structural::SigEmax, bad, 10.0),
                  InvalidInputError);
}

TEST_CASE("dose-response is monotone when Emax > 0") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.2, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto psi = psi4(u(gen), 10 * u(gen), 200 * u(gen), u(gen));
    double prev = -1e300;
    for (double x = 0.0; x <= 2000.0; x += 40.0) {
      const double f = evaluate_structural(Structural::SigEmax, psi, x);
      CHECK(f >= prev - 1e-12);
      prev = f;
    }
  }
}

TEST_CASE("error model standard deviations") {
  Eigen::VectorXd s1(1);
  s1 << 0.1;
  CHECK(evaluate_error_sd(ErrorModel::Proportional, s1, 20.0) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(evaluate_error_sd(ErrorModel::Proportional, s1, 0.0) == 0.0);
  Eigen::VectorXd s2(1);
  s2 << 0.3;
  CHECK(evaluate_error_sd(ErrorModel::Constant, s2, 99.0) == 0.3);
  Eigen::VectorXd s3(2);
  s3 << 0.5, 0.1;
  CHECK(evaluate_error_sd(ErrorModel::Combined, s3, 10.0) ==
        doctest::Approx(1.5).epsilon(1e-15));
  Eigen::VectorXd neg(1);
  neg << -0.1;
  CHECK_THROWS_AS(evaluate_error_sd(ErrorModel::Constant, neg, 1.0),
                  InvalidInputError);
}

TEST_CASE("parameter transforms") {
  const ModelSpec spec = ModelSpec::sig_emax();
  Eigen::VectorXd mu(4);
  mu << 5, 30, 500, 3;
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(3);
  CHECK(transform_psi(spec, mu, eta)(2) == 500.0);
  eta(2) = std::log(2.0);
  CHECK(transform_psi(spec, mu, eta)(2) == doctest::Approx(1000.0).epsilon(1e-12));
  CHECK(transform_psi(spec, mu, eta)(3) == 3.0);  // gamma is shared

  // Log-normal output is strictly positive for any finite eta.
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z(0.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    eta << z(gen), z(gen), z(gen);
    const auto psi = transform_psi(spec, mu, eta);
    CHECK(psi(0) > 0.0);
    CHECK(psi(1) > 0.0);
    CHECK(psi(2) > 0.0);
  }
  CHECK_THROWS_AS(transform_psi(spec, mu, Eigen::VectorXd::Zero(2)),
                  InvalidInputError);
}

TEST_CASE("model spec validation") {
  ModelSpec spec = ModelSpec::sig_emax();
  spec.omega_pattern(0, 1) = true;  // asymmetric
  CHECK_THROWS_AS(spec.validate(), InvalidInputError);

  spec = ModelSpec::sig_emax();
  spec.omega_pattern(3, 3) = true;  // random effect on the Fixed parameter
  CHECK_THROWS_AS(spec.validate(), InvalidInputError);

  spec = ModelSpec::sig_emax();
  spec.omega_pattern(0, 0) = false;  // covariance would outlive its variance
  spec.omega_pattern(0, 1) = spec.omega_pattern(1, 0) = true;
  CHECK_THROWS_AS(spec.validate(), InvalidInputError);
}

TEST_CASE("population parameter validation") {
  const ModelSpec spec = ModelSpec::sig_emax();
  PopulationParams theta = table1_theta();
  theta.validate(spec);

  PopulationParams bad = theta;
  bad.omega(0, 1) = bad.omega(1, 0) = 10.0;  // not PSD
  CHECK_THROWS_AS(bad.validate(spec), InvalidInputError);

  bad = theta;
  bad.sigma(0) = -0.1;
  CHECK_THROWS_AS(bad.validate(spec), InvalidInputError);

  bad = theta;
  bad.mu(2) = -5.0;  // log-normal needs a positive fixed effect
  CHECK_THROWS_AS(bad.validate(spec), InvalidInputError);
}

TEST_CASE("noise-free simulation is residual-free") {
  const ModelSpec spec = ModelSpec::sig_emax();
  PopulationParams theta = table1_theta();
  theta.omega.setZero();
  theta.sigma(0) = 0.0;
  const Design design = uniform_design(20, {0, 100, 300, 1000});
  const Dataset data = simulate_dataset(spec, theta, design, 99);
  for (std::size_t i = 0; i < data.y.size(); ++i)
    for (std::size_t j = 0; j < data.y[i].size(); ++j) {
      const double f = evaluate_structural(Structural::SigEmax, theta.mu,
                                           design.subjects[i].x[j]);
      CHECK(data.y[i][j] == f);
    }
}

TEST_CASE("simulation is seed-deterministic and keyed by subject id") {
  const ModelSpec spec = ModelSpec::sig_emax();
  const PopulationParams theta = table1_theta();
  const Design design = uniform_design(10, {0, 100, 300, 1000});
  const Dataset a = simulate_dataset(spec, theta, design, 7);
  const Dataset b = simulate_dataset(spec, theta, design, 7);
  CHECK(a.y == b.y);
  const Dataset c = simulate_dataset(spec, theta, design, 8);
  CHECK(a.y != c.y);

  // Reversing the subject order must not change any subject's data.
  Design reversed = design;
  std::reverse(reversed.subjects.begin(), reversed.subjects.end());
  const Dataset d = simulate_dataset(spec, theta, reversed, 7);
  for (int i = 0; i < design.n_subjects(); ++i)
    CHECK(a.y[i] == d.y[design.n_subjects() - 1 - i]);

  CHECK(a.simulated);
  CHECK(a.seed == 7);
  CHECK(a.generating_theta.has_value());
}

TEST_CASE("simulated dose means match a brute-force Monte Carlo oracle") {
  const ModelSpec spec = ModelSpec::sig_emax();
  const PopulationParams theta = table1_theta();
  const std::vector<double> doses = {0, 100, 300, 1000};
  const int n_subjects = 10000;
  const Dataset data =
      simulate_dataset(spec, theta, uniform_design(n_subjects, doses), 31);

  // Oracle: E[f(x; psi(eta))] by direct Monte Carlo over eta draws, using an
  // RNG independent of the library's.
  std::mt19937_64 gen(555);
  std::normal_distribution<double> z;
  const Eigen::MatrixXd l = psd_sqrt_factor(theta.omega);
  const int n_mc = 1000000;
  std::vector<double> oracle_mean(doses.size(), 0.0), oracle_m2(doses.size(), 0.0);
  for (int s = 0; s < n_mc; ++s) {
    Eigen::VectorXd eta(3);
    eta << z(gen), z(gen), z(gen);
    eta = l * eta;
    const Eigen::VectorXd psi = transform_psi(spec, theta.mu, eta);
    for (std::size_t j = 0; j < doses.size(); ++j) {
      const double f = evaluate_structural(Structural::SigEmax, psi, doses[j]);
      oracle_mean[j] += f;
      oracle_m2[j] += f * f;
    }
  }
  for (std::size_t j = 0; j < doses.size(); ++j) {
    oracle_mean[j] /= n_mc;
    oracle_m2[j] = oracle_m2[j] / n_mc - oracle_mean[j] * oracle_mean[j];
  }

  for (std::size_t j = 0; j < doses.size(); ++j) {
    double data_mean = 0.0, data_m2 = 0.0;
    for (int i = 0; i < n_subjects; ++i) {
      data_mean += data.y[i][j];
      data_m2 += data.y[i][j] * data.y[i][j];
    }
    data_mean /= n_subjects;
    data_m2 = data_m2 / n_subjects - data_mean * data_mean;
    // Residual noise is mean zero, so E[y] = E[f]; compare at 3 combined
    // Monte Carlo standard errors.
    const double se = std::sqrt(oracle_m2[j] / n_mc + data_m2 / n_subjects);
    CHECK(std::abs(data_mean - oracle_mean[j]) < 3.0 * se);
  }
}

TEST_CASE("dataset CSV round trip") {
  const ModelSpec spec = ModelSpec::sig_emax();
  const PopulationParams theta = table1_theta();
  const Dataset data =
      simulate_dataset(spec, theta, uniform_design(5, {0, 100, 300, 1000}), 3);

  const std::string csv = dataset_csv(data);
  CHECK(csv.rfind("id,x,y\n", 0) == 0);
  const Dataset back = parse_dataset_csv(csv);
  REQUIRE(back.design == data.design);
  // Values survive at the documented 6-significant-digit precision.
  for (std::size_t i = 0; i < data.y.size(); ++i)
    for (std::size_t j = 0; j < data.y[i].size(); ++j)
      CHECK(back.y[i][j] ==
            doctest::Approx(data.y[i][j]).epsilon(1e-5));
  // A second round trip is exact: formatting is idempotent.
  CHECK(dataset_csv(back) == csv);
}

TEST_CASE("dataset CSV keeps group labels") {
  Dataset data;
  data.design = uniform_design(3, {0, 100}, "g1");
  data.y = {{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}};
  const std::string csv = dataset_csv(data);
  CHECK(csv.rfind("id,x,y,group\n", 0) == 0);
  const Dataset back = parse_dataset_csv(csv);
  CHECK(back.design.subjects[0].group == "g1");
}

TEST_CASE("malformed CSV names the offending row") {
  const std::string csv = "id,x,y\n1,0,5.1\n1,100,oops\n";
  try {
    parse_dataset_csv(csv);
    FAIL("expected InvalidInputError");
  } catch (const InvalidInputError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
    CHECK(std::string(e.what()).find("y") != std::string::npos);
  }
}

TEST_CASE("parameter layout packs and unpacks") {
  const ModelSpec spec = ModelSpec::sig_emax();
  const ParamLayout layout(spec);
  const std::vector<std::string> expected = {
      "E0",        "Emax",        "ED50",        "gamma",          "omega2_E0",
      "omega2_Emax", "omega2_ED50", "cov_Emax_ED50", "sigma"};
  CHECK(layout.names == expected);
  const PopulationParams theta = table1_theta(3.0, 0.5);
  const Eigen::VectorXd packed = layout.pack(theta);
  CHECK(packed(3) == 3.0);
  CHECK(packed(7) == 0.245);
  CHECK(packed(8) == 0.5);
  const PopulationParams back = layout.unpack(packed);
  CHECK((back.mu - theta.mu).norm() == 0.0);
  CHECK((back.omega - theta.omega).norm() == 0.0);
  CHECK((back.sigma - theta.sigma).norm() == 0.0);
  CHECK(layout.index_of("omega2_Emax") == 5);
  CHECK(layout.index_of("nope") == -1);
}
