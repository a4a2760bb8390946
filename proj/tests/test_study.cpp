#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "nlmemboot/errors.hpp"
#include "nlmemboot/io.hpp"
#include "nlmemboot/study.hpp"

using namespace nlmemboot;
namespace fs = std::filesystem;

namespace {

// Small scenario for fast machinery tests: the rich design shrunk to a few
// subjects and short SAEM phases.
ScenarioSpec tiny_scenario(int n_subjects, int K, int B) {
  ScenarioSpec s = scenario_preset("rich_emax");
  s.name = "tiny";
  s.design.subjects.resize(n_subjects);
  s.K = K;
  s.B = B;
  s.M = 30;
  s.fit.n_burn = 5;
  s.fit.n_explore = 100;
  s.fit.n_smooth = 50;
  return s;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("nlmemboot_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("scenario presets match the catalog descriptions") {
  const ScenarioSpec rich = scenario_preset("rich_emax");
  CHECK(rich.design.n_subjects() == 100);
  CHECK(rich.design.subjects[0].x == std::vector<double>({0, 100, 300, 1000}));
  CHECK(rich.theta_true.mu(3) == 1.0);
  CHECK(rich.theta_true.sigma(0) == 0.1);

  const ScenarioSpec sparse = scenario_preset("sparse_hill");
  CHECK(sparse.design.n_subjects() == 200);
  CHECK(sparse.theta_true.mu(3) == 3.0);
  std::map<std::string, int> group_sizes;
  for (const auto& s : sparse.design.subjects) {
    ++group_sizes[s.group];
    CHECK(s.x.size() == 2);
  }
  REQUIRE(group_sizes.size() == 4);
  for (const auto& [g, n] : group_sizes) CHECK(n == 50);
  CHECK(sparse.design.subjects[0].x == std::vector<double>({0, 1000}));

  const ScenarioSpec noisy = scenario_preset("rich_hill_sigma05");
  CHECK(noisy.theta_true.sigma(0) == 0.5);
  CHECK(noisy.theta_true.mu(3) == 3.0);
  CHECK(noisy.theta_true.mu(2) == 500.0);  // other values unchanged
  CHECK(noisy.design.n_subjects() == 100);

  const ScenarioSpec unb = scenario_preset("unb_sparserich_hill");
  CHECK(unb.design.n_subjects() == 100);
  int full = 0;
  for (const auto& s : unb.design.subjects)
    if (s.x.size() == 6) ++full;
  CHECK(full == 20);

  CHECK_THROWS_AS(scenario_preset("nope"), InvalidInputError);
  CHECK(scenario_catalog().size() == 20);
}

TEST_CASE("monte carlo SE of a coverage estimate") {
  CHECK(mc_se(0.9, 200) == doctest::Approx(0.0212132).epsilon(1e-4));
  CHECK(mc_se(0.0, 50) == 0.0);
  CHECK(mc_se(1.0, 50) == 0.0);
  CHECK(mc_se(0.5, 100) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK_THROWS_AS(mc_se(1.5, 10), InvalidInputError);
  // Maximized at p = 1/2, decreasing in K.
  CHECK(mc_se(0.5, 100) > mc_se(0.3, 100));
  CHECK(mc_se(0.5, 100) > mc_se(0.5, 400));
}

TEST_CASE("coverage rate counting") {
  auto iv = [](double lo, double hi) {
    Interval i;
    i.lo = lo;
    i.hi = hi;
    i.available = true;
    return i;
  };
  std::vector<Interval> all = {iv(0, 2), iv(0.5, 1.5), iv(0.9, 1.1)};
  CHECK(coverage_rate(all, 1.0) == 1.0);
  CHECK(coverage_rate(all, 5.0) == 0.0);
  std::vector<Interval> mixed(200, iv(0, 2));
  for (int i = 0; i < 20; ++i) mixed[i] = iv(3, 4);
  CHECK(coverage_rate(mixed, 1.0) == doctest::Approx(0.90));
  // Unavailable intervals leave the denominator.
  std::vector<Interval> partial = {iv(0, 2), Interval{}, iv(5, 6)};
  CHECK(coverage_rate(partial, 1.0) == doctest::Approx(0.5));

  // Containment is order-based: a monotone reparameterization applied to
  // intervals and the target leaves every rate unchanged.
  for (double theta0 : {0.3, 1.0, 3.5}) {
    std::vector<Interval> mapped;
    for (const auto& ci : mixed)
      mapped.push_back(iv(std::exp(ci.lo), std::exp(ci.hi)));
    CHECK(coverage_rate(mapped, std::exp(theta0)) ==
          coverage_rate(mixed, theta0));
  }
}

TEST_CASE("bias metrics") {
  CHECK(relative_bias_params({5.0, 5.0}, 5.0) == 0.0);
  CHECK(relative_bias_params({5.5, 5.5}, 5.0) == doctest::Approx(10.0));
  CHECK(relative_bias_params({5.0, 6.0}, 5.0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(relative_bias_params({1.0}, 0.0), InvalidInputError);

  CHECK(empirical_se({5.0, 5.0}, 5.0) == 0.0);
  CHECK(empirical_se({6.0, 4.0}, 5.0) == doctest::Approx(std::sqrt(2.0)));
  // Deviations are taken from theta0, so bias inflates it beyond the SD.
  const std::vector<double> biased = {7.0, 8.0, 9.0};
  CHECK(empirical_se(biased, 5.0) > sample_sd(biased));

  CHECK(relative_bias_se({2.0, 2.0}, 2.0) == 0.0);
  CHECK(relative_bias_se({1.8, 1.8}, 2.0) == doctest::Approx(-10.0));
  CHECK(relative_bias_se({2.0, 2.4}, 2.0) == doctest::Approx(10.0));
  CHECK_THROWS_AS(relative_bias_se({1.0}, 0.0), InvalidInputError);
}

TEST_CASE("replicate evaluation gates methods and is reproducible") {
  ScenarioSpec scenario = tiny_scenario(12, 1, 2);
  scenario.methods = {"asymptotic"};
  const ReplicateRecord r = run_replicate(scenario, 1, 555);
  REQUIRE(r.fit_ok);
  REQUIRE(r.methods.size() == 1);
  CHECK(r.methods[0].method == "asymptotic");
  CHECK(r.methods[0].n_boot_success == 0);
  CHECK(r.methods[0].n_boot_failed == 0);
  // Fixed effects finite and positive.
  for (int p = 0; p < 4; ++p) {
    CHECK(std::isfinite(r.theta_hat(p)));
    CHECK(r.theta_hat(p) > 0.0);
  }

  const ReplicateRecord again = run_replicate(scenario, 1, 555);
  CHECK((r.theta_hat - again.theta_hat).norm() == 0.0);
  const auto& ci_a = r.methods[0].cis.at(0.1);
  const auto& ci_b = again.methods[0].cis.at(0.1);
  for (std::size_t p = 0; p < ci_a.size(); ++p) {
    CHECK(ci_a[p].lo == ci_b[p].lo);
    CHECK(ci_a[p].hi == ci_b[p].hi);
  }
}

TEST_CASE("study runs are schedule-independent and resumable") {
  ScenarioSpec scenario = tiny_scenario(10, 3, 2);
  scenario.methods = {"asymptotic", "case", "cnp"};

  const CoverageReport serial = run_study(scenario, 99, 1);
  const CoverageReport threaded = run_study(scenario, 99, 8);
  CHECK(coverage_csv(serial) == coverage_csv(threaded));
  CHECK(bias_csv(serial) == bias_csv(threaded));

  // Coverage of a K=1 study is 0 or 1.
  ScenarioSpec single = tiny_scenario(10, 1, 2);
  single.methods = {"asymptotic"};
  const CoverageReport one = run_study(single, 7, 1);
  for (const auto& row : one.coverage) {
    if (row.k_available > 0) CHECK((row.coverage == 0.0 || row.coverage == 1.0));
  }

  // Persistence: rerunning reuses the stored replicates; deleting one file
  // recomputes only that replicate and reproduces the same report.
  TempDir tmp("study_resume");
  const CoverageReport first = run_study(scenario, 99, 1, tmp.path.string());
  CHECK(coverage_csv(first) == coverage_csv(serial));
  fs::remove(tmp.path / "rep_00002.json");
  const CoverageReport resumed = run_study(scenario, 99, 1, tmp.path.string());
  CHECK(coverage_csv(resumed) == coverage_csv(serial));
  CHECK(bias_csv(resumed) == bias_csv(serial));

  // A different master seed in the same directory is rejected.
  CHECK_THROWS_AS(run_study(scenario, 100, 1, tmp.path.string()),
                  InvalidConfigError);
}

TEST_CASE("bootstrap CIs nest across confidence levels") {
  ScenarioSpec scenario = tiny_scenario(10, 2, 8);
  scenario.methods = {"case", "cnp"};
  const CoverageReport report = run_study(scenario, 41, 1);
  int checked = 0;
  for (const auto& rec : report.records) {
    if (!rec.fit_ok) continue;
    for (const auto& m : rec.methods) {
      const auto& ci90 = m.cis.at(0.1);
      const auto& ci95 = m.cis.at(0.05);
      for (std::size_t p = 0; p < ci90.size(); ++p) {
        if (!ci90[p].available || !ci95[p].available) continue;
        CHECK(ci95[p].lo <= ci90[p].lo);
        CHECK(ci95[p].hi >= ci90[p].hi);
        ++checked;
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("coverage and bias tables have the documented schemas") {
  ScenarioSpec scenario = tiny_scenario(8, 1, 2);
  scenario.methods = {"asymptotic", "par"};
  const CoverageReport report = run_study(scenario, 3, 1);
  const std::string cov = coverage_csv(report);
  CHECK(cov.rfind("scenario,method,parameter,alpha,coverage,mc_se,K_available\n",
                  0) == 0);
  const std::string bias = bias_csv(report);
  CHECK(bias.rfind("scenario,method,parameter,rb_param_pct,rb_se_pct,se_empirical\n",
                   0) == 0);
  // 2 methods x 9 parameters x 2 alphas coverage rows; 2 x 9 bias rows.
  CHECK(std::count(cov.begin(), cov.end(), '\n') == 1 + 2 * 9 * 2);
  CHECK(std::count(bias.begin(), bias.end(), '\n') == 1 + 2 * 9);

  // Emitted tables are self-describing and re-parseable by the tool's own
  // reader, with every numeric cell surviving the documented precision.
  const auto cov_rows = parse_csv_table(cov);
  REQUIRE(cov_rows.size() == 2 * 9 * 2);
  for (const auto& row : cov_rows) {
    CHECK(row.at("scenario") == "tiny");
    const double alpha = std::stod(row.at("alpha"));
    CHECK((alpha == 0.1 || alpha == 0.05));
    std::stoi(row.at("K_available"));
  }
  const auto bias_rows = parse_csv_table(bias);
  REQUIRE(bias_rows.size() == 2 * 9);
  for (const auto& row : bias_rows) std::stod(row.at("se_empirical"));
}
