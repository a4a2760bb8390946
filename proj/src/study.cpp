#include "nlmemboot/study.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <sstream>

#include "nlmemboot/bootstrap.hpp"
#include "nlmemboot/errors.hpp"
#include "nlmemboot/fim.hpp"
#include "nlmemboot/io.hpp"
#include "nlmemboot/serialize.hpp"
#include "parallel.hpp"

namespace nlmemboot {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t replicate_seed(std::uint64_t master_seed, int k) {
  return Rng(master_seed).split("study").split(static_cast<std::uint64_t>(k)).key();
}
}  // namespace

ReplicateRecord run_replicate(const ScenarioSpec& scenario, int k,
                              std::uint64_t master_seed) {
  scenario.validate();
  const ParamLayout layout(scenario.model);
  const Rng base(replicate_seed(master_seed, k));

  ReplicateRecord record;
  record.k = k;
  record.theta_hat =
      Eigen::VectorXd::Constant(layout.size(), kNaN);

  const Dataset data = simulate_dataset(scenario.model, scenario.theta_true,
                                        scenario.design, base.split("data").key());

  const bool wants_np =
      std::count(scenario.methods.begin(), scenario.methods.end(), "np") > 0;
  const bool wants_cnp =
      std::count(scenario.methods.begin(), scenario.methods.end(), "cnp") > 0;

  PopulationEstimate estimate;
  try {
    SaemSettings fit = scenario.fit;
    fit.seed = base.split("fit").key();
    // Simulation-study fits start at the generating values.
    estimate = fit_saem(scenario.model, data, scenario.theta_true, fit);
  } catch (const std::runtime_error& e) {
    record.fit_ok = false;
    record.message = e.what();
    return record;
  }
  record.fit_ok = true;
  record.theta_hat = layout.pack(estimate.theta_hat);

  ConditionalDraws conditional;
  if (wants_np || wants_cnp) {
    ConditionalSettings cs;
    conditional = sample_conditional(scenario.model, data, estimate.theta_hat,
                                     scenario.M, cs, base.split("conditional").key());
  }

  for (const auto& method : scenario.methods) {
    MethodResult mr;
    mr.method = method;
    if (method == "asymptotic") {
      mr.estimate = record.theta_hat;
      mr.se = estimate.se;
      for (double alpha : scenario.alphas)
        mr.cis[alpha] = asymptotic_ci(record.theta_hat, estimate.se, alpha);
    } else {
      BootstrapConfig config;
      config.scheme = scheme_from_name(method);
      config.B = scenario.B;
      config.M = scenario.M;
      config.seed = base.split("boot").split(method).key();
      const BootstrapRun run = run_bootstrap(
          scenario.model, data, estimate,
          (wants_np || wants_cnp) ? &conditional : nullptr, config, scenario.fit);
      mr.n_boot_success = run.n_success();
      mr.n_boot_failed = run.n_failed();
      mr.estimate = Eigen::VectorXd::Constant(layout.size(), kNaN);
      mr.se = Eigen::VectorXd::Constant(layout.size(), kNaN);
      for (double alpha : scenario.alphas)
        mr.cis[alpha] = std::vector<Interval>(layout.size());
      if (run.n_success() >= 2) {
        for (int p = 0; p < layout.size(); ++p) {
          const auto values = run.parameter_values(p);
          mr.estimate(p) = mean(values);
          mr.se(p) = sample_sd(values);
          for (double alpha : scenario.alphas)
            mr.cis[alpha][p] = percentile_ci(values, alpha);
        }
      }
    }
    record.methods.push_back(std::move(mr));
  }
  return record;
}

double coverage_rate(const std::vector<Interval>& cis, double theta0) {
  int available = 0, contained = 0;
  for (const auto& ci : cis) {
    if (!ci.available) continue;
    ++available;
    if (ci.contains(theta0)) ++contained;
  }
  if (available == 0) throw InvalidInputError("no available CI");
  return static_cast<double>(contained) / static_cast<double>(available);
}

double mc_se(double expected_coverage, int k_replicates) {
  if (!(expected_coverage >= 0.0 && expected_coverage <= 1.0))
    throw InvalidInputError("coverage must be in [0, 1]");
  if (k_replicates < 1) throw InvalidInputError("K must be >= 1");
  return std::sqrt(expected_coverage * (1.0 - expected_coverage) /
                   static_cast<double>(k_replicates));
}

double relative_bias_params(const std::vector<double>& estimates, double theta0) {
  if (theta0 == 0.0) throw InvalidInputError("relative bias undefined at theta0 = 0");
  if (estimates.empty()) throw InvalidInputError("no estimates");
  double s = 0.0;
  for (double v : estimates) s += (v - theta0) / theta0;
  return s / static_cast<double>(estimates.size()) * 100.0;
}

double empirical_se(const std::vector<double>& estimates, double theta0) {
  if (estimates.size() < 2) throw InvalidInputError("empirical SE needs K >= 2");
  double ss = 0.0;
  for (double v : estimates) ss += (v - theta0) * (v - theta0);
  return std::sqrt(ss / static_cast<double>(estimates.size() - 1));
}

double relative_bias_se(const std::vector<double>& ses, double se_empirical) {
  if (!(se_empirical > 0.0))
    throw InvalidInputError("relative SE bias needs a positive empirical SE");
  if (ses.empty()) throw InvalidInputError("no SE values");
  double s = 0.0;
  for (double v : ses) s += (v - se_empirical) / se_empirical;
  return s / static_cast<double>(ses.size()) * 100.0;
}

CoverageReport aggregate_records(const ScenarioSpec& scenario,
                                 std::vector<ReplicateRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const ReplicateRecord& a, const ReplicateRecord& b) {
              return a.k < b.k;
            });
  const ParamLayout layout(scenario.model);
  const Eigen::VectorXd theta0 = layout.pack(scenario.theta_true);

  CoverageReport report;
  report.scenario_name = scenario.name;
  report.parameter_names = layout.names;
  for (const auto& r : records)
    if (!r.fit_ok) ++report.n_failed_fits;
  report.flagged =
      5 * report.n_failed_fits > static_cast<int>(records.size());

  for (const auto& method : scenario.methods) {
    // Per-parameter series over replicates with a successful fit.
    for (int p = 0; p < layout.size(); ++p) {
      for (double alpha : scenario.alphas) {
        std::vector<Interval> cis;
        for (const auto& r : records) {
          if (!r.fit_ok) continue;
          for (const auto& m : r.methods)
            if (m.method == method) {
              const auto it = m.cis.find(alpha);
              if (it != m.cis.end() && p < static_cast<int>(it->second.size()))
                cis.push_back(it->second[p]);
            }
        }
        CoverageRow row;
        row.scenario = scenario.name;
        row.method = method;
        row.parameter = layout.names[p];
        row.alpha = alpha;
        int available = 0, contained = 0;
        for (const auto& ci : cis) {
          if (!ci.available) continue;
          ++available;
          if (ci.contains(theta0(p))) ++contained;
        }
        row.k_available = available;
        row.coverage = available > 0
                           ? static_cast<double>(contained) / available
                           : kNaN;
        row.mc_se = available > 0 ? mc_se(row.coverage, available) : kNaN;
        report.coverage.push_back(row);
      }

      std::vector<double> estimates, ses, original;
      for (const auto& r : records) {
        if (!r.fit_ok) continue;
        original.push_back(r.theta_hat(p));
        for (const auto& m : r.methods)
          if (m.method == method) {
            if (std::isfinite(m.estimate(p))) estimates.push_back(m.estimate(p));
            if (std::isfinite(m.se(p))) ses.push_back(m.se(p));
          }
      }
      BiasRow row;
      row.scenario = scenario.name;
      row.method = method;
      row.parameter = layout.names[p];
      row.se_empirical =
          original.size() >= 2 ? empirical_se(original, theta0(p)) : kNaN;
      row.rb_param_pct = (theta0(p) != 0.0 && !estimates.empty())
                             ? relative_bias_params(estimates, theta0(p))
                             : kNaN;
      row.rb_se_pct = (row.se_empirical > 0.0 && !ses.empty())
                          ? relative_bias_se(ses, row.se_empirical)
                          : kNaN;
      report.bias.push_back(row);
    }
  }
  report.records = std::move(records);
  return report;
}

namespace {

namespace fs = std::filesystem;

std::string replicate_filename(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rep_%05d.json", k);
  return buf;
}

}  // namespace

CoverageReport run_study(const ScenarioSpec& scenario, std::uint64_t master_seed,
                         int parallelism, const std::string& persist_dir) {
  scenario.validate();

  std::vector<ReplicateRecord> records(scenario.K);
  std::vector<bool> done(scenario.K, false);

  fs::path dir;
  if (!persist_dir.empty()) {
    dir = persist_dir;
    fs::create_directories(dir);
    const nlohmann::json meta = {{"scenario", scenario_to_json(scenario)},
                                 {"master_seed", master_seed},
                                 {"format", 1}};
    const fs::path meta_path = dir / "meta.json";
    if (fs::exists(meta_path)) {
      const auto existing = nlohmann::json::parse(read_file(meta_path));
      if (existing != meta)
        throw InvalidConfigError(
            "persist dir holds a different study: " + dir.string());
    } else {
      atomic_write(meta_path, meta.dump(2) + "\n");
    }
    for (int k = 1; k <= scenario.K; ++k) {
      const fs::path rep = dir / replicate_filename(k);
      if (fs::exists(rep)) {
        records[k - 1] = replicate_from_json(nlohmann::json::parse(read_file(rep)));
        done[k - 1] = true;
      }
    }
  }

  detail::parallel_for(scenario.K, parallelism, [&](int idx) {
    if (done[idx]) return;
    const int k = idx + 1;
    records[idx] = run_replicate(scenario, k, master_seed);
    if (!dir.empty())
      atomic_write(dir / replicate_filename(k),
                   replicate_to_json(records[idx]).dump() + "\n");
  });

  return aggregate_records(scenario, std::move(records));
}

std::string coverage_csv(const CoverageReport& report) {
  std::ostringstream out;
  out << "scenario,method,parameter,alpha,coverage,mc_se,K_available\n";
  for (const auto& r : report.coverage)
    out << r.scenario << ',' << r.method << ',' << r.parameter << ','
        << format_g6(r.alpha) << ',' << format_g6(r.coverage) << ','
        << format_g6(r.mc_se) << ',' << r.k_available << '\n';
  return out.str();
}

std::string bias_csv(const CoverageReport& report) {
  std::ostringstream out;
  out << "scenario,method,parameter,rb_param_pct,rb_se_pct,se_empirical\n";
  for (const auto& r : report.bias)
    out << r.scenario << ',' << r.method << ',' << r.parameter << ','
        << format_g6(r.rb_param_pct) << ',' << format_g6(r.rb_se_pct) << ','
        << format_g6(r.se_empirical) << '\n';
  return out.str();
}

}  // namespace nlmemboot
