#include "nlmemboot/serialize.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nlmemboot/errors.hpp"
#include "nlmemboot/io.hpp"

namespace nlmemboot {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = j.size();
  const auto cols = rows == 0 ? 0 : j[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw InvalidInputError("ragged matrix in JSON");
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

// NaN is not representable in JSON; emit null and read it back as NaN.
json nullable_vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v(i)))
      out.push_back(v(i));
    else
      out.push_back(nullptr);
  }
  return out;
}

Eigen::VectorXd nullable_vector_from_json(const json& j) {
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(i) = j[i].is_null() ? std::numeric_limits<double>::quiet_NaN()
                          : j[i].get<double>();
  return v;
}

std::string structural_name(Structural s) {
  return s == Structural::Intercept ? "intercept" : "sig_emax";
}
Structural structural_from(const std::string& s) {
  if (s == "intercept") return Structural::Intercept;
  if (s == "sig_emax") return Structural::SigEmax;
  throw InvalidInputError("unknown structural model: " + s);
}

std::string error_name(ErrorModel e) {
  switch (e) {
    case ErrorModel::Constant: return "constant";
    case ErrorModel::Proportional: return "proportional";
    case ErrorModel::Combined: return "combined";
  }
  throw InvalidInputError("unknown error model");
}
ErrorModel error_from(const std::string& s) {
  if (s == "constant") return ErrorModel::Constant;
  if (s == "proportional") return ErrorModel::Proportional;
  if (s == "combined") return ErrorModel::Combined;
  throw InvalidInputError("unknown error model: " + s);
}

std::string transform_name(Transform t) {
  switch (t) {
    case Transform::Normal: return "normal";
    case Transform::LogNormal: return "lognormal";
    case Transform::Fixed: return "fixed";
  }
  throw InvalidInputError("unknown transform");
}
Transform transform_from(const std::string& s) {
  if (s == "normal") return Transform::Normal;
  if (s == "lognormal") return Transform::LogNormal;
  if (s == "fixed") return Transform::Fixed;
  throw InvalidInputError("unknown transform: " + s);
}

}  // namespace

json model_spec_to_json(const ModelSpec& spec) {
  json j;
  j["structural"] = structural_name(spec.structural);
  j["error_model"] = error_name(spec.error_model);
  json transforms = json::array();
  for (auto t : spec.transforms) transforms.push_back(transform_name(t));
  j["transforms"] = transforms;
  json pattern = json::array();
  for (Eigen::Index r = 0; r < spec.omega_pattern.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < spec.omega_pattern.cols(); ++c)
      row.push_back(static_cast<bool>(spec.omega_pattern(r, c)));
    pattern.push_back(row);
  }
  j["omega_pattern"] = pattern;
  return j;
}

ModelSpec model_spec_from_json(const json& j) {
  ModelSpec spec;
  spec.structural = structural_from(j.at("structural").get<std::string>());
  spec.error_model = error_from(j.at("error_model").get<std::string>());
  for (const auto& t : j.at("transforms"))
    spec.transforms.push_back(transform_from(t.get<std::string>()));
  const auto& pattern = j.at("omega_pattern");
  const auto n = pattern.size();
  spec.omega_pattern.resize(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      spec.omega_pattern(r, c) = pattern[r][c].get<bool>();
  spec.validate();
  return spec;
}

json params_to_json(const PopulationParams& p) {
  return {{"mu", vector_to_json(p.mu)},
          {"omega", matrix_to_json(p.omega)},
          {"sigma", vector_to_json(p.sigma)}};
}

PopulationParams params_from_json(const json& j) {
  PopulationParams p;
  p.mu = vector_from_json(j.at("mu"));
  p.omega = matrix_from_json(j.at("omega"));
  p.sigma = vector_from_json(j.at("sigma"));
  return p;
}

json settings_to_json(const SaemSettings& s) {
  return {{"n_burn", s.n_burn},
          {"n_explore", s.n_explore},
          {"n_smooth", s.n_smooth},
          {"n_chains", s.n_chains},
          {"seed", s.seed},
          {"sigma_floor", s.sigma_floor},
          {"omega_floor", s.omega_floor},
          {"anneal_iterations", s.anneal_iterations},
          {"anneal_factor", s.anneal_factor},
          {"mh",
           {{"n_kernel_reps", s.mh.n_kernel_reps},
            {"target_acceptance", s.mh.target_acceptance},
            {"adapt_rate", s.mh.adapt_rate},
            {"scale_joint", s.mh.scale_joint},
            {"scale_component", s.mh.scale_component}}}};
}

SaemSettings settings_from_json(const json& j) {
  SaemSettings s;
  s.n_burn = j.value("n_burn", s.n_burn);
  s.n_explore = j.value("n_explore", s.n_explore);
  s.n_smooth = j.value("n_smooth", s.n_smooth);
  s.n_chains = j.value("n_chains", s.n_chains);
  s.seed = j.value("seed", s.seed);
  s.sigma_floor = j.value("sigma_floor", s.sigma_floor);
  s.omega_floor = j.value("omega_floor", s.omega_floor);
  s.anneal_iterations = j.value("anneal_iterations", s.anneal_iterations);
  s.anneal_factor = j.value("anneal_factor", s.anneal_factor);
  if (j.contains("mh")) {
    const auto& m = j["mh"];
    s.mh.n_kernel_reps = m.value("n_kernel_reps", s.mh.n_kernel_reps);
    s.mh.target_acceptance = m.value("target_acceptance", s.mh.target_acceptance);
    s.mh.adapt_rate = m.value("adapt_rate", s.mh.adapt_rate);
    s.mh.scale_joint = m.value("scale_joint", s.mh.scale_joint);
    s.mh.scale_component = m.value("scale_component", s.mh.scale_component);
  }
  return s;
}

json estimate_to_json(const ModelSpec& spec, const PopulationEstimate& est,
                      bool include_trace) {
  const ParamLayout layout(spec);
  json j;
  j["model"] = model_spec_to_json(spec);
  j["parameter_names"] = layout.names;
  j["theta_hat"] = params_to_json(est.theta_hat);
  j["theta_packed"] = vector_to_json(layout.pack(est.theta_hat));
  j["se"] = nullable_vector_to_json(est.se);
  json fim = json::array();
  for (Eigen::Index r = 0; r < est.fim.rows(); ++r)
    for (Eigen::Index c = 0; c < est.fim.cols(); ++c) fim.push_back(est.fim(r, c));
  j["fim"] = fim;  // row-major
  j["fim_dim"] = est.fim.rows();
  j["seed"] = est.seed;
  j["settings"] = settings_to_json(est.settings);
  if (include_trace) {
    json trace = json::array();
    for (const auto& t : est.trace) trace.push_back(vector_to_json(t));
    j["trace"] = trace;
  }
  return j;
}

PopulationEstimate estimate_from_json(const json& j, ModelSpec* spec_out) {
  const ModelSpec spec = model_spec_from_json(j.at("model"));
  if (spec_out) *spec_out = spec;
  PopulationEstimate est;
  est.theta_hat = params_from_json(j.at("theta_hat"));
  est.se = nullable_vector_from_json(j.at("se"));
  const Eigen::Index dim = j.at("fim_dim").get<Eigen::Index>();
  est.fim.resize(dim, dim);
  const auto& fim = j.at("fim");
  for (Eigen::Index r = 0; r < dim; ++r)
    for (Eigen::Index c = 0; c < dim; ++c)
      est.fim(r, c) = fim[static_cast<std::size_t>(r * dim + c)].get<double>();
  est.seed = j.at("seed").get<std::uint64_t>();
  est.settings = settings_from_json(j.at("settings"));
  if (j.contains("trace"))
    for (const auto& t : j["trace"]) est.trace.push_back(vector_from_json(t));
  return est;
}

json conditional_to_json(const ConditionalDraws& draws) {
  json j;
  j["M"] = draws.M;
  j["random_dim_names"] = draws.random_dim_names;
  json subjects = json::array();
  for (const auto& s : draws.subjects) {
    subjects.push_back({{"id", s.id},
                        {"eta", matrix_to_json(s.eta)},
                        {"log_density", vector_to_json(s.log_density)},
                        {"residuals", matrix_to_json(s.residuals)},
                        {"cond_mean", vector_to_json(s.cond_mean)},
                        {"cond_sd", vector_to_json(s.cond_sd)},
                        {"acceptance", s.acceptance},
                        {"thin", s.thin}});
  }
  j["subjects"] = subjects;
  return j;
}

ConditionalDraws conditional_from_json(const json& j) {
  ConditionalDraws draws;
  draws.M = j.at("M").get<int>();
  draws.random_dim_names =
      j.at("random_dim_names").get<std::vector<std::string>>();
  for (const auto& s : j.at("subjects")) {
    SubjectDraws sd;
    sd.id = s.at("id").get<std::string>();
    sd.eta = matrix_from_json(s.at("eta"));
    if (sd.eta.size() == 0)
      sd.eta.resize(draws.M, static_cast<Eigen::Index>(draws.random_dim_names.size()));
    sd.log_density = vector_from_json(s.at("log_density"));
    sd.residuals = matrix_from_json(s.at("residuals"));
    sd.cond_mean = vector_from_json(s.at("cond_mean"));
    sd.cond_sd = vector_from_json(s.at("cond_sd"));
    sd.acceptance = s.at("acceptance").get<double>();
    sd.thin = s.at("thin").get<int>();
    draws.subjects.push_back(std::move(sd));
  }
  draws.validate();
  return draws;
}

namespace {

// Group consecutive subjects sharing a label and dose vector.
json design_groups_to_json(const Design& design) {
  json groups = json::array();
  std::size_t i = 0;
  while (i < design.subjects.size()) {
    const auto& first = design.subjects[i];
    std::size_t count = 1;
    while (i + count < design.subjects.size() &&
           design.subjects[i + count].group == first.group &&
           design.subjects[i + count].x == first.x)
      ++count;
    groups.push_back({{"label", first.group},
                      {"n", count},
                      {"doses", first.x}});
    i += count;
  }
  return groups;
}

Design design_from_groups_json(const json& groups) {
  Design design;
  int id = 0;
  for (const auto& g : groups) {
    const int n = g.at("n").get<int>();
    const auto doses = g.at("doses").get<std::vector<double>>();
    const std::string label = g.value("label", std::string());
    for (int s = 0; s < n; ++s) {
      SubjectDesign sd;
      sd.id = std::to_string(++id);
      sd.x = doses;
      sd.group = label;
      design.subjects.push_back(std::move(sd));
    }
  }
  return design;
}

}  // namespace

json scenario_to_json(const ScenarioSpec& scenario) {
  json j;
  j["name"] = scenario.name;
  j["model"] = model_spec_to_json(scenario.model);
  j["theta"] = params_to_json(scenario.theta_true);
  j["design"] = {{"groups", design_groups_to_json(scenario.design)}};
  j["K"] = scenario.K;
  j["B"] = scenario.B;
  j["M"] = scenario.M;
  j["methods"] = scenario.methods;
  j["alphas"] = scenario.alphas;
  j["fit"] = settings_to_json(scenario.fit);
  return j;
}

ScenarioSpec scenario_from_json(const json& j) {
  ScenarioSpec s;
  s.name = j.at("name").get<std::string>();
  s.model = j.contains("model") ? model_spec_from_json(j["model"])
                                : ModelSpec::sig_emax();
  s.theta_true = params_from_json(j.at("theta"));
  s.design = design_from_groups_json(j.at("design").at("groups"));
  s.K = j.value("K", s.K);
  s.B = j.value("B", s.B);
  s.M = j.value("M", s.M);
  if (j.contains("methods")) s.methods = j["methods"].get<std::vector<std::string>>();
  if (j.contains("alphas")) s.alphas = j["alphas"].get<std::vector<double>>();
  if (j.contains("fit")) s.fit = settings_from_json(j["fit"]);
  s.validate();
  return s;
}

json replicate_to_json(const ReplicateRecord& record) {
  json j;
  j["k"] = record.k;
  j["fit_ok"] = record.fit_ok;
  j["message"] = record.message;
  j["theta_hat"] = vector_to_json(record.theta_hat);
  json methods = json::array();
  for (const auto& m : record.methods) {
    json cis = json::array();
    for (const auto& [alpha, intervals] : m.cis) {
      json arr = json::array();
      for (const auto& ci : intervals) {
        if (ci.available)
          arr.push_back(json::array({ci.lo, ci.hi}));
        else
          arr.push_back(nullptr);
      }
      cis.push_back({{"alpha", alpha}, {"intervals", arr}});
    }
    methods.push_back({{"method", m.method},
                       {"estimate", nullable_vector_to_json(m.estimate)},
                       {"se", nullable_vector_to_json(m.se)},
                       {"n_boot_success", m.n_boot_success},
                       {"n_boot_failed", m.n_boot_failed},
                       {"cis", cis}});
  }
  j["methods"] = methods;
  return j;
}

ReplicateRecord replicate_from_json(const json& j) {
  ReplicateRecord record;
  record.k = j.at("k").get<int>();
  record.fit_ok = j.at("fit_ok").get<bool>();
  record.message = j.value("message", std::string());
  record.theta_hat = vector_from_json(j.at("theta_hat"));
  for (const auto& m : j.at("methods")) {
    MethodResult mr;
    mr.method = m.at("method").get<std::string>();
    mr.estimate = nullable_vector_from_json(m.at("estimate"));
    mr.se = nullable_vector_from_json(m.at("se"));
    mr.n_boot_success = m.value("n_boot_success", 0);
    mr.n_boot_failed = m.value("n_boot_failed", 0);
    for (const auto& entry : m.at("cis")) {
      const double alpha = entry.at("alpha").get<double>();
      std::vector<Interval> intervals;
      for (const auto& ci : entry.at("intervals")) {
        Interval iv;
        if (!ci.is_null()) {
          iv.lo = ci[0].get<double>();
          iv.hi = ci[1].get<double>();
          iv.available = true;
        }
        intervals.push_back(iv);
      }
      mr.cis[alpha] = std::move(intervals);
    }
    record.methods.push_back(std::move(mr));
  }
  return record;
}

json summary_to_json(const BootstrapSummary& summary) {
  json params;
  for (std::size_t p = 0; p < summary.parameter_names.size(); ++p) {
    const auto& s = summary.parameters[p];
    json entry = {{"mean", s.mean}, {"se", s.se}};
    entry["ci90"] =
        s.ci90.available ? json::array({s.ci90.lo, s.ci90.hi}) : json(nullptr);
    entry["ci95"] =
        s.ci95.available ? json::array({s.ci95.lo, s.ci95.hi}) : json(nullptr);
    params[summary.parameter_names[p]] = entry;
  }
  return {{"scheme", scheme_name(summary.scheme)},
          {"n_success", summary.n_success},
          {"n_failed", summary.n_failed},
          {"unreliable", summary.unreliable},
          {"parameters", params}};
}

std::string bootstrap_csv(const BootstrapRun& run) {
  std::ostringstream out;
  out << "replicate,status";
  for (const auto& name : run.parameter_names) out << ',' << name;
  out << '\n';
  for (std::size_t b = 0; b < run.replicates.size(); ++b) {
    const auto& rep = run.replicates[b];
    out << (b + 1) << ','
        << (rep.status == ReplicateFit::Status::Ok ? "ok" : "failed");
    for (std::size_t p = 0; p < run.parameter_names.size(); ++p) {
      out << ',';
      if (rep.status == ReplicateFit::Status::Ok)
        out << format_g6(rep.theta(static_cast<Eigen::Index>(p)));
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace nlmemboot
