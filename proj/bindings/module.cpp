#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nlmemboot/bootstrap.hpp"
#include "nlmemboot/conditional.hpp"
#include "nlmemboot/fim.hpp"
#include "nlmemboot/io.hpp"
#include "nlmemboot/model.hpp"
#include "nlmemboot/rng.hpp"
#include "nlmemboot/saem.hpp"
#include "nlmemboot/scenario.hpp"
#include "nlmemboot/stats.hpp"
#include "nlmemboot/study.hpp"
#include "nlmemboot/svg_report.hpp"

namespace py = pybind11;
using namespace nlmemboot;

PYBIND11_MODULE(_core, m) {
  m.doc() = "Non-linear mixed-effects bootstrap toolkit";

  py::enum_<Structural>(m, "Structural")
      .value("Intercept", Structural::Intercept)
      .value("SigEmax", Structural::SigEmax);
  py::enum_<ErrorModel>(m, "ErrorModel")
      .value("Constant", ErrorModel::Constant)
      .value("Proportional", ErrorModel::Proportional)
      .value("Combined", ErrorModel::Combined);
  py::enum_<Transform>(m, "Transform")
      .value("Normal", Transform::Normal)
      .value("LogNormal", Transform::LogNormal)
      .value("Fixed", Transform::Fixed);
  py::enum_<Scheme>(m, "Scheme")
      .value("Case", Scheme::Case)
      .value("Par", Scheme::Par)
      .value("NP", Scheme::NP)
      .value("CNP", Scheme::CNP);
  py::enum_<CnpResidualPool>(m, "CnpResidualPool")
      .value("PerSubject", CnpResidualPool::PerSubject)
      .value("Global", CnpResidualPool::Global);
  py::enum_<CnpEtaDraw>(m, "CnpEtaDraw")
      .value("SubjectThenSample", CnpEtaDraw::SubjectThenSample)
      .value("PooledFlat", CnpEtaDraw::PooledFlat);
  py::enum_<EvdForm>(m, "EvdForm")
      .value("CovarianceMatching", EvdForm::CovarianceMatching)
      .value("LiteralAppendix", EvdForm::LiteralAppendix);
  py::enum_<EbeMode>(m, "EbeMode")
      .value("Mean", EbeMode::Mean)
      .value("Mode", EbeMode::Mode);

  py::class_<Rng>(m, "Rng")
      .def(py::init<std::uint64_t>(), py::arg("seed") = 0)
      .def("split", py::overload_cast<std::uint64_t>(&Rng::split, py::const_))
      .def("uniform", &Rng::uniform)
      .def("normal", &Rng::normal);

  py::class_<ModelSpec>(m, "ModelSpec")
      .def_static("sig_emax", &ModelSpec::sig_emax,
                  py::arg("error") = ErrorModel::Proportional)
      .def_static("intercept", &ModelSpec::intercept, py::arg("transform"),
                  py::arg("random_effect") = true,
                  py::arg("error") = ErrorModel::Constant)
      .def_readwrite("structural", &ModelSpec::structural)
      .def_readwrite("error_model", &ModelSpec::error_model)
      .def("param_names", &ModelSpec::param_names)
      .def("n_params", &ModelSpec::n_params)
      .def("n_random", &ModelSpec::n_random);

  py::class_<PopulationParams>(m, "PopulationParams")
      .def(py::init<>())
      .def_readwrite("mu", &PopulationParams::mu)
      .def_readwrite("omega", &PopulationParams::omega)
      .def_readwrite("sigma", &PopulationParams::sigma);

  py::class_<SubjectDesign>(m, "SubjectDesign")
      .def(py::init<>())
      .def_readwrite("id", &SubjectDesign::id)
      .def_readwrite("x", &SubjectDesign::x)
      .def_readwrite("group", &SubjectDesign::group);

  py::class_<Design>(m, "Design")
      .def(py::init<>())
      .def_readwrite("subjects", &Design::subjects)
      .def("n_subjects", &Design::n_subjects)
      .def("n_observations", &Design::n_observations);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("design", &Dataset::design)
      .def_readwrite("y", &Dataset::y)
      .def_readonly("simulated", &Dataset::simulated)
      .def_readonly("seed", &Dataset::seed);

  py::class_<ParamLayout>(m, "ParamLayout")
      .def(py::init<const ModelSpec&>())
      .def_readonly("names", &ParamLayout::names)
      .def("pack", &ParamLayout::pack)
      .def("unpack", &ParamLayout::unpack);

  py::class_<Interval>(m, "Interval")
      .def_readonly("lo", &Interval::lo)
      .def_readonly("hi", &Interval::hi)
      .def_readonly("available", &Interval::available)
      .def("contains", &Interval::contains);

  m.def("evaluate_structural", &evaluate_structural);
  m.def("evaluate_error_sd", &evaluate_error_sd);
  m.def("transform_psi", &transform_psi);
  m.def("simulate_dataset", &simulate_dataset);

  py::class_<MhSettings>(m, "MhSettings")
      .def(py::init<>())
      .def_readwrite("n_kernel_reps", &MhSettings::n_kernel_reps)
      .def_readwrite("target_acceptance", &MhSettings::target_acceptance);

  py::class_<SaemSettings>(m, "SaemSettings")
      .def(py::init<>())
      .def_readwrite("n_burn", &SaemSettings::n_burn)
      .def_readwrite("n_explore", &SaemSettings::n_explore)
      .def_readwrite("n_smooth", &SaemSettings::n_smooth)
      .def_readwrite("n_chains", &SaemSettings::n_chains)
      .def_readwrite("seed", &SaemSettings::seed)
      .def_readwrite("mh", &SaemSettings::mh)
      .def_readwrite("sigma_floor", &SaemSettings::sigma_floor)
      .def_readwrite("omega_floor", &SaemSettings::omega_floor)
      .def_readwrite("anneal_iterations", &SaemSettings::anneal_iterations)
      .def_readwrite("anneal_factor", &SaemSettings::anneal_factor)
      .def_readwrite("compute_se", &SaemSettings::compute_se)
      .def_readwrite("record_trace", &SaemSettings::record_trace);

  py::class_<PopulationEstimate>(m, "PopulationEstimate")
      .def_readonly("theta_hat", &PopulationEstimate::theta_hat)
      .def_readonly("se", &PopulationEstimate::se)
      .def_readonly("fim", &PopulationEstimate::fim)
      .def_readonly("trace", &PopulationEstimate::trace)
      .def_readonly("seed", &PopulationEstimate::seed);

  m.def("fit_saem", &fit_saem, py::arg("spec"), py::arg("data"), py::arg("init"),
        py::arg("settings") = SaemSettings());

  py::class_<ConditionalSettings>(m, "ConditionalSettings")
      .def(py::init<>())
      .def_readwrite("burn_in", &ConditionalSettings::burn_in)
      .def_readwrite("pilot", &ConditionalSettings::pilot);

  py::class_<SubjectDraws>(m, "SubjectDraws")
      .def_readonly("id", &SubjectDraws::id)
      .def_readonly("eta", &SubjectDraws::eta)
      .def_readonly("log_density", &SubjectDraws::log_density)
      .def_readonly("residuals", &SubjectDraws::residuals)
      .def_readonly("cond_mean", &SubjectDraws::cond_mean)
      .def_readonly("cond_sd", &SubjectDraws::cond_sd)
      .def_readonly("acceptance", &SubjectDraws::acceptance)
      .def_readonly("thin", &SubjectDraws::thin);

  py::class_<ConditionalDraws>(m, "ConditionalDraws")
      .def_readonly("M", &ConditionalDraws::M)
      .def_readonly("random_dim_names", &ConditionalDraws::random_dim_names)
      .def_readonly("subjects", &ConditionalDraws::subjects);

  m.def("sample_conditional", &sample_conditional, py::arg("spec"), py::arg("data"),
        py::arg("theta_hat"), py::arg("M"),
        py::arg("settings") = ConditionalSettings(), py::arg("seed") = 0);
  m.def("compute_ebe", &compute_ebe);

  py::class_<FimResult>(m, "FimResult")
      .def_readonly("fim", &FimResult::fim)
      .def_readonly("se", &FimResult::se);
  m.def("compute_fim", &compute_fim);
  m.def("asymptotic_ci", &asymptotic_ci);

  py::class_<BootstrapConfig>(m, "BootstrapConfig")
      .def(py::init<>())
      .def_readwrite("scheme", &BootstrapConfig::scheme)
      .def_readwrite("B", &BootstrapConfig::B)
      .def_readwrite("stratify_by", &BootstrapConfig::stratify_by)
      .def_readwrite("cnp_residual_pool", &BootstrapConfig::cnp_residual_pool)
      .def_readwrite("cnp_eta_draw", &BootstrapConfig::cnp_eta_draw)
      .def_readwrite("M", &BootstrapConfig::M)
      .def_readwrite("seed", &BootstrapConfig::seed);

  py::class_<ReplicateFit>(m, "ReplicateFit")
      .def_property_readonly("ok",
                             [](const ReplicateFit& r) {
                               return r.status == ReplicateFit::Status::Ok;
                             })
      .def_readonly("message", &ReplicateFit::message)
      .def_readonly("theta", &ReplicateFit::theta);

  py::class_<BootstrapRun>(m, "BootstrapRun")
      .def_readonly("parameter_names", &BootstrapRun::parameter_names)
      .def_readonly("replicates", &BootstrapRun::replicates)
      .def("n_success", &BootstrapRun::n_success)
      .def("n_failed", &BootstrapRun::n_failed)
      .def("unreliable", &BootstrapRun::unreliable)
      .def("parameter_values", &BootstrapRun::parameter_values);

  py::class_<ParameterSummary>(m, "ParameterSummary")
      .def_readonly("mean", &ParameterSummary::mean)
      .def_readonly("se", &ParameterSummary::se)
      .def_readonly("ci90", &ParameterSummary::ci90)
      .def_readonly("ci95", &ParameterSummary::ci95);

  py::class_<BootstrapSummary>(m, "BootstrapSummary")
      .def_readonly("n_success", &BootstrapSummary::n_success)
      .def_readonly("n_failed", &BootstrapSummary::n_failed)
      .def_readonly("unreliable", &BootstrapSummary::unreliable)
      .def_readonly("parameter_names", &BootstrapSummary::parameter_names)
      .def_readonly("parameters", &BootstrapSummary::parameters);

  m.def("resample_case", &resample_case);
  m.def("resample_parametric", &resample_parametric);
  m.def(
      "correct_random_effects_evd",
      [](const Eigen::MatrixXd& ebe, const Eigen::MatrixXd& omega, EvdForm form) {
        const auto r = correct_random_effects_evd(ebe, omega, form);
        return py::make_tuple(r.corrected, r.diagonal_fallback);
      },
      py::arg("ebe"), py::arg("omega_hat"),
      py::arg("form") = EvdForm::CovarianceMatching);
  m.def("correct_residuals", &correct_residuals);
  m.def("ebe_residuals", &ebe_residuals);
  m.def("resample_nonparametric", &resample_nonparametric, py::arg("spec"),
        py::arg("theta_hat"), py::arg("ebe"), py::arg("residuals"),
        py::arg("design"), py::arg("rng"),
        py::arg("form") = EvdForm::CovarianceMatching);
  m.def("resample_conditional_np", &resample_conditional_np);
  m.def(
      "run_bootstrap",
      [](const ModelSpec& spec, const Dataset& data,
         const PopulationEstimate& estimate, const ConditionalDraws* conditional,
         const BootstrapConfig& config, const SaemSettings& fit_settings,
         int parallelism) {
        return run_bootstrap(spec, data, estimate, conditional, config,
                             fit_settings, parallelism);
      },
      py::arg("spec"), py::arg("data"), py::arg("estimate"),
      py::arg("conditional") = nullptr, py::arg("config") = BootstrapConfig(),
      py::arg("fit_settings") = SaemSettings(), py::arg("parallelism") = 1);
  m.def("percentile_ci", &percentile_ci);
  m.def("summarize_run", &summarize_run);

  py::class_<ScenarioSpec>(m, "ScenarioSpec")
      .def_readwrite("name", &ScenarioSpec::name)
      .def_readwrite("model", &ScenarioSpec::model)
      .def_readwrite("theta_true", &ScenarioSpec::theta_true)
      .def_readwrite("design", &ScenarioSpec::design)
      .def_readwrite("K", &ScenarioSpec::K)
      .def_readwrite("B", &ScenarioSpec::B)
      .def_readwrite("M", &ScenarioSpec::M)
      .def_readwrite("methods", &ScenarioSpec::methods)
      .def_readwrite("alphas", &ScenarioSpec::alphas)
      .def_readwrite("fit", &ScenarioSpec::fit);
  m.def("scenario_preset", &scenario_preset);
  m.def("scenario_catalog", &scenario_catalog);

  py::class_<CoverageRow>(m, "CoverageRow")
      .def_readonly("scenario", &CoverageRow::scenario)
      .def_readonly("method", &CoverageRow::method)
      .def_readonly("parameter", &CoverageRow::parameter)
      .def_readonly("alpha", &CoverageRow::alpha)
      .def_readonly("coverage", &CoverageRow::coverage)
      .def_readonly("mc_se", &CoverageRow::mc_se)
      .def_readonly("k_available", &CoverageRow::k_available);

  py::class_<BiasRow>(m, "BiasRow")
      .def_readonly("method", &BiasRow::method)
      .def_readonly("parameter", &BiasRow::parameter)
      .def_readonly("rb_param_pct", &BiasRow::rb_param_pct)
      .def_readonly("rb_se_pct", &BiasRow::rb_se_pct)
      .def_readonly("se_empirical", &BiasRow::se_empirical);

  py::class_<CoverageReport>(m, "CoverageReport")
      .def_readonly("scenario_name", &CoverageReport::scenario_name)
      .def_readonly("parameter_names", &CoverageReport::parameter_names)
      .def_readonly("coverage", &CoverageReport::coverage)
      .def_readonly("bias", &CoverageReport::bias)
      .def_readonly("n_failed_fits", &CoverageReport::n_failed_fits)
      .def_readonly("flagged", &CoverageReport::flagged);

  m.def("run_study", &run_study, py::arg("scenario"), py::arg("master_seed"),
        py::arg("parallelism") = 1, py::arg("persist_dir") = "");
  m.def("coverage_rate", &coverage_rate);
  m.def("mc_se", &mc_se);
  m.def("relative_bias_params", &relative_bias_params);
  m.def("empirical_se", &empirical_se);
  m.def("relative_bias_se", &relative_bias_se);
  m.def("coverage_csv", &coverage_csv);
  m.def("bias_csv", &bias_csv);
  m.def("coverage_svg", &coverage_svg);

  m.def("quantile_type7", &quantile_type7);
  m.def("normal_quantile", &normal_quantile);
  m.def("dataset_csv", &dataset_csv);
  m.def("parse_dataset_csv", &parse_dataset_csv);
}
