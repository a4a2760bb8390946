#include "nlmemboot/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "nlmemboot/errors.hpp"
#include "nlmemboot/stats.hpp"

namespace nlmemboot {

namespace {

int structural_n_params(Structural m) {
  switch (m) {
    case Structural::Intercept: return 1;
    case Structural::SigEmax: return 4;
  }
  throw InvalidInputError("unknown structural model");
}

std::vector<std::string> structural_param_names(Structural m) {
  switch (m) {
    case Structural::Intercept: return {"mu"};
    case Structural::SigEmax: return {"E0", "Emax", "ED50", "gamma"};
  }
  throw InvalidInputError("unknown structural model");
}

}  // namespace

int ModelSpec::n_params() const { return structural_n_params(structural); }

std::vector<std::string> ModelSpec::param_names() const {
  return structural_param_names(structural);
}

std::vector<int> ModelSpec::random_dims() const {
  std::vector<int> dims;
  for (int p = 0; p < n_params(); ++p)
    if (omega_pattern(p, p)) dims.push_back(p);
  return dims;
}

std::vector<std::string> ModelSpec::sigma_names() const {
  if (error_model == ErrorModel::Combined) return {"sigma_a", "sigma_b"};
  return {"sigma"};
}

void ModelSpec::validate() const {
  const int n = n_params();
  if (static_cast<int>(transforms.size()) != n)
    throw InvalidInputError("transforms size does not match parameter count");
  if (omega_pattern.rows() != n || omega_pattern.cols() != n)
    throw InvalidInputError("omega_pattern must be n_params x n_params");
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) {
      if (omega_pattern(p, q) != omega_pattern(q, p))
        throw InvalidInputError("omega_pattern must be symmetric");
      if (p != q && omega_pattern(p, q) &&
          !(omega_pattern(p, p) && omega_pattern(q, q)))
        throw InvalidInputError(
            "estimated covariance requires both variances estimated");
    }
    if (transforms[p] == Transform::Fixed && omega_pattern(p, p))
      throw InvalidInputError("Fixed-transform parameter cannot have a random effect");
  }
}

ModelSpec ModelSpec::sig_emax(ErrorModel error) {
  ModelSpec spec;
  spec.structural = Structural::SigEmax;
  spec.error_model = error;
  spec.transforms = {Transform::LogNormal, Transform::LogNormal,
                     Transform::LogNormal, Transform::Fixed};
  spec.omega_pattern.setConstant(4, 4, false);
  for (int p = 0; p < 3; ++p) spec.omega_pattern(p, p) = true;
  spec.omega_pattern(1, 2) = spec.omega_pattern(2, 1) = true;  // cov(Emax, ED50)
  spec.validate();
  return spec;
}

ModelSpec ModelSpec::intercept(Transform transform, bool random_effect,
                               ErrorModel error) {
  ModelSpec spec;
  spec.structural = Structural::Intercept;
  spec.error_model = error;
  spec.transforms = {transform};
  spec.omega_pattern.setConstant(1, 1, random_effect);
  spec.validate();
  return spec;
}

void PopulationParams::validate(const ModelSpec& spec) const {
  if (mu.size() != spec.n_params())
    throw InvalidInputError("mu size does not match parameter count");
  if (!mu.allFinite()) throw InvalidInputError("mu has non-finite entries");
  const int nr = spec.n_random();
  if (omega.rows() != nr || omega.cols() != nr)
    throw InvalidInputError("omega size does not match random-effect count");
  if (!omega.allFinite()) throw InvalidInputError("omega has non-finite entries");
  if (!is_psd(omega)) throw InvalidInputError("omega is not positive semidefinite");
  if (sigma.size() != spec.n_sigma())
    throw InvalidInputError("sigma size does not match error model");
  if (!sigma.allFinite() || (sigma.array() < 0.0).any())
    throw InvalidInputError("sigma must be finite and non-negative");
  const auto& names = spec.param_names();
  for (int p = 0; p < spec.n_params(); ++p)
    if (spec.transforms[p] == Transform::LogNormal && mu(p) <= 0.0)
      throw InvalidInputError("log-normal parameter " + names[p] +
                              " requires a positive fixed effect");
}

int Design::n_observations() const {
  int n = 0;
  for (const auto& s : subjects) n += static_cast<int>(s.x.size());
  return n;
}

void Design::validate() const {
  if (subjects.empty()) throw InvalidInputError("design has no subjects");
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    if (s.id.empty()) throw InvalidInputError("subject with empty id");
    if (!ids.insert(s.id).second)
      throw InvalidInputError("duplicate subject id: " + s.id);
    if (s.x.empty())
      throw InvalidInputError("subject " + s.id + " has no design points");
    for (double v : s.x)
      if (!(v >= 0.0) || !std::isfinite(v))
        throw InvalidInputError("subject " + s.id + " has an invalid dose");
  }
}

bool Design::operator==(const Design& other) const {
  if (subjects.size() != other.subjects.size()) return false;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].id != other.subjects[i].id) return false;
    if (subjects[i].group != other.subjects[i].group) return false;
    if (subjects[i].x != other.subjects[i].x) return false;
  }
  return true;
}

void Dataset::validate() const {
  design.validate();
  if (y.size() != design.subjects.size())
    throw InvalidInputError("observation rows do not match subject count");
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i].size() != design.subjects[i].x.size())
      throw InvalidInputError("subject " + design.subjects[i].id +
                              " has mismatched observation count");
    for (double v : y[i])
      if (!std::isfinite(v))
        throw InvalidInputError("subject " + design.subjects[i].id +
                                " has a non-finite observation");
  }
}

ParamLayout::ParamLayout(const ModelSpec& spec) : spec_(spec) {
  spec.validate();
  const auto pnames = spec.param_names();
  for (const auto& n : pnames) names.push_back(n);
  n_fixed = spec.n_params();

  const auto dims = spec.random_dims();
  for (std::size_t d = 0; d < dims.size(); ++d) {
    names.push_back("omega2_" + pnames[dims[d]]);
    omega_entries_.emplace_back(static_cast<int>(d), static_cast<int>(d));
  }
  for (std::size_t d = 0; d < dims.size(); ++d) {
    for (std::size_t e = d + 1; e < dims.size(); ++e) {
      if (spec.omega_pattern(dims[d], dims[e])) {
        names.push_back("cov_" + pnames[dims[d]] + "_" + pnames[dims[e]]);
        omega_entries_.emplace_back(static_cast<int>(d), static_cast<int>(e));
      }
    }
  }
  for (const auto& n : spec.sigma_names()) names.push_back(n);
  n_variance = static_cast<int>(names.size()) - n_fixed;
}

Eigen::VectorXd ParamLayout::pack(const PopulationParams& p) const {
  Eigen::VectorXd v(size());
  v.head(n_fixed) = p.mu;
  int k = n_fixed;
  for (const auto& [r, c] : omega_entries_) v(k++) = p.omega(r, c);
  v.tail(p.sigma.size()) = p.sigma;
  return v;
}

PopulationParams ParamLayout::unpack(const Eigen::VectorXd& v) const {
  if (v.size() != size())
    throw InvalidInputError("packed parameter vector has wrong length");
  PopulationParams p;
  p.mu = v.head(n_fixed);
  const int nr = spec_.n_random();
  p.omega = Eigen::MatrixXd::Zero(nr, nr);
  int k = n_fixed;
  for (const auto& [r, c] : omega_entries_) {
    p.omega(r, c) = v(k);
    p.omega(c, r) = v(k);
    ++k;
  }
  p.sigma = v.tail(spec_.n_sigma());
  return p;
}

int ParamLayout::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

double evaluate_structural(Structural model, const Eigen::VectorXd& psi, double x) {
  if (!psi.allFinite() || !std::isfinite(x))
    throw InvalidInputError("non-finite structural input");
  switch (model) {
    case Structural::Intercept:
      return psi(0);
    case Structural::SigEmax: {
      if (psi.size() != 4) throw InvalidInputError("SigEmax needs 4 parameters");
      const double e0 = psi(0), emax = psi(1), ed50 = psi(2), gamma = psi(3);
      if (!(x >= 0.0)) throw InvalidInputError("dose must be non-negative");
      if (!(ed50 > 0.0)) throw InvalidInputError("ED50 must be positive");
      if (!(gamma > 0.0)) throw InvalidInputError("gamma must be positive");
      if (x == 0.0) return e0;  // 0^gamma = 0
      const double xg = std::pow(x, gamma);
      const double dg = std::pow(ed50, gamma);
      const double f = e0 + emax * xg / (xg + dg);
      if (!std::isfinite(f)) throw InvalidInputError("non-finite structural value");
      return f;
    }
  }
  throw InvalidInputError("unknown structural model");
}

double evaluate_error_sd(ErrorModel model, const Eigen::VectorXd& sigma, double f) {
  if (!sigma.allFinite() || (sigma.array() < 0.0).any())
    throw InvalidInputError("sigma must be finite and non-negative");
  switch (model) {
    case ErrorModel::Constant:
      if (sigma.size() != 1) throw InvalidInputError("constant error needs 1 coefficient");
      return sigma(0);
    case ErrorModel::Proportional:
      if (sigma.size() != 1) throw InvalidInputError("proportional error needs 1 coefficient");
      return sigma(0) * std::abs(f);
    case ErrorModel::Combined:
      if (sigma.size() != 2) throw InvalidInputError("combined error needs 2 coefficients");
      return sigma(0) + sigma(1) * std::abs(f);
  }
  throw InvalidInputError("unknown error model");
}

Eigen::VectorXd transform_psi(const ModelSpec& spec, const Eigen::VectorXd& mu,
                              const Eigen::VectorXd& eta) {
  const auto dims = spec.random_dims();
  if (eta.size() != static_cast<Eigen::Index>(dims.size()))
    throw InvalidInputError("eta size does not match random-effect count");
  Eigen::VectorXd psi = mu;
  for (std::size_t d = 0; d < dims.size(); ++d) {
    const int p = dims[d];
    switch (spec.transforms[p]) {
      case Transform::LogNormal: psi(p) = mu(p) * std::exp(eta(d)); break;
      case Transform::Normal: psi(p) = mu(p) + eta(d); break;
      case Transform::Fixed: break;
    }
  }
  return psi;
}

Dataset simulate_dataset(const ModelSpec& spec, const PopulationParams& theta,
                         const Design& design, std::uint64_t seed) {
  spec.validate();
  theta.validate(spec);
  design.validate();

  const Eigen::MatrixXd omega_factor = psd_sqrt_factor(theta.omega);
  const Rng base = Rng(seed).split("simulate");

  Dataset data;
  data.design = design;
  data.y.resize(design.subjects.size());
  data.simulated = true;
  data.seed = seed;
  data.generating_theta = theta;

  for (std::size_t i = 0; i < design.subjects.size(); ++i) {
    const auto& subj = design.subjects[i];
    Rng stream = base.split(subj.id);
    const Eigen::VectorXd eta = omega_factor * stream.normal_vector(omega_factor.cols());
    const Eigen::VectorXd psi = transform_psi(spec, theta.mu, eta);
    auto& yi = data.y[i];
    yi.reserve(subj.x.size());
    for (double x : subj.x) {
      const double f = evaluate_structural(spec.structural, psi, x);
      const double g = evaluate_error_sd(spec.error_model, theta.sigma, f);
      yi.push_back(f + g * stream.normal());
    }
  }
  return data;
}

}  // namespace nlmemboot
