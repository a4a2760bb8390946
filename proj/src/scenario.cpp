#include "nlmemboot/scenario.hpp"

#include <algorithm>

#include "nlmemboot/errors.hpp"

namespace nlmemboot {

void ScenarioSpec::validate() const {
  model.validate();
  theta_true.validate(model);
  design.validate();
  if (K < 1 || B < 1 || M < 1)
    throw InvalidInputError("scenario needs K >= 1, B >= 1, M >= 1");
  if (methods.empty()) throw InvalidInputError("scenario has no methods");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0))
      throw InvalidInputError("alpha levels must be in (0, 1)");
}

namespace {

struct GroupDef {
  std::string label;
  int n = 0;
  std::vector<double> doses;
};

Design design_from_groups(const std::vector<GroupDef>& groups) {
  Design design;
  int id = 0;
  for (const auto& g : groups)
    for (int s = 0; s < g.n; ++s) {
      SubjectDesign sd;
      sd.id = std::to_string(++id);
      sd.x = g.doses;
      sd.group = g.label;
      design.subjects.push_back(std::move(sd));
    }
  return design;
}

PopulationParams table_theta(double gamma, double sigma) {
  PopulationParams theta;
  theta.mu.resize(4);
  theta.mu << 5.0, 30.0, 500.0, gamma;
  theta.omega.resize(3, 3);
  theta.omega << 0.09, 0.0, 0.0,
                 0.0, 0.49, 0.245,
                 0.0, 0.245, 0.49;
  theta.sigma.resize(1);
  theta.sigma << sigma;
  return theta;
}

const std::vector<double> kFullDoseSet = {0, 100, 300, 500, 750, 1000};

std::vector<GroupDef> design_groups(const std::string& base) {
  if (base == "rich") return {{"", 100, {0, 100, 300, 1000}}};
  if (base == "sparse")
    return {{"g1", 50, {0, 1000}},
            {"g2", 50, {100, 1000}},
            {"g3", 50, {0, 300}},
            {"g4", 50, {100, 300}}};
  // Unbalanced designs: 5 groups of 20 with 2..6 doses; dose subsets follow
  // the low-only / high-only / mixed descriptions and are overridable via
  // scenario files.
  if (base == "unb_low")
    return {{"g1", 20, {0, 100}},
            {"g2", 20, {0, 100, 300}},
            {"g3", 20, {0, 100, 300, 500}},
            {"g4", 20, {0, 100, 300, 500, 750}},
            {"g5", 20, kFullDoseSet}};
  if (base == "unb_high")
    return {{"g1", 20, {750, 1000}},
            {"g2", 20, {500, 750, 1000}},
            {"g3", 20, {300, 500, 750, 1000}},
            {"g4", 20, {100, 300, 500, 750, 1000}},
            {"g5", 20, kFullDoseSet}};
  if (base == "unb_mix")
    return {{"g1", 20, {0, 1000}},
            {"g2", 20, {0, 300, 1000}},
            {"g3", 20, {0, 100, 750, 1000}},
            {"g4", 20, {0, 100, 300, 750, 1000}},
            {"g5", 20, kFullDoseSet}};
  // 80 subjects on sparse dose pairs plus 20 subjects on the full set.
  if (base == "unb_sparserich")
    return {{"g1", 20, {0, 1000}},
            {"g2", 20, {100, 1000}},
            {"g3", 20, {0, 300}},
            {"g4", 20, {100, 300}},
            {"g5", 20, kFullDoseSet}};
  throw InvalidInputError("unknown design: " + base);
}

}  // namespace

ScenarioSpec scenario_preset(const std::string& name) {
  std::string base = name;
  double sigma = 0.1;
  if (base.size() > 8 && base.substr(base.size() - 8) == "_sigma03") {
    sigma = 0.3;
    base = base.substr(0, base.size() - 8);
  } else if (base.size() > 8 && base.substr(base.size() - 8) == "_sigma05") {
    sigma = 0.5;
    base = base.substr(0, base.size() - 8);
  }

  double gamma;
  if (base.size() > 5 && base.substr(base.size() - 5) == "_emax") {
    gamma = 1.0;
    base = base.substr(0, base.size() - 5);
  } else if (base.size() > 5 && base.substr(base.size() - 5) == "_hill") {
    gamma = 3.0;
    base = base.substr(0, base.size() - 5);
  } else {
    throw InvalidInputError("unknown scenario: " + name);
  }
  if (sigma != 0.1 && base != "rich" && base != "sparse")
    throw InvalidInputError("unknown scenario: " + name);

  ScenarioSpec scenario;
  scenario.name = name;
  scenario.model = ModelSpec::sig_emax();
  scenario.theta_true = table_theta(gamma, sigma);
  scenario.design = design_from_groups(design_groups(base));
  scenario.validate();
  return scenario;
}

std::vector<std::string> scenario_catalog() {
  std::vector<std::string> names;
  for (const std::string base :
       {"rich", "sparse", "unb_low", "unb_high", "unb_mix", "unb_sparserich"})
    for (const std::string model : {"_emax", "_hill"})
      names.push_back(base + model);
  for (const std::string base : {"rich", "sparse"})
    for (const std::string model : {"_emax", "_hill"})
      for (const std::string err : {"_sigma03", "_sigma05"})
        names.push_back(base + model + err);
  std::sort(names.begin(), names.end());
  return names;
}

}  // namespace nlmemboot
