#pragma once

#include <string>
#include <vector>

#include "nlmemboot/model.hpp"
#include "nlmemboot/saem.hpp"

namespace nlmemboot {

/// One simulation-study configuration: generating model and truth, design,
/// replicate/bootstrap counts and the uncertainty methods to evaluate.
struct ScenarioSpec {
  std::string name;
  ModelSpec model;
  PopulationParams theta_true;
  Design design;
  int K = 20;
  int B = 50;
  int M = 100;  // conditional draws per subject
  std::vector<std::string> methods = {"asymptotic", "case", "par", "np", "cnp"};
  std::vector<double> alphas = {0.1, 0.05};
  SaemSettings fit;

  void validate() const;
};

/// Named presets: the rich design (100 subjects, doses 0/100/300/1000), the
/// sparse design (200 subjects, 4 dose-pair groups of 50), four unbalanced
/// designs drawn from the dose set 0/100/300/500/750/1000, and the rich and
/// sparse variants with the residual coefficient raised to 0.3 or 0.5; each
/// exists for gamma = 1 (emax) and gamma = 3 (hill).
ScenarioSpec scenario_preset(const std::string& name);

std::vector<std::string> scenario_catalog();

}  // namespace nlmemboot
