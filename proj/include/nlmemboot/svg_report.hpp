#pragma once

#include <string>

#include "nlmemboot/study.hpp"

namespace nlmemboot {

/// Static coverage figure for one confidence level: one point per
/// (parameter, method) with an MC.SE error bar, method series jittered on the
/// x axis and colored individually, dashed band lines at (1-alpha) +- 0.05.
std::string coverage_svg(const CoverageReport& report, double alpha);

}  // namespace nlmemboot
