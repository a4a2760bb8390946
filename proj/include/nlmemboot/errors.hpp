#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nlmemboot {

/// Bad user-supplied value or dataset.
struct InvalidInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Inconsistent run configuration (flags, pool sizes, missing prerequisites).
struct InvalidConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Estimation did not reach a usable optimum; carries the iteration trace
/// (one packed parameter vector per iteration) for post-mortem inspection.
struct EstimationError : std::runtime_error {
  EstimationError(const std::string& msg,
                  std::vector<std::vector<double>> trace_in = {})
      : std::runtime_error(msg), trace(std::move(trace_in)) {}
  std::vector<std::vector<double>> trace;
};

/// Non-finite value produced inside a numeric routine.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// MCMC sampler stalled (no accepted move after adaptation).
struct SamplerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nlmemboot
