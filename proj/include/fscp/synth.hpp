#pragma once

#include <cstddef>
#include <cstdint>

#include "fscp/core.hpp"

namespace fscp::synth {

/// Zero-inflated frequency / exponential severity generator with ten
/// U[0, 10] predictors named X1..X10.
///
///   D = 0 with probability p_zero_mixture, otherwise D ~ Poisson(exp(0.01 X1))
///   Y = 0 if D = 0, otherwise Y ~ Exponential with mean
///       4 exp(X2) + sin(X3 X4) + 5 X5^3
///
/// X6..X10 never enter the response.
struct SynthConfig {
  std::size_t n = 10000;
  std::uint64_t seed = 1;
  double p_zero_mixture = 0.5;
  static constexpr std::size_t n_predictors = 10;
};

ClaimsDataset generate(const SynthConfig& config);

/// Conditional mean of a positive severity given the first five predictors.
double severity_mean(double x2, double x3, double x4, double x5);

/// Population share of D = 0: p + (1 - p) E[exp(-exp(0.01 X1))].
double population_zero_share(double p_zero_mixture);

/// Datasets shaped like the motor third-party liability and soybean crop
/// portfolios (same column inventory and kinds), for exercising ingestion and
/// the full pipeline when the real files are not available.
ClaimsDataset mtpl_surrogate(std::size_t n, std::uint64_t seed);
ClaimsDataset crop_surrogate(std::size_t n, std::uint64_t seed);

/// Every row has a claim: D = 1 + Poisson(0.5), and Y ~ Gamma(shape) with
/// mean exp(1 + 0.8 X1 - 0.5 X2), X1, X2 ~ U[0, 1]. A log-link gamma GLM is
/// correctly specified for Y.
ClaimsDataset gamma_design(std::size_t n, std::uint64_t seed, double shape = 2.0);

}  // namespace fscp::synth
