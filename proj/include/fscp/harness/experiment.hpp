#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "fscp/conformal.hpp"
#include "fscp/core.hpp"
#include "fscp/harness/config.hpp"
#include "fscp/harness/report.hpp"

namespace fscp::harness {

/// Seed of replication r: the master seed for r = 0, a derived stream after.
std::uint64_t replication_seed(std::uint64_t seed, std::size_t replication);

/// Dataset named by the config; synthetic and surrogate sources use `seed`.
ClaimsDataset load_dataset(const ExperimentConfig& config, std::uint64_t seed);

// ---- parametric bootstrap baseline ----------------------------------------

struct BootstrapConfig {
  std::size_t n_boot = 1000;
  std::uint64_t seed = 1;
  conformal::ModelChoice frequency = conformal::ModelChoice::forest;
  models::ForestConfig frequency_forest;
  models::GlmConfig glm;
};

struct BootstrapResult {
  std::vector<PredictionInterval> intervals;  // one per test row
  double dispersion = 0.0;
  double shape = 0.0;
};

/// Type 7 sample quantile (linear interpolation between order statistics).
double sample_quantile(std::vector<double> values, double p);

/// Frequency model and gamma severity GLM fit on the training rows; for each
/// test row, n_boot draws from Gamma(shape 1/phi, mean psi(x, mu(x))) give
/// the alpha/2 and 1 - alpha/2 sample quantiles as the interval.
BootstrapResult bootstrap_baseline(const ClaimsDataset& dataset, const SplitIndices& split,
                                   MiscoverageLevel alpha, const BootstrapConfig& config,
                                   models::RegressorPtr frequency = nullptr);

// ---- experiments ----------------------------------------------------------

Report run(const ExperimentConfig& config);

/// Run several configs on the same data, split and seed; every method is
/// scored on the same test rows. Split configs that share a frequency model
/// specification reuse one fitted frequency model.
Report compare(const std::vector<ExperimentConfig>& configs);

/// Writes report.json, report.txt and per-method plot data into `dir`.
void write_report(const Report& report, const std::vector<ExperimentConfig>& configs,
                  const std::filesystem::path& dir);

// ---- Monte Carlo coverage check -------------------------------------------

struct CoverageSettings {
  double alpha = 0.2;
  std::size_t n_train = 200;
  std::size_t n_calibration = 20;
  std::size_t n_test = 1;
  std::size_t replications = 1000;
  std::uint64_t seed = 1;
  Method method = Method::split;
  conformal::TwoStageChoices models;
  std::size_t trees = 100;
  std::size_t min_leaf = 5;
  std::size_t threads = 0;
};

struct CoverageCheck {
  double coverage = 0.0;
  std::size_t covered = 0;
  std::size_t trials = 0;
  std::size_t score_pool = 0;
  double band_lo = 0.0;  // 1 - alpha
  double band_hi = 0.0;  // 1 - alpha + 1 / (pool + 1)
  double standard_error = 0.0;
  bool pass = false;
};

/// Each replication draws fresh synthetic data, fits and calibrates the
/// two-stage procedure and scores n_test new rows. Passes when coverage is
/// within 3 binomial standard errors of [band_lo, band_hi].
CoverageCheck validate_coverage(const CoverageSettings& settings);

}  // namespace fscp::harness
