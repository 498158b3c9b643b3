#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fscp/core.hpp"
#include "fscp/models/feature_matrix.hpp"

namespace fscp::models {

enum class GlmFamily { gamma, poisson };

struct GlmConfig {
  int max_iter = 50;
  // Convergence when the largest absolute coefficient change drops below tol.
  double tol = 1e-8;
};

class IrlsFailure : public Error {
 public:
  IrlsFailure(const std::string& what, int iteration);
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

/// Log-link GLM. Coefficients are [intercept, beta_1, ..., beta_p].
class GlmModel final : public Regressor {
 public:
  GlmModel(GlmFamily family, std::vector<double> coefficients, double dispersion = 1.0);

  double predict(std::span<const double> x) const override;
  std::size_t arity() const override { return coefficients_.size() - 1; }

  double linear_predictor(std::span<const double> x) const;

  GlmFamily family() const { return family_; }
  const std::vector<double>& coefficients() const { return coefficients_; }
  const std::vector<double>& standard_errors() const { return standard_errors_; }
  /// Pearson estimate for the gamma family; 1 for Poisson.
  double dispersion() const { return dispersion_; }
  bool converged() const { return converged_; }
  int iterations() const { return iterations_; }
  double deviance() const { return deviance_; }

 private:
  friend GlmModel fit_glm(const FeatureMatrix&, std::span<const double>, GlmFamily,
                          const GlmConfig&);

  GlmFamily family_;
  std::vector<double> coefficients_;
  std::vector<double> standard_errors_;
  double dispersion_ = 1.0;
  bool converged_ = true;
  int iterations_ = 0;
  double deviance_ = 0.0;
};

/// Maximum-likelihood fit by iteratively reweighted least squares.
///
/// Gamma requires y > 0, Poisson requires y >= 0, and the design (with
/// intercept) must have fewer columns than rows. A rank-deficient weighted
/// design throws IrlsFailure. Running out of iterations is not an error; the
/// model is returned with converged() == false.
GlmModel fit_glm(const FeatureMatrix& X, std::span<const double> y, GlmFamily family,
                 const GlmConfig& config = {});

}  // namespace fscp::models
