#pragma once

// Split conformal prediction (standard and locally weighted), the two-stage
// frequency/severity split procedure, and its out-of-bag counterpart.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "fscp/core.hpp"
#include "fscp/ingest.hpp"
#include "fscp/models/feature_matrix.hpp"
#include "fscp/models/forest.hpp"
#include "fscp/models/glm.hpp"

namespace fscp::conformal {

using models::FeatureMatrix;
using models::RegressorPtr;

enum class Mode { single_standard, single_locally_weighted, two_stage_split, two_stage_oob };

const char* mode_name(Mode mode);

/// One calibration score with its parts: score = numerator / denominator.
struct TwoStageScore {
  std::size_t index = 0;  // dataset row
  double numerator = 0.0;
  double denominator = 1.0;
  double score = 0.0;

  friend bool operator==(const TwoStageScore&, const TwoStageScore&) = default;
};

/// Fitted models for either pipeline. Single-stage modes leave `frequency`
/// empty and use `severity` as the point model; the standard mode has no
/// variability model.
struct FittedModels {
  RegressorPtr frequency;
  RegressorPtr severity;
  RegressorPtr variability;
  // sigma-hat outputs are clamped below at this value before any division.
  double variability_floor = 1e-8;
};

/// max(1e-8, 1e-6 * mean(deltas)).
double variability_floor(std::span<const double> deltas);

/// Frozen models plus calibrated radius. Scores are kept sorted, so the
/// object does not depend on the order of the calibration rows.
class ConformalPredictor {
 public:
  ConformalPredictor(Mode mode, MiscoverageLevel alpha, FittedModels models, ScoreSet scores,
                     std::vector<TwoStageScore> audit = {},
                     std::shared_ptr<const ingest::Encoding> encoding = nullptr);

  Mode mode() const { return mode_; }
  MiscoverageLevel alpha() const { return alpha_; }
  double quantile() const { return quantile_; }
  const ScoreSet& scores() const { return scores_; }
  const FittedModels& models() const { return models_; }
  /// Calibration scores ordered by dataset row (two-stage modes only).
  const std::vector<TwoStageScore>& audit() const { return audit_; }
  const std::shared_ptr<const ingest::Encoding>& encoding() const { return encoding_; }
  std::size_t arity() const { return models_.severity->arity() - (two_stage() ? 1 : 0); }

  bool two_stage() const {
    return mode_ == Mode::two_stage_split || mode_ == Mode::two_stage_oob;
  }

  /// psi-hat(x, mu-hat(x)) for two-stage modes, mu-hat(x) otherwise.
  double point_prediction(std::span<const double> x) const;
  /// Floored sigma-hat at the same point; 1 in the standard mode.
  double local_scale(std::span<const double> x) const;

  /// center +- quantile * local_scale; two-stage modes clip lo at zero.
  PredictionInterval predict_interval(std::span<const double> x) const;
  std::vector<PredictionInterval> predict_intervals(const FeatureMatrix& X) const;
  /// Encode `rows` of `dataset` with the stored encoding, then predict.
  std::vector<PredictionInterval> predict_intervals(const ClaimsDataset& dataset,
                                                    std::span<const std::size_t> rows) const;

  /// Same models and scores, radius recomputed at another level.
  ConformalPredictor with_alpha(MiscoverageLevel alpha) const;

 private:
  Mode mode_;
  MiscoverageLevel alpha_;
  FittedModels models_;
  ScoreSet scores_;
  std::vector<TwoStageScore> audit_;
  std::shared_ptr<const ingest::Encoding> encoding_;
  double quantile_;
};

// ---- single stage ---------------------------------------------------------

using ModelFactory = std::function<RegressorPtr(const FeatureMatrix&, std::span<const double>)>;

/// Scores |y - mu(x)| on the calibration rows.
ConformalPredictor calibrate_standard(RegressorPtr model, const FeatureMatrix& X_cal,
                                      std::span<const double> y_cal, MiscoverageLevel alpha);

/// Scores |y - mu(x)| / max(floor, sigma(x)) on the calibration rows.
ConformalPredictor calibrate_locally_weighted(RegressorPtr model, RegressorPtr variability,
                                              double floor, const FeatureMatrix& X_cal,
                                              std::span<const double> y_cal,
                                              MiscoverageLevel alpha);

ConformalPredictor single_stage_split(const FeatureMatrix& X_train, std::span<const double> y_train,
                                      const FeatureMatrix& X_cal, std::span<const double> y_cal,
                                      const ModelFactory& model, MiscoverageLevel alpha);

/// sigma-hat is fit by `variability` on the training absolute residuals.
ConformalPredictor single_stage_locally_weighted(
    const FeatureMatrix& X_train, std::span<const double> y_train, const FeatureMatrix& X_cal,
    std::span<const double> y_cal, const ModelFactory& model, const ModelFactory& variability,
    MiscoverageLevel alpha);

// ---- two stage ------------------------------------------------------------

/// forest, or the stage's GLM (Poisson for frequency, gamma otherwise).
enum class ModelChoice { forest, glm };

struct TwoStageChoices {
  ModelChoice frequency = ModelChoice::forest;
  ModelChoice severity = ModelChoice::forest;
  ModelChoice variability = ModelChoice::forest;
};

struct TwoStageConfig {
  models::ForestConfig frequency_forest;
  models::ForestConfig severity_forest;
  models::ForestConfig variability_forest;
  models::GlmConfig glm;
};

/// Gamma targets are clamped below at this value.
inline constexpr double gamma_response_floor = 1e-8;

/// Fit one stage. GLM responses for the gamma family are clamped at
/// gamma_response_floor.
RegressorPtr fit_stage(ModelChoice choice, models::GlmFamily glm_family, const FeatureMatrix& X,
                       std::span<const double> y, const models::ForestConfig& forest,
                       const models::GlmConfig& glm);

/// Frequency on all training rows; severity and variability on the
/// positive-frequency rows with the observed count appended as a feature.
/// A caller may pass an already fitted frequency model.
FittedModels fit_two_stage_models(const FeatureMatrix& X_train, std::span<const double> d_train,
                                  std::span<const double> y_train, const TwoStageChoices& choices,
                                  const TwoStageConfig& config,
                                  RegressorPtr frequency = nullptr);

/// Scores |y - psi(x, mu(x))| / sigma(x, mu(x)) over every calibration row,
/// including rows without claims. `ids` labels the audit records.
ConformalPredictor calibrate_two_stage(FittedModels models, const FeatureMatrix& X_cal,
                                       std::span<const double> y_cal,
                                       std::span<const std::size_t> ids, MiscoverageLevel alpha);

/// Encoding fit on the training rows, models from fit_two_stage_models,
/// scores from calibrate_two_stage.
ConformalPredictor two_stage_split(const ClaimsDataset& dataset, const SplitIndices& split,
                                   const TwoStageChoices& choices, MiscoverageLevel alpha,
                                   const TwoStageConfig& config, RegressorPtr frequency = nullptr);

struct OobConfig {
  models::ForestConfig frequency_forest;
  models::ForestConfig severity_forest;
  models::ForestConfig variability_forest;
  // Train severity and variability forests on positive-frequency rows only.
  // Rows outside those forests' training set count as out of bag for every
  // tree.
  bool positive_only = false;
};

/// Out-of-bag procedure on `train_rows` of `dataset`: all three models are
/// forests and every training row contributes a score computed from the
/// trees that did not see it, so the pool has size |train_rows|.
ConformalPredictor two_stage_oob(const ClaimsDataset& dataset,
                                 std::span<const std::size_t> train_rows, const OobConfig& config,
                                 MiscoverageLevel alpha);

/// Same, on an already encoded design.
ConformalPredictor two_stage_oob(const FeatureMatrix& X, std::span<const double> d,
                                 std::span<const double> y, std::span<const std::size_t> ids,
                                 const OobConfig& config, MiscoverageLevel alpha);

}  // namespace fscp::conformal
