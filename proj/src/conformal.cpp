#include "fscp/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fscp::conformal {

using models::Forest;
using models::GlmFamily;

const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::single_standard: return "single_standard";
    case Mode::single_locally_weighted: return "single_locally_weighted";
    case Mode::two_stage_split: return "two_stage_split";
    case Mode::two_stage_oob: return "two_stage_oob";
  }
  return "unknown";
}

double variability_floor(std::span<const double> deltas) {
  if (deltas.empty()) return 1e-8;
  const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) /
                      static_cast<double>(deltas.size());
  return std::max(1e-8, 1e-6 * mean);
}

namespace {

ScoreSet sorted_scores(ScoreSet s) {
  std::sort(s.scores.begin(), s.scores.end());
  return s;
}

void check_models(Mode mode, const FittedModels& m) {
  if (!m.severity) throw Error("conformal predictor needs a point model");
  const bool two_stage = mode == Mode::two_stage_split || mode == Mode::two_stage_oob;
  if (two_stage) {
    if (!m.frequency || !m.variability) {
      throw Error("two-stage predictor needs frequency, severity and variability models");
    }
    if (m.severity->arity() != m.frequency->arity() + 1 ||
        m.variability->arity() != m.severity->arity()) {
      throw Error("two-stage model arities are inconsistent");
    }
  } else if (mode == Mode::single_locally_weighted) {
    if (!m.variability) throw Error("locally weighted predictor needs a variability model");
    if (m.variability->arity() != m.severity->arity()) {
      throw Error("variability model arity differs from the point model");
    }
  }
  if (!(m.variability_floor > 0.0)) throw Error("variability floor must be positive");
}

void check_xy(const FeatureMatrix& X, std::span<const double> y, const char* what) {
  if (X.rows() != y.size()) throw Error(std::string(what) + ": response length does not match rows");
  if (X.rows() == 0) throw Error(std::string(what) + ": no rows");
}

}  // namespace

ConformalPredictor::ConformalPredictor(Mode mode, MiscoverageLevel alpha, FittedModels models,
                                       ScoreSet scores, std::vector<TwoStageScore> audit,
                                       std::shared_ptr<const ingest::Encoding> encoding)
    : mode_(mode),
      alpha_(alpha),
      models_(std::move(models)),
      scores_(sorted_scores(std::move(scores))),
      audit_(std::move(audit)),
      encoding_(std::move(encoding)),
      quantile_(0.0) {
  check_models(mode_, models_);
  std::sort(audit_.begin(), audit_.end(),
            [](const TwoStageScore& a, const TwoStageScore& b) { return a.index < b.index; });
  quantile_ = conformal_quantile(scores_, alpha_);
}

double ConformalPredictor::point_prediction(std::span<const double> x) const {
  if (!two_stage()) return models_.severity->predict(x);
  return models_.severity->predict(models::extend_row(x, models_.frequency->predict(x)));
}

double ConformalPredictor::local_scale(std::span<const double> x) const {
  switch (mode_) {
    case Mode::single_standard:
      return 1.0;
    case Mode::single_locally_weighted:
      return std::max(models_.variability_floor, models_.variability->predict(x));
    default: {
      const auto xd = models::extend_row(x, models_.frequency->predict(x));
      return std::max(models_.variability_floor, models_.variability->predict(xd));
    }
  }
}

PredictionInterval ConformalPredictor::predict_interval(std::span<const double> x) const {
  if (x.size() != arity()) {
    throw Error("feature row has " + std::to_string(x.size()) + " values, predictor expects " +
                std::to_string(arity()));
  }
  double center = 0.0;
  double scale = 1.0;
  if (two_stage()) {
    const auto xd = models::extend_row(x, models_.frequency->predict(x));
    center = models_.severity->predict(xd);
    scale = std::max(models_.variability_floor, models_.variability->predict(xd));
  } else {
    center = models_.severity->predict(x);
    scale = local_scale(x);
  }
  const double eps = quantile_ * scale;
  return two_stage() ? PredictionInterval::zero_clipped(center, eps)
                     : PredictionInterval::symmetric(center, eps);
}

std::vector<PredictionInterval> ConformalPredictor::predict_intervals(const FeatureMatrix& X) const {
  std::vector<PredictionInterval> out;
  out.reserve(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out.push_back(predict_interval(X.row(r)));
  return out;
}

std::vector<PredictionInterval> ConformalPredictor::predict_intervals(
    const ClaimsDataset& dataset, std::span<const std::size_t> rows) const {
  if (!encoding_) throw Error("predictor has no stored encoding");
  return predict_intervals(encoding_->transform(dataset, rows));
}

ConformalPredictor ConformalPredictor::with_alpha(MiscoverageLevel alpha) const {
  ConformalPredictor copy = *this;
  copy.alpha_ = alpha;
  copy.quantile_ = conformal_quantile(copy.scores_, alpha);
  return copy;
}

// ---- single stage ---------------------------------------------------------

ConformalPredictor calibrate_standard(RegressorPtr model, const FeatureMatrix& X_cal,
                                      std::span<const double> y_cal, MiscoverageLevel alpha) {
  check_xy(X_cal, y_cal, "calibration");
  if (!model) throw Error("calibration needs a fitted model");
  std::vector<double> scores(X_cal.rows());
  for (std::size_t i = 0; i < X_cal.rows(); ++i) {
    scores[i] = std::abs(y_cal[i] - model->predict(X_cal.row(i)));
  }
  FittedModels m;
  m.severity = std::move(model);
  return ConformalPredictor(Mode::single_standard, alpha, std::move(m),
                            ScoreSet(std::move(scores), ScoreSet::Provenance::calibration));
}

ConformalPredictor calibrate_locally_weighted(RegressorPtr model, RegressorPtr variability,
                                              double floor, const FeatureMatrix& X_cal,
                                              std::span<const double> y_cal,
                                              MiscoverageLevel alpha) {
  check_xy(X_cal, y_cal, "calibration");
  if (!model || !variability) throw Error("calibration needs fitted models");
  std::vector<double> scores(X_cal.rows());
  for (std::size_t i = 0; i < X_cal.rows(); ++i) {
    const auto x = X_cal.row(i);
    scores[i] = std::abs(y_cal[i] - model->predict(x)) / std::max(floor, variability->predict(x));
  }
  FittedModels m{nullptr, std::move(model), std::move(variability), floor};
  return ConformalPredictor(Mode::single_locally_weighted, alpha, std::move(m),
                            ScoreSet(std::move(scores), ScoreSet::Provenance::calibration));
}

ConformalPredictor single_stage_split(const FeatureMatrix& X_train, std::span<const double> y_train,
                                      const FeatureMatrix& X_cal, std::span<const double> y_cal,
                                      const ModelFactory& model, MiscoverageLevel alpha) {
  check_xy(X_train, y_train, "training");
  return calibrate_standard(model(X_train, y_train), X_cal, y_cal, alpha);
}

ConformalPredictor single_stage_locally_weighted(
    const FeatureMatrix& X_train, std::span<const double> y_train, const FeatureMatrix& X_cal,
    std::span<const double> y_cal, const ModelFactory& model, const ModelFactory& variability,
    MiscoverageLevel alpha) {
  check_xy(X_train, y_train, "training");
  auto mu = model(X_train, y_train);
  std::vector<double> residuals(X_train.rows());
  for (std::size_t i = 0; i < X_train.rows(); ++i) {
    residuals[i] = std::abs(y_train[i] - mu->predict(X_train.row(i)));
  }
  auto sigma = variability(X_train, residuals);
  return calibrate_locally_weighted(std::move(mu), std::move(sigma), variability_floor(residuals),
                                    X_cal, y_cal, alpha);
}

// ---- two stage ------------------------------------------------------------

RegressorPtr fit_stage(ModelChoice choice, GlmFamily glm_family, const FeatureMatrix& X,
                       std::span<const double> y, const models::ForestConfig& forest,
                       const models::GlmConfig& glm) {
  if (choice == ModelChoice::forest) {
    return std::make_shared<const Forest>(models::fit_forest(X, y, forest));
  }
  if (glm_family == GlmFamily::gamma) {
    std::vector<double> clamped(y.begin(), y.end());
    for (double& v : clamped) v = std::max(v, gamma_response_floor);
    return std::make_shared<const models::GlmModel>(models::fit_glm(X, clamped, glm_family, glm));
  }
  return std::make_shared<const models::GlmModel>(models::fit_glm(X, y, glm_family, glm));
}

FittedModels fit_two_stage_models(const FeatureMatrix& X_train, std::span<const double> d_train,
                                  std::span<const double> y_train, const TwoStageChoices& choices,
                                  const TwoStageConfig& config, RegressorPtr frequency) {
  check_xy(X_train, d_train, "training");
  if (y_train.size() != X_train.rows()) throw Error("training: severity length does not match rows");

  std::vector<std::size_t> positive;
  for (std::size_t i = 0; i < d_train.size(); ++i) {
    if (d_train[i] > 0.0) positive.push_back(i);
  }
  if (positive.empty()) throw Error("no positive-frequency training rows");

  FittedModels m;
  if (frequency) {
    if (frequency->arity() != X_train.cols()) throw Error("supplied frequency model has wrong arity");
    m.frequency = std::move(frequency);
  } else {
    m.frequency = fit_stage(choices.frequency, GlmFamily::poisson, X_train, d_train,
                            config.frequency_forest, config.glm);
  }

  std::vector<double> d_pos, y_pos;
  for (std::size_t i : positive) {
    d_pos.push_back(d_train[i]);
    y_pos.push_back(y_train[i]);
  }
  const FeatureMatrix X_pos = X_train.select_rows(positive).with_column(d_pos, "D");
  m.severity = fit_stage(choices.severity, GlmFamily::gamma, X_pos, y_pos, config.severity_forest,
                         config.glm);

  std::vector<double> deltas(positive.size());
  for (std::size_t k = 0; k < positive.size(); ++k) {
    deltas[k] = std::abs(y_pos[k] - m.severity->predict(X_pos.row(k)));
  }
  m.variability = fit_stage(choices.variability, GlmFamily::gamma, X_pos, deltas,
                            config.variability_forest, config.glm);
  m.variability_floor = variability_floor(deltas);
  return m;
}

ConformalPredictor calibrate_two_stage(FittedModels models, const FeatureMatrix& X_cal,
                                       std::span<const double> y_cal,
                                       std::span<const std::size_t> ids, MiscoverageLevel alpha) {
  check_xy(X_cal, y_cal, "calibration");
  if (!ids.empty() && ids.size() != X_cal.rows()) throw Error("calibration ids do not match rows");
  check_models(Mode::two_stage_split, models);
  std::vector<double> scores(X_cal.rows());
  std::vector<TwoStageScore> audit(X_cal.rows());
  for (std::size_t i = 0; i < X_cal.rows(); ++i) {
    const auto xd = models::extend_row(X_cal.row(i), models.frequency->predict(X_cal.row(i)));
    const double num = std::abs(y_cal[i] - models.severity->predict(xd));
    const double den = std::max(models.variability_floor, models.variability->predict(xd));
    scores[i] = num / den;
    audit[i] = {ids.empty() ? i : ids[i], num, den, scores[i]};
  }
  return ConformalPredictor(Mode::two_stage_split, alpha, std::move(models),
                            ScoreSet(std::move(scores), ScoreSet::Provenance::calibration),
                            std::move(audit));
}

ConformalPredictor two_stage_split(const ClaimsDataset& dataset, const SplitIndices& split,
                                   const TwoStageChoices& choices, MiscoverageLevel alpha,
                                   const TwoStageConfig& config, RegressorPtr frequency) {
  if (split.train.empty()) throw Error("empty training set");
  if (split.calibration.empty()) throw Error("empty calibration set");
  auto encoding =
      std::make_shared<const ingest::Encoding>(ingest::Encoding::fit(dataset, split.train));
  const FeatureMatrix X_train = encoding->transform(dataset, split.train);
  auto m = fit_two_stage_models(X_train, dataset.frequencies(split.train),
                                dataset.severities(split.train), choices, config,
                                std::move(frequency));
  const FeatureMatrix X_cal = encoding->transform(dataset, split.calibration);
  auto p = calibrate_two_stage(std::move(m), X_cal, dataset.severities(split.calibration),
                               split.calibration, alpha);
  return ConformalPredictor(p.mode(), p.alpha(), p.models(), p.scores(), p.audit(),
                            std::move(encoding));
}

// ---- out of bag -----------------------------------------------------------

namespace {

// OOB predictions of a forest trained on `rows` (a subset of 0..n-1 given by
// position), evaluated for every row of X. Rows outside the training set use
// the whole forest.
std::vector<double> oob_all(const Forest& forest, const FeatureMatrix& X,
                            std::span<const std::size_t> rows, const char* name) {
  std::vector<double> out(X.rows());
  std::vector<std::ptrdiff_t> position(X.rows(), -1);
  for (std::size_t k = 0; k < rows.size(); ++k) position[rows[k]] = static_cast<std::ptrdiff_t>(k);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (position[i] < 0) {
      out[i] = forest.predict(X.row(i));
      continue;
    }
    try {
      out[i] = forest.oob_predict(static_cast<std::size_t>(position[i]), X.row(i));
    } catch (const models::NoOobTrees&) {
      throw models::NoOobTrees(i, name);
    }
  }
  return out;
}

}  // namespace

ConformalPredictor two_stage_oob(const FeatureMatrix& X, std::span<const double> d,
                                 std::span<const double> y, std::span<const std::size_t> ids,
                                 const OobConfig& config, MiscoverageLevel alpha) {
  check_xy(X, d, "training");
  if (y.size() != X.rows()) throw Error("training: severity length does not match rows");
  if (!ids.empty() && ids.size() != X.rows()) throw Error("training ids do not match rows");
  const std::size_t n = X.rows();

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto mu = std::make_shared<const Forest>(models::fit_forest(X, d, config.frequency_forest));
  const std::vector<double> d_hat = oob_all(*mu, X, all, "frequency");

  std::vector<std::size_t> fit_rows;
  if (config.positive_only) {
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i] > 0.0) fit_rows.push_back(i);
    }
    if (fit_rows.empty()) throw Error("no positive-frequency training rows");
  } else {
    fit_rows = all;
  }

  const FeatureMatrix Xd = X.with_column(d_hat, "D");
  const FeatureMatrix Xd_fit = config.positive_only ? Xd.select_rows(fit_rows) : Xd;
  std::vector<double> y_fit;
  for (std::size_t i : fit_rows) y_fit.push_back(y[i]);
  auto psi = std::make_shared<const Forest>(models::fit_forest(Xd_fit, y_fit, config.severity_forest));
  const std::vector<double> y_hat = oob_all(*psi, Xd, fit_rows, "severity");

  std::vector<double> deltas(n);
  for (std::size_t i = 0; i < n; ++i) deltas[i] = std::abs(y[i] - y_hat[i]);
  std::vector<double> delta_fit;
  for (std::size_t i : fit_rows) delta_fit.push_back(deltas[i]);
  auto sigma = std::make_shared<const Forest>(
      models::fit_forest(Xd_fit, delta_fit, config.variability_forest));
  const std::vector<double> s_hat = oob_all(*sigma, Xd, fit_rows, "variability");

  const double floor = variability_floor(delta_fit);
  std::vector<double> scores(n);
  std::vector<TwoStageScore> audit(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double den = std::max(floor, s_hat[i]);
    scores[i] = deltas[i] / den;
    audit[i] = {ids.empty() ? i : ids[i], deltas[i], den, scores[i]};
  }
  FittedModels m{mu, psi, sigma, floor};
  return ConformalPredictor(Mode::two_stage_oob, alpha, std::move(m),
                            ScoreSet(std::move(scores), ScoreSet::Provenance::oob),
                            std::move(audit));
}

ConformalPredictor two_stage_oob(const ClaimsDataset& dataset,
                                 std::span<const std::size_t> train_rows, const OobConfig& config,
                                 MiscoverageLevel alpha) {
  if (train_rows.empty()) throw Error("empty training set");
  auto encoding =
      std::make_shared<const ingest::Encoding>(ingest::Encoding::fit(dataset, train_rows));
  auto p = two_stage_oob(encoding->transform(dataset, train_rows), dataset.frequencies(train_rows),
                         dataset.severities(train_rows), train_rows, config, alpha);
  return ConformalPredictor(p.mode(), p.alpha(), p.models(), p.scores(), p.audit(),
                            std::move(encoding));
}

}  // namespace fscp::conformal
