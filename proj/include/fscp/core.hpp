#pragma once

// Data model, sample splitting, conformal order statistics and evaluation
// metrics shared by the rest of the library.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fscp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when ceil((1-alpha)(m+1)) > m, i.e. the score pool cannot support
/// the requested confidence. Carries the smallest admissible pool size.
class CalibrationTooSmall : public Error {
 public:
  CalibrationTooSmall(std::size_t available, std::size_t required);

  std::size_t available() const { return available_; }
  std::size_t required() const { return required_; }

 private:
  std::size_t available_;
  std::size_t required_;
};

/// Nominal miscoverage level, strictly inside (0, 1).
class MiscoverageLevel {
 public:
  explicit MiscoverageLevel(double alpha);

  double value() const { return alpha_; }
  double confidence() const { return 1.0 - alpha_; }

  friend bool operator==(MiscoverageLevel, MiscoverageLevel) = default;

 private:
  double alpha_;
};

enum class ColumnKind { numeric, categorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  // Level dictionary for categorical columns; a level id is its position.
  std::vector<std::string> levels;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct ClaimRecord {
  // Numeric value, or categorical level id stored as an integral double.
  std::vector<double> predictors;
  std::uint32_t frequency = 0;
  double severity = 0.0;

  friend bool operator==(const ClaimRecord&, const ClaimRecord&) = default;
};

/// Immutable table of (predictors, claim count, severity) triplets.
///
/// Construction enforces: every row has one value per column, categorical
/// values are valid level ids, severity is finite and nonnegative, and
/// severity is exactly zero whenever the claim count is zero.
class ClaimsDataset {
 public:
  ClaimsDataset() = default;
  ClaimsDataset(std::vector<ColumnSpec> columns, std::vector<ClaimRecord> rows);

  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  std::size_t arity() const { return columns_.size(); }

  const std::vector<ColumnSpec>& columns() const { return columns_; }
  const std::vector<ClaimRecord>& rows() const { return rows_; }
  const ClaimRecord& row(std::size_t i) const { return rows_.at(i); }

  std::vector<double> frequencies(std::span<const std::size_t> idx) const;
  std::vector<double> severities(std::span<const std::size_t> idx) const;
  std::vector<double> severities() const;

  /// Fraction of rows with zero claims.
  double zero_frequency_share() const;

  ClaimsDataset subset(std::span<const std::size_t> idx) const;

  friend bool operator==(const ClaimsDataset&, const ClaimsDataset&) = default;

 private:
  std::vector<ColumnSpec> columns_;
  std::vector<ClaimRecord> rows_;
};

struct SplitProportions {
  double train = 0.5;
  double calibration = 0.25;
  double test = 0.25;
};

/// Disjoint index sets. The test set is only used by the experiment harness.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> calibration;
  std::vector<std::size_t> test;

  std::size_t n2() const { return calibration.size(); }
};

/// Uniform random partition of 0..n-1 with part sizes obtained by
/// largest-remainder rounding of n * proportions. Index lists are returned
/// sorted. Deterministic given the seed.
SplitIndices random_split(std::size_t n, const SplitProportions& proportions, std::uint64_t seed);

/// Sizes random_split would produce, without shuffling.
std::vector<std::size_t> split_sizes(std::size_t n, const SplitProportions& proportions);

struct ScoreSet {
  enum class Provenance { calibration, oob };

  ScoreSet() = default;
  ScoreSet(std::vector<double> scores, Provenance provenance);

  std::size_t size() const { return scores.size(); }

  std::vector<double> scores;
  Provenance provenance = Provenance::calibration;
};

/// Rank k = ceil((1 - alpha)(m + 1)) used by split conformal prediction.
std::size_t conformal_rank(std::size_t m, MiscoverageLevel alpha);

/// Smallest pool size m for which conformal_rank(m, alpha) <= m.
std::size_t minimum_pool_size(MiscoverageLevel alpha);

/// k-th smallest score with k = conformal_rank(m, alpha).
///
/// Ties are allowed: the result is the order statistic of the multiset, so
/// coverage stays >= 1 - alpha when scores tie. Throws CalibrationTooSmall
/// when k > m.
double conformal_quantile(const ScoreSet& scores, MiscoverageLevel alpha);

/// A prediction interval with its point prediction and raw radius kept for
/// auditing. Symmetric intervals satisfy hi = center + half_width_raw and
/// lo = center - half_width_raw, or max(0, .) when clipped.
struct PredictionInterval {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  double half_width_raw = 0.0;
  bool clipped_at_zero = false;

  /// [center - eps, center + eps], no clipping.
  static PredictionInterval symmetric(double center, double eps);
  /// [max(0, center - eps), center + eps].
  static PredictionInterval zero_clipped(double center, double eps);
  /// Arbitrary bounds (e.g. simulated quantiles), half_width_raw = (hi - lo) / 2.
  static PredictionInterval from_bounds(double lo, double hi, double center);

  double width() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }

  friend bool operator==(const PredictionInterval&, const PredictionInterval&) = default;
};

/// Fraction of truths falling inside their interval (closed bounds).
double empirical_coverage(std::span<const PredictionInterval> intervals,
                          std::span<const double> truths);

/// Mean of hi - lo, measured after zero-clipping.
double average_width(std::span<const PredictionInterval> intervals);

double rmse(std::span<const double> predictions, std::span<const double> truths);

/// Independent child seed for stream `stream` of a master seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fscp
