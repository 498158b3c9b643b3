#include "fscp/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace fscp {

namespace {

// Relative slack absorbing rounding in (1 - alpha)(m + 1) before the ceiling,
// so that e.g. 0.8 * 5 evaluates to rank 4 and not 5.
constexpr double kRankSlack = 1e-12;

std::size_t ceil_with_slack(double t) {
  return static_cast<std::size_t>(std::ceil(t - kRankSlack * std::max(1.0, t)));
}

}  // namespace

CalibrationTooSmall::CalibrationTooSmall(std::size_t available, std::size_t required)
    : Error("calibration set too small for requested confidence: have " +
            std::to_string(available) + " scores, need at least " + std::to_string(required)),
      available_(available),
      required_(required) {}

MiscoverageLevel::MiscoverageLevel(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error("miscoverage level must lie in (0, 1), got " + std::to_string(alpha));
  }
}

ClaimsDataset::ClaimsDataset(std::vector<ColumnSpec> columns, std::vector<ClaimRecord> rows)
    : columns_(std::move(columns)), rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const ClaimRecord& r = rows_[i];
    if (r.predictors.size() != columns_.size()) {
      throw Error("row " + std::to_string(i) + " has " + std::to_string(r.predictors.size()) +
                  " predictors, expected " + std::to_string(columns_.size()));
    }
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const double v = r.predictors[c];
      if (!std::isfinite(v)) {
        throw Error("row " + std::to_string(i) + ", column '" + columns_[c].name +
                    "': non-finite value");
      }
      if (columns_[c].kind == ColumnKind::categorical) {
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(columns_[c].levels.size())) {
          throw Error("row " + std::to_string(i) + ", column '" + columns_[c].name +
                      "': invalid level id");
        }
      }
    }
    if (!std::isfinite(r.severity) || r.severity < 0.0) {
      throw Error("row " + std::to_string(i) + ": severity must be finite and >= 0");
    }
    if (r.frequency == 0 && r.severity != 0.0) {
      throw Error("row " + std::to_string(i) + ": severity must be 0 when frequency is 0");
    }
  }
}

std::vector<double> ClaimsDataset::frequencies(std::span<const std::size_t> idx) const {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(static_cast<double>(rows_.at(i).frequency));
  return out;
}

std::vector<double> ClaimsDataset::severities(std::span<const std::size_t> idx) const {
  std::vector<double> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(rows_.at(i).severity);
  return out;
}

std::vector<double> ClaimsDataset::severities() const {
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.severity);
  return out;
}

double ClaimsDataset::zero_frequency_share() const {
  if (rows_.empty()) return 0.0;
  const auto zeros = std::count_if(rows_.begin(), rows_.end(),
                                   [](const ClaimRecord& r) { return r.frequency == 0; });
  return static_cast<double>(zeros) / static_cast<double>(rows_.size());
}

ClaimsDataset ClaimsDataset::subset(std::span<const std::size_t> idx) const {
  std::vector<ClaimRecord> rows;
  rows.reserve(idx.size());
  for (std::size_t i : idx) rows.push_back(rows_.at(i));
  return ClaimsDataset(columns_, std::move(rows));
}

std::vector<std::size_t> split_sizes(std::size_t n, const SplitProportions& p) {
  const double props[3] = {p.train, p.calibration, p.test};
  for (double q : props) {
    if (!(q > 0.0) || !std::isfinite(q)) throw Error("split proportions must be positive");
  }
  if (std::abs(props[0] + props[1] + props[2] - 1.0) > 1e-9) {
    throw Error("split proportions must sum to 1");
  }
  if (n < 3) throw Error("degenerate split: need at least 3 rows");

  // Largest-remainder rounding; ties go to the earlier part.
  std::vector<std::size_t> sizes(3);
  double remainders[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = props[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainders[k] = exact - static_cast<double>(sizes[k]);
    assigned += sizes[k];
  }
  std::vector<int> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];

  for (std::size_t s : sizes) {
    if (s == 0) throw Error("degenerate split: a part is empty after rounding");
  }
  return sizes;
}

SplitIndices random_split(std::size_t n, const SplitProportions& proportions, std::uint64_t seed) {
  const auto sizes = split_sizes(n, proportions);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  SplitIndices out;
  auto first = perm.begin();
  out.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
  first += static_cast<std::ptrdiff_t>(sizes[0]);
  out.calibration.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
  first += static_cast<std::ptrdiff_t>(sizes[1]);
  out.test.assign(first, perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.calibration.begin(), out.calibration.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

ScoreSet::ScoreSet(std::vector<double> s, Provenance p) : scores(std::move(s)), provenance(p) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]) || scores[i] < 0.0) {
      throw Error("conformity score " + std::to_string(i) + " is negative or non-finite");
    }
  }
}

std::size_t conformal_rank(std::size_t m, MiscoverageLevel alpha) {
  return ceil_with_slack(alpha.confidence() * static_cast<double>(m + 1));
}

std::size_t minimum_pool_size(MiscoverageLevel alpha) {
  // (1 - a)(m + 1) <= m  <=>  m >= (1 - a) / a; step to the exact boundary.
  auto m = ceil_with_slack(alpha.confidence() / alpha.value());
  while (m > 1 && conformal_rank(m - 1, alpha) <= m - 1) --m;
  while (conformal_rank(m, alpha) > m) ++m;
  return std::max<std::size_t>(m, 1);
}

double conformal_quantile(const ScoreSet& scores, MiscoverageLevel alpha) {
  const std::size_t m = scores.size();
  if (m == 0) throw Error("conformal quantile of an empty score set");
  const std::size_t k = conformal_rank(m, alpha);
  if (k > m) throw CalibrationTooSmall(m, minimum_pool_size(alpha));
  std::vector<double> work = scores.scores;
  auto kth = work.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(work.begin(), kth, work.end());
  return *kth;
}

PredictionInterval PredictionInterval::symmetric(double center, double eps) {
  return {center - eps, center + eps, center, eps, false};
}

PredictionInterval PredictionInterval::zero_clipped(double center, double eps) {
  const double raw_lo = center - eps;
  return {std::max(0.0, raw_lo), center + eps, center, eps, raw_lo < 0.0};
}

PredictionInterval PredictionInterval::from_bounds(double lo, double hi, double center) {
  if (lo > hi) throw Error("interval lower bound exceeds upper bound");
  return {lo, hi, center, 0.5 * (hi - lo), false};
}

double empirical_coverage(std::span<const PredictionInterval> intervals,
                          std::span<const double> truths) {
  if (intervals.size() != truths.size()) throw Error("coverage: length mismatch");
  if (intervals.empty()) throw Error("coverage: no intervals");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) hits += intervals[i].contains(truths[i]);
  return static_cast<double>(hits) / static_cast<double>(intervals.size());
}

double average_width(std::span<const PredictionInterval> intervals) {
  if (intervals.empty()) throw Error("average width: no intervals");
  double total = 0.0;
  for (const auto& iv : intervals) total += iv.width();
  return total / static_cast<double>(intervals.size());
}

double rmse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) throw Error("rmse: length mismatch");
  if (predictions.empty()) throw Error("rmse: empty input");
  double sse = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - truths[i];
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(predictions.size()));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace fscp
