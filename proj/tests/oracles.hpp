#pragma once

// Brute-force reference implementations shared by the unit and acceptance
// tests.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "fscp/models/cart.hpp"
#include "fscp/models/forest.hpp"

namespace oracle {

using fscp::models::CartTree;
using fscp::models::FeatureMatrix;
using fscp::models::Forest;

inline double sse(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  double m = 0;
  for (auto i : rows) m += y[i];
  m /= static_cast<double>(rows.size());
  double s = 0;
  for (auto i : rows) s += (y[i] - m) * (y[i] - m);
  return s;
}

struct Cut {
  std::vector<std::size_t> left, right;
};

// Every split of `rows` into {x_f <= t} and {x_f > t} with both sides nonempty.
inline std::vector<Cut> all_cuts(const FeatureMatrix& X, const std::vector<std::size_t>& rows) {
  std::vector<Cut> out;
  for (std::size_t f = 0; f < X.cols(); ++f) {
    std::vector<double> values;
    for (auto i : rows) values.push_back(X(i, f));
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
      Cut c;
      for (auto i : rows) (X(i, f) <= values[k] ? c.left : c.right).push_back(i);
      out.push_back(std::move(c));
    }
  }
  return out;
}

// Greedy recursion: best single split by direct SSE evaluation at each node.
inline double greedy_cost(const FeatureMatrix& X, const std::vector<double>& y,
                          const std::vector<std::size_t>& rows, int depth_left) {
  const double here = sse(y, rows);
  if (depth_left == 0 || rows.size() < 2) return here;
  double best = here;
  const Cut* chosen = nullptr;
  const auto cuts = all_cuts(X, rows);
  for (const auto& c : cuts) {
    const double cost = sse(y, c.left) + sse(y, c.right);
    if (cost < best - 1e-12 * here) {
      best = cost;
      chosen = &c;
    }
  }
  if (!chosen) return here;
  return greedy_cost(X, y, chosen->left, depth_left - 1) +
         greedy_cost(X, y, chosen->right, depth_left - 1);
}

// Global optimum over all trees of depth <= depth_left.
inline double optimal_cost(const FeatureMatrix& X, const std::vector<double>& y,
                           const std::vector<std::size_t>& rows, int depth_left) {
  double best = sse(y, rows);
  if (depth_left == 0 || rows.size() < 2) return best;
  for (const auto& c : all_cuts(X, rows)) {
    best = std::min(best, optimal_cost(X, y, c.left, depth_left - 1) +
                              optimal_cost(X, y, c.right, depth_left - 1));
  }
  return best;
}

// k-th smallest by sorting a copy, k = ceil((1 - alpha)(m + 1)) computed in
// exact integer arithmetic for alpha = num / den.
inline double sorted_quantile(std::vector<double> scores, long num, long den) {
  std::sort(scores.begin(), scores.end());
  const long m = static_cast<long>(scores.size());
  const long top = (den - num) * (m + 1);
  const long k = (top + den - 1) / den;
  return scores.at(static_cast<std::size_t>(k - 1));
}

// Trees whose in-bag counts for `row` are zero, found by scanning every tree.
inline std::vector<std::size_t> oob_scan(const Forest& f, std::size_t row) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < f.n_trees(); ++j) {
    if (f.ledger().counts(j)[row] == 0) out.push_back(j);
  }
  return out;
}

inline double mean_over(const Forest& f, const std::vector<std::size_t>& trees,
                        std::span<const double> x) {
  double s = 0;
  for (auto j : trees) s += f.trees()[j].predict(x);
  return s / static_cast<double>(trees.size());
}

inline std::vector<std::size_t> all_trees(const Forest& f) {
  std::vector<std::size_t> v(f.n_trees());
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace oracle
