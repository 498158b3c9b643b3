#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fscp/models/feature_matrix.hpp"

namespace fscp::models {

struct CartConfig {
  std::size_t min_leaf = 5;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t mtry = 0;       // features tried per split; 0 = all
};

/// Regression tree grown greedily on squared error.
class CartTree final : public Regressor {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // x[feature] <= threshold goes left
    double value = 0.0;         // mean training response (leaves)
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::uint32_t count = 0;    // training samples routed here, with multiplicity
    std::uint32_t depth = 0;
  };

  CartTree(std::size_t arity, std::vector<Node> nodes);

  double predict(std::span<const double> x) const override;
  std::size_t arity() const override { return arity_; }

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t leaf_of(std::span<const double> x) const;
  std::size_t leaf_count() const;
  std::size_t depth() const;

 private:
  std::size_t arity_;
  std::vector<Node> nodes_;
};

/// Fit on every row once. The rng only drives feature subsampling.
CartTree fit_cart(const FeatureMatrix& X, std::span<const double> y, const CartConfig& config,
                  std::mt19937_64& rng);

/// Sum of squared errors of the tree's predictions on (X, y).
double training_cost(const CartTree& tree, const FeatureMatrix& X, std::span<const double> y);

namespace detail {

/// Per-feature dense ranks of every row, computed once and shared by all
/// trees of a forest.
class PresortedFeatures {
 public:
  explicit PresortedFeatures(const FeatureMatrix& X);

  std::size_t cols() const { return unique_.size(); }
  std::uint32_t rank(std::size_t feature, std::size_t row) const {
    return ranks_[feature][row];
  }
  const std::vector<double>& unique_values(std::size_t feature) const { return unique_[feature]; }

 private:
  std::vector<std::vector<std::uint32_t>> ranks_;
  std::vector<std::vector<double>> unique_;
};

/// Grow a tree on rows weighted by integer multiplicities (bootstrap counts).
CartTree grow_tree(const FeatureMatrix& X, std::span<const double> y,
                   const PresortedFeatures& sorted, std::span<const std::uint32_t> weights,
                   const CartConfig& config, std::mt19937_64& rng);

}  // namespace detail

}  // namespace fscp::models
