#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fscp/core.hpp"
#include "fscp/models/cart.hpp"
#include "fscp/models/feature_matrix.hpp"

namespace fscp::models {

struct ForestConfig {
  std::size_t n_trees = 1000;
  std::size_t mtry = 0;  // 0 = max(1, floor(p / 3))
  std::size_t min_leaf = 5;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::uint64_t seed = 1;
  // Disabling bootstrap puts every row in bag once for every tree.
  bool bootstrap = true;
  std::size_t threads = 0;  // 0 = hardware concurrency
};

std::size_t default_mtry(std::size_t n_features);

/// Per-tree in-bag multiplicities. counts(j)[i] is how often training row i
/// was drawn into the bootstrap sample of tree j; each sample has size n.
class BootstrapLedger {
 public:
  BootstrapLedger() = default;
  BootstrapLedger(std::size_t n_rows, std::vector<std::vector<std::uint32_t>> counts);

  /// Build from explicit bootstrap draws (row indices, 0-based).
  static BootstrapLedger from_draws(std::size_t n_rows,
                                    const std::vector<std::vector<std::size_t>>& draws);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_trees() const { return counts_.size(); }
  std::span<const std::uint32_t> counts(std::size_t tree) const { return counts_.at(tree); }
  bool in_bag(std::size_t tree, std::size_t row) const { return counts_.at(tree).at(row) > 0; }

  /// Trees whose bootstrap sample excludes `row`, ascending.
  std::vector<std::size_t> oob_trees(std::size_t row) const;

  /// Fraction of (row, tree) pairs where the row is out of bag.
  double oob_fraction() const;

  friend bool operator==(const BootstrapLedger&, const BootstrapLedger&) = default;

 private:
  std::size_t n_rows_ = 0;
  std::vector<std::vector<std::uint32_t>> counts_;
};

class NoOobTrees : public Error {
 public:
  explicit NoOobTrees(std::size_t row, const std::string& forest = {});
  std::size_t row() const { return row_; }
  const std::string& forest() const { return forest_; }

 private:
  std::size_t row_;
  std::string forest_;
};

/// Bagged CART ensemble with its bootstrap ledger, so out-of-bag sub-forests
/// can be queried after training.
class Forest final : public Regressor {
 public:
  Forest(std::vector<CartTree> trees, BootstrapLedger ledger, std::size_t mtry);

  /// Mean of all tree predictions.
  double predict(std::span<const double> x) const override;
  std::size_t arity() const override;

  std::size_t n_trees() const { return trees_.size(); }
  std::size_t mtry() const { return mtry_; }
  const std::vector<CartTree>& trees() const { return trees_; }
  const BootstrapLedger& ledger() const { return ledger_; }

  std::vector<std::size_t> oob_indices(std::size_t row) const { return ledger_.oob_trees(row); }

  /// Mean prediction of the trees for which training row `row` was out of
  /// bag. Throws NoOobTrees when that sub-forest is empty.
  double oob_predict(std::size_t row, std::span<const double> x) const;

  /// oob_predict for every training row; X must be the training matrix.
  std::vector<double> oob_predict_all(const FeatureMatrix& X) const;

 private:
  std::vector<CartTree> trees_;
  BootstrapLedger ledger_;
  std::size_t mtry_;
};

/// Each tree is grown on an independent bootstrap resample drawn from its
/// own RNG stream derived from config.seed, so the result does not depend on
/// the thread schedule.
Forest fit_forest(const FeatureMatrix& X, std::span<const double> y, const ForestConfig& config);

/// Grow trees on caller-supplied in-bag multiplicities.
Forest fit_forest(const FeatureMatrix& X, std::span<const double> y, const ForestConfig& config,
                  BootstrapLedger ledger);

}  // namespace fscp::models
