#include "fscp/models/forest.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "fscp/parallel.hpp"

namespace fscp::models {

namespace {

std::size_t resolve_mtry(const ForestConfig& config, std::size_t p) {
  if (config.mtry == 0) return default_mtry(p);
  return std::min(config.mtry, std::max<std::size_t>(p, 1));
}

}  // namespace

std::size_t default_mtry(std::size_t n_features) {
  return std::max<std::size_t>(1, n_features / 3);
}

BootstrapLedger::BootstrapLedger(std::size_t n_rows,
                                 std::vector<std::vector<std::uint32_t>> counts)
    : n_rows_(n_rows), counts_(std::move(counts)) {
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    if (counts_[j].size() != n_rows_) throw Error("in-bag record has wrong row count");
    const std::uint64_t total =
        std::accumulate(counts_[j].begin(), counts_[j].end(), std::uint64_t{0});
    if (total != n_rows_) {
      throw Error("bootstrap sample " + std::to_string(j) + " has size " + std::to_string(total) +
                  ", expected " + std::to_string(n_rows_));
    }
  }
}

BootstrapLedger BootstrapLedger::from_draws(std::size_t n_rows,
                                            const std::vector<std::vector<std::size_t>>& draws) {
  std::vector<std::vector<std::uint32_t>> counts(draws.size(),
                                                 std::vector<std::uint32_t>(n_rows, 0));
  for (std::size_t j = 0; j < draws.size(); ++j) {
    for (std::size_t i : draws[j]) {
      if (i >= n_rows) throw Error("bootstrap draw out of range");
      ++counts[j][i];
    }
  }
  return BootstrapLedger(n_rows, std::move(counts));
}

std::vector<std::size_t> BootstrapLedger::oob_trees(std::size_t row) const {
  if (row >= n_rows_) throw Error("row index out of range for in-bag record");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < counts_.size(); ++j) {
    if (counts_[j][row] == 0) out.push_back(j);
  }
  return out;
}

double BootstrapLedger::oob_fraction() const {
  if (n_rows_ == 0 || counts_.empty()) return 0.0;
  std::size_t oob = 0;
  for (const auto& c : counts_) oob += static_cast<std::size_t>(std::count(c.begin(), c.end(), 0u));
  return static_cast<double>(oob) / static_cast<double>(n_rows_ * counts_.size());
}

NoOobTrees::NoOobTrees(std::size_t row, const std::string& forest)
    : Error("no OOB trees for unit " + std::to_string(row) +
            (forest.empty() ? "" : " in the " + forest + " forest") + "; increase B"),
      row_(row),
      forest_(forest) {}

Forest::Forest(std::vector<CartTree> trees, BootstrapLedger ledger, std::size_t mtry)
    : trees_(std::move(trees)), ledger_(std::move(ledger)), mtry_(mtry) {
  if (trees_.empty()) throw Error("forest needs at least one tree");
  if (ledger_.n_trees() != trees_.size()) throw Error("in-bag record does not match tree count");
}

std::size_t Forest::arity() const { return trees_.front().arity(); }

double Forest::predict(std::span<const double> x) const {
  check_arity(x);
  double total = 0.0;
  for (const auto& t : trees_) total += t.nodes()[t.leaf_of(x)].value;
  return total / static_cast<double>(trees_.size());
}

double Forest::oob_predict(std::size_t row, std::span<const double> x) const {
  check_arity(x);
  if (row >= ledger_.n_rows()) throw Error("row index out of range for in-bag record");
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < trees_.size(); ++j) {
    if (ledger_.counts(j)[row] != 0) continue;
    total += trees_[j].nodes()[trees_[j].leaf_of(x)].value;
    ++used;
  }
  if (used == 0) throw NoOobTrees(row);
  return total / static_cast<double>(used);
}

std::vector<double> Forest::oob_predict_all(const FeatureMatrix& X) const {
  if (X.rows() != ledger_.n_rows()) throw Error("OOB prediction needs the training matrix");
  if (X.cols() != arity()) throw Error("OOB prediction arity mismatch");
  const std::size_t n = X.rows();
  std::vector<double> total(n, 0.0);
  std::vector<std::size_t> used(n, 0);
  for (std::size_t j = 0; j < trees_.size(); ++j) {
    const auto counts = ledger_.counts(j);
    const auto& tree = trees_[j];
    for (std::size_t i = 0; i < n; ++i) {
      if (counts[i] != 0) continue;
      total[i] += tree.nodes()[tree.leaf_of(X.row(i))].value;
      ++used[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (used[i] == 0) throw NoOobTrees(i);
    total[i] /= static_cast<double>(used[i]);
  }
  return total;
}

Forest fit_forest(const FeatureMatrix& X, std::span<const double> y, const ForestConfig& config) {
  if (config.n_trees == 0) throw Error("forest needs at least one tree");
  const std::size_t n = X.rows();
  if (n == 0) throw Error("cannot fit a forest on zero rows");
  if (y.size() != n) throw Error("forest response length does not match rows");

  const detail::PresortedFeatures sorted(X);
  const CartConfig cart{config.min_leaf, config.max_depth, resolve_mtry(config, X.cols())};
  std::vector<std::vector<std::uint32_t>> counts(config.n_trees);
  std::vector<std::optional<CartTree>> grown(config.n_trees);

  parallel_for(config.n_trees, resolve_threads(config.threads, config.n_trees),
               [&](std::size_t j) {
                 std::mt19937_64 rng(derive_seed(config.seed, j));
                 auto& c = counts[j];
                 c.assign(n, config.bootstrap ? 0u : 1u);
                 if (config.bootstrap) {
                   std::uniform_int_distribution<std::size_t> draw(0, n - 1);
                   for (std::size_t k = 0; k < n; ++k) ++c[draw(rng)];
                 }
                 grown[j].emplace(detail::grow_tree(X, y, sorted, c, cart, rng));
               });

  std::vector<CartTree> trees;
  trees.reserve(config.n_trees);
  for (auto& t : grown) trees.push_back(std::move(*t));
  return Forest(std::move(trees), BootstrapLedger(n, std::move(counts)), cart.mtry);
}

Forest fit_forest(const FeatureMatrix& X, std::span<const double> y, const ForestConfig& config,
                  BootstrapLedger ledger) {
  const std::size_t n = X.rows();
  if (ledger.n_rows() != n) throw Error("in-bag record does not match training rows");
  if (ledger.n_trees() == 0) throw Error("forest needs at least one tree");
  if (y.size() != n) throw Error("forest response length does not match rows");

  const detail::PresortedFeatures sorted(X);
  const CartConfig cart{config.min_leaf, config.max_depth, resolve_mtry(config, X.cols())};
  std::vector<std::optional<CartTree>> grown(ledger.n_trees());
  parallel_for(ledger.n_trees(), resolve_threads(config.threads, ledger.n_trees()),
               [&](std::size_t j) {
                 std::mt19937_64 rng(derive_seed(config.seed, j));
                 grown[j].emplace(detail::grow_tree(X, y, sorted, ledger.counts(j), cart, rng));
               });
  std::vector<CartTree> trees;
  trees.reserve(grown.size());
  for (auto& t : grown) trees.push_back(std::move(*t));
  return Forest(std::move(trees), std::move(ledger), cart.mtry);
}

}  // namespace fscp::models
