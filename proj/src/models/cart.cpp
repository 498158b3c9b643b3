#include "fscp/models/cart.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fscp/core.hpp"

namespace fscp::models {

CartTree::CartTree(std::size_t arity, std::vector<Node> nodes)
    : arity_(arity), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw Error("tree has no nodes");
}

std::size_t CartTree::leaf_of(std::span<const double> x) const {
  std::size_t k = 0;
  while (nodes_[k].feature >= 0) {
    const Node& nd = nodes_[k];
    k = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
  }
  return k;
}

double CartTree::predict(std::span<const double> x) const {
  check_arity(x);
  return nodes_[leaf_of(x)].value;
}

std::size_t CartTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

std::size_t CartTree::depth() const {
  std::uint32_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

double training_cost(const CartTree& tree, const FeatureMatrix& X, std::span<const double> y) {
  double sse = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double e = y[i] - tree.predict(X.row(i));
    sse += e * e;
  }
  return sse;
}

namespace detail {

PresortedFeatures::PresortedFeatures(const FeatureMatrix& X)
    : ranks_(X.cols()), unique_(X.cols()) {
  const std::size_t n = X.rows();
  std::vector<std::uint32_t> order(n);
  for (std::size_t f = 0; f < X.cols(); ++f) {
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
    auto& rk = ranks_[f];
    auto& uq = unique_[f];
    rk.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) {
      const double v = X(order[k], f);
      if (uq.empty() || v != uq.back()) uq.push_back(v);
      rk[order[k]] = static_cast<std::uint32_t>(uq.size() - 1);
    }
  }
}

namespace {

struct Candidate {
  double gain = 0.0;
  std::int32_t feature = -1;
  double threshold = 0.0;
};

class TreeGrower {
 public:
  TreeGrower(const FeatureMatrix& X, std::span<const double> y, const PresortedFeatures& sorted,
             std::span<const std::uint32_t> weights, const CartConfig& config,
             std::mt19937_64& rng)
      : X_(X), y_(y), sorted_(sorted), weights_(weights), config_(config), rng_(rng) {
    const std::size_t p = X.cols();
    mtry_ = config.mtry == 0 ? p : std::min(config.mtry, p);
    min_leaf_ = std::max<std::size_t>(1, config.min_leaf);
    features_.resize(p);
    std::iota(features_.begin(), features_.end(), 0u);
    std::size_t max_unique = 0;
    for (std::size_t f = 0; f < p; ++f) {
      max_unique = std::max(max_unique, sorted.unique_values(f).size());
    }
    bin_weight_.assign(max_unique, 0.0);
    bin_sum_.assign(max_unique, 0.0);
    for (std::uint32_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0) samples_.push_back(i);
    }
  }

  CartTree grow() {
    struct Pending {
      std::uint32_t node;
      std::size_t start;
      std::size_t end;
      std::uint32_t depth;
    };
    nodes_.emplace_back();
    std::vector<Pending> stack{{0, 0, samples_.size(), 0}};
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      const std::size_t mid = split_node(job.node, job.start, job.end, job.depth);
      if (mid == 0) continue;
      const auto left = static_cast<std::uint32_t>(nodes_.size());
      nodes_.emplace_back();
      nodes_.emplace_back();
      nodes_[job.node].left = left;
      nodes_[job.node].right = left + 1;
      stack.push_back({left + 1, mid, job.end, job.depth + 1});
      stack.push_back({left, job.start, mid, job.depth + 1});
    }
    return CartTree(X_.cols(), std::move(nodes_));
  }

 private:
  // Returns the partition point of [start, end) when the node is split, or 0
  // when it becomes a leaf.
  std::size_t split_node(std::uint32_t id, std::size_t start, std::size_t end,
                         std::uint32_t depth) {
    const std::size_t s = end - start;
    double w_total = 0.0;
    double sum = 0.0;
    double y_min = y_[samples_[start]];
    double y_max = y_min;
    for (std::size_t k = start; k < end; ++k) {
      const std::uint32_t r = samples_[k];
      w_total += weights_[r];
      sum += weights_[r] * y_[r];
      y_min = std::min(y_min, y_[r]);
      y_max = std::max(y_max, y_[r]);
    }
    const double mean = sum / w_total;
    CartTree::Node& node = nodes_[id];
    node.value = mean;
    node.count = static_cast<std::uint32_t>(w_total);
    node.depth = depth;

    const auto min_leaf = static_cast<double>(min_leaf_);
    if (w_total < 2.0 * min_leaf) return 0;
    if (config_.max_depth != 0 && depth >= config_.max_depth) return 0;
    if (y_min == y_max) return 0;

    centered_.resize(s);
    local_w_.resize(s);
    double sse = 0.0;
    for (std::size_t k = 0; k < s; ++k) {
      const std::uint32_t r = samples_[start + k];
      centered_[k] = y_[r] - mean;
      local_w_[k] = weights_[r];
      sse += local_w_[k] * centered_[k] * centered_[k];
    }

    // Partial Fisher-Yates draw of mtry distinct features.
    const std::size_t p = features_.size();
    if (mtry_ < p) {
      for (std::size_t k = 0; k < mtry_; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, p - 1);
        std::swap(features_[k], features_[pick(rng_)]);
      }
    } else {
      std::iota(features_.begin(), features_.end(), 0u);
    }

    Candidate best;
    for (std::size_t t = 0; t < mtry_; ++t) {
      const std::uint32_t f = features_[t];
      const std::size_t n_unique = sorted_.unique_values(f).size();
      if (n_unique < 2) continue;
      const double log_s = std::log2(static_cast<double>(s) + 1.0);
      if (static_cast<double>(n_unique) <= static_cast<double>(s) * log_s) {
        scan_by_counting(f, start, w_total, min_leaf, best);
      } else {
        scan_by_sorting(f, start, s, w_total, min_leaf, best);
      }
    }
    if (best.feature < 0 || !(best.gain > 1e-12 * sse)) return 0;

    node.feature = best.feature;
    node.threshold = best.threshold;
    const auto f = static_cast<std::size_t>(best.feature);
    const auto first = samples_.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = samples_.begin() + static_cast<std::ptrdiff_t>(end);
    const auto cut = std::partition(first, last, [&](std::uint32_t r) {
      return X_(r, f) <= best.threshold;
    });
    return static_cast<std::size_t>(cut - samples_.begin());
  }

  void consider(std::uint32_t f, std::uint32_t rank_lo, std::uint32_t rank_hi, double w_left,
                double sum_left, double w_total, double min_leaf, Candidate& best) const {
    const double w_right = w_total - w_left;
    if (w_left < min_leaf || w_right < min_leaf) return;
    const double gain = sum_left * sum_left * w_total / (w_left * w_right);
    if (gain > best.gain) {
      const auto& u = sorted_.unique_values(f);
      const double a = u[rank_lo];
      const double b = u[rank_hi];
      double thr = a + (b - a) / 2.0;
      if (!(thr < b)) thr = a;
      best = {gain, static_cast<std::int32_t>(f), thr};
    }
  }

  void scan_by_counting(std::uint32_t f, std::size_t start, double w_total, double min_leaf,
                        Candidate& best) {
    const std::size_t n_unique = sorted_.unique_values(f).size();
    for (std::size_t k = 0; k < centered_.size(); ++k) {
      const std::uint32_t rk = sorted_.rank(f, samples_[start + k]);
      bin_weight_[rk] += local_w_[k];
      bin_sum_[rk] += local_w_[k] * centered_[k];
    }
    double w_left = 0.0;
    double sum_left = 0.0;
    std::int64_t prev = -1;
    for (std::uint32_t rk = 0; rk < n_unique; ++rk) {
      if (bin_weight_[rk] == 0.0) continue;
      if (prev >= 0) {
        consider(f, static_cast<std::uint32_t>(prev), rk, w_left, sum_left, w_total, min_leaf,
                 best);
      }
      w_left += bin_weight_[rk];
      sum_left += bin_sum_[rk];
      bin_weight_[rk] = 0.0;
      bin_sum_[rk] = 0.0;
      prev = rk;
    }
  }

  void scan_by_sorting(std::uint32_t f, std::size_t start, std::size_t s, double w_total,
                       double min_leaf, Candidate& best) {
    keyed_.resize(s);
    for (std::size_t k = 0; k < s; ++k) {
      keyed_[k] = {sorted_.rank(f, samples_[start + k]), static_cast<std::uint32_t>(k)};
    }
    std::sort(keyed_.begin(), keyed_.end());
    double w_left = 0.0;
    double sum_left = 0.0;
    for (std::size_t k = 0; k + 1 < s; ++k) {
      const auto [rk, pos] = keyed_[k];
      w_left += local_w_[pos];
      sum_left += local_w_[pos] * centered_[pos];
      const std::uint32_t next = keyed_[k + 1].first;
      if (next != rk) consider(f, rk, next, w_left, sum_left, w_total, min_leaf, best);
    }
  }

  const FeatureMatrix& X_;
  std::span<const double> y_;
  const PresortedFeatures& sorted_;
  std::span<const std::uint32_t> weights_;
  const CartConfig& config_;
  std::mt19937_64& rng_;

  std::size_t mtry_ = 0;
  std::size_t min_leaf_ = 1;
  std::vector<std::uint32_t> samples_;
  std::vector<std::uint32_t> features_;
  std::vector<CartTree::Node> nodes_;
  std::vector<double> centered_;
  std::vector<double> local_w_;
  std::vector<double> bin_weight_;
  std::vector<double> bin_sum_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> keyed_;
};

}  // namespace

CartTree grow_tree(const FeatureMatrix& X, std::span<const double> y,
                   const PresortedFeatures& sorted, std::span<const std::uint32_t> weights,
                   const CartConfig& config, std::mt19937_64& rng) {
  if (y.size() != X.rows() || weights.size() != X.rows()) {
    throw Error("tree inputs have mismatched lengths");
  }
  if (std::all_of(weights.begin(), weights.end(), [](std::uint32_t w) { return w == 0; })) {
    throw Error("tree has no training samples");
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw Error("tree response must be finite");
  }
  return TreeGrower(X, y, sorted, weights, config, rng).grow();
}

}  // namespace detail

CartTree fit_cart(const FeatureMatrix& X, std::span<const double> y, const CartConfig& config,
                  std::mt19937_64& rng) {
  if (X.rows() == 0) throw Error("cannot fit a tree on zero rows");
  const detail::PresortedFeatures sorted(X);
  const std::vector<std::uint32_t> weights(X.rows(), 1);
  return detail::grow_tree(X, y, sorted, weights, config, rng);
}

}  // namespace fscp::models
