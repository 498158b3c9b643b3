#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fscp::models {

/// Dense row-major matrix of encoded numeric features.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(std::size_t cols, std::vector<std::string> names = {});
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                std::vector<std::string> names = {});

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  const std::vector<std::string>& names() const { return names_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  const std::vector<double>& data() const { return data_; }

  void append_row(std::span<const double> values);

  /// Copy with one extra trailing column.
  FeatureMatrix with_column(std::span<const double> values, const std::string& name) const;
  FeatureMatrix select_rows(std::span<const std::size_t> idx) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
  std::vector<std::string> names_;
};

/// Row concatenated with trailing values; used to append a frequency feature.
std::vector<double> extend_row(std::span<const double> x, double extra);

/// A fitted regression function over feature rows of fixed arity.
class Regressor {
 public:
  virtual ~Regressor() = default;

  virtual double predict(std::span<const double> x) const = 0;
  virtual std::size_t arity() const = 0;

  std::vector<double> predict_all(const FeatureMatrix& X) const;

 protected:
  void check_arity(std::span<const double> x) const;
};

using RegressorPtr = std::shared_ptr<const Regressor>;

}  // namespace fscp::models
