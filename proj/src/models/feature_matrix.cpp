#include "fscp/models/feature_matrix.hpp"

#include <cmath>

#include "fscp/core.hpp"

namespace fscp::models {

FeatureMatrix::FeatureMatrix(std::size_t cols, std::vector<std::string> names)
    : cols_(cols), names_(std::move(names)) {
  if (!names_.empty() && names_.size() != cols_) throw Error("feature names do not match arity");
}

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                             std::vector<std::string> names)
    : rows_(rows), cols_(cols), data_(std::move(data)), names_(std::move(names)) {
  if (data_.size() != rows_ * cols_) throw Error("feature matrix data size mismatch");
  if (!names_.empty() && names_.size() != cols_) throw Error("feature names do not match arity");
  for (double v : data_) {
    if (!std::isfinite(v)) throw Error("feature matrix entries must be finite");
  }
}

void FeatureMatrix::append_row(std::span<const double> values) {
  if (values.size() != cols_) throw Error("appended row has wrong arity");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error("feature matrix entries must be finite");
  }
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

FeatureMatrix FeatureMatrix::with_column(std::span<const double> values,
                                         const std::string& name) const {
  if (values.size() != rows_) throw Error("new column length does not match row count");
  std::vector<double> data;
  data.reserve(rows_ * (cols_ + 1));
  for (std::size_t r = 0; r < rows_; ++r) {
    auto x = row(r);
    data.insert(data.end(), x.begin(), x.end());
    data.push_back(values[r]);
  }
  std::vector<std::string> names = names_;
  if (!names.empty() || cols_ == 0) names.push_back(name);
  return FeatureMatrix(rows_, cols_ + 1, std::move(data), std::move(names));
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
  std::vector<double> data;
  data.reserve(idx.size() * cols_);
  for (std::size_t i : idx) {
    if (i >= rows_) throw Error("row index out of range");
    auto x = row(i);
    data.insert(data.end(), x.begin(), x.end());
  }
  return FeatureMatrix(idx.size(), cols_, std::move(data), names_);
}

std::vector<double> extend_row(std::span<const double> x, double extra) {
  std::vector<double> out(x.begin(), x.end());
  out.push_back(extra);
  return out;
}

std::vector<double> Regressor::predict_all(const FeatureMatrix& X) const {
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(X.row(r));
  return out;
}

void Regressor::check_arity(std::span<const double> x) const {
  if (x.size() != arity()) {
    throw Error("feature row arity " + std::to_string(x.size()) + " does not match model arity " +
                std::to_string(arity()));
  }
}

}  // namespace fscp::models
