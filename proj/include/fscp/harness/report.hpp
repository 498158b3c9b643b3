#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fscp/core.hpp"

namespace fscp::harness {

struct Metrics {
  double coverage = 0.0;
  double average_width = 0.0;
  double rmse = 0.0;
  double clipping_rate = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Metrics over one batch of test intervals; the point prediction is each
/// interval's center.
Metrics evaluate(std::span<const PredictionInterval> intervals, std::span<const double> truths);

/// Intervals of the first replication, kept for plot data.
struct IntervalBatch {
  std::vector<std::size_t> rows;  // dataset row ids
  std::vector<PredictionInterval> intervals;
  std::vector<double> truths;
};

struct MethodResult {
  std::string config_name;
  std::string label;
  std::string method;
  double alpha = 0.1;
  Metrics mean;                     // averaged over replications
  std::vector<Metrics> replicates;  // one per replication
  std::size_t score_pool = 0;       // first replication
  double quantile = 0.0;            // first replication
  double fit_seconds = 0.0;         // wall clock; text report only
  IntervalBatch batch;
};

struct Report {
  std::uint64_t seed = 0;
  std::string config_digest;  // hex FNV-1a of the canonical configs
  std::size_t n_rows = 0;
  std::size_t n_train = 0;
  std::size_t n_calibration = 0;
  std::size_t n_test = 0;
  double zero_frequency_share = 0.0;
  std::size_t replications = 1;
  std::vector<MethodResult> methods;
};

std::string fnv1a_hex(const std::string& text);

/// Deterministic JSON: no timing, fixed key order, shortest round-trip numbers.
std::string to_json(const Report& report);
/// Human-readable table, including fit time.
std::string to_table(const Report& report);

void write_text(const std::filesystem::path& path, const std::string& text);

/// CSV `row,lo,hi,center,truth` for the first sample_size rows of the batch,
/// and a JSON metrics summary next to it.
void emit_plot_data(const MethodResult& result, std::size_t sample_size,
                    const std::filesystem::path& csv_path,
                    const std::filesystem::path& summary_path);

}  // namespace fscp::harness
