#include "fscp/harness/report.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "fscp/ingest.hpp"

namespace fscp::harness {

using nlohmann::ordered_json;

Metrics evaluate(std::span<const PredictionInterval> intervals, std::span<const double> truths) {
  Metrics m;
  m.coverage = empirical_coverage(intervals, truths);
  m.average_width = average_width(intervals);
  std::vector<double> centers;
  centers.reserve(intervals.size());
  std::size_t clipped = 0;
  for (const auto& iv : intervals) {
    centers.push_back(iv.center);
    if (iv.clipped_at_zero) ++clipped;
  }
  m.rmse = rmse(centers, truths);
  m.clipping_rate = static_cast<double>(clipped) / static_cast<double>(intervals.size());
  return m;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["coverage"] = m.coverage;
  j["average_width"] = m.average_width;
  j["rmse"] = m.rmse;
  j["clipping_rate"] = m.clipping_rate;
  return j;
}

}  // namespace

std::string to_json(const Report& r) {
  ordered_json j;
  j["seed"] = r.seed;
  j["config_digest"] = r.config_digest;
  j["rows"] = {{"total", r.n_rows},
               {"train", r.n_train},
               {"calibration", r.n_calibration},
               {"test", r.n_test}};
  j["zero_frequency_share"] = r.zero_frequency_share;
  j["replications"] = r.replications;
  ordered_json methods = ordered_json::array();
  for (const auto& m : r.methods) {
    ordered_json e;
    e["config"] = m.config_name;
    e["label"] = m.label;
    e["method"] = m.method;
    e["alpha"] = m.alpha;
    e["score_pool"] = m.score_pool;
    e["quantile"] = m.quantile;
    e["metrics"] = metrics_json(m.mean);
    if (m.replicates.size() > 1) {
      ordered_json reps = ordered_json::array();
      for (const auto& rep : m.replicates) reps.push_back(metrics_json(rep));
      e["replicates"] = reps;
    }
    methods.push_back(e);
  }
  j["methods"] = methods;
  return j.dump(2) + "\n";
}

std::string to_table(const Report& r) {
  std::ostringstream o;
  o << "rows " << r.n_rows << " (train " << r.n_train << ", calibration " << r.n_calibration
    << ", test " << r.n_test << "), zero claims " << std::fixed << std::setprecision(2)
    << 100.0 * r.zero_frequency_share << "%, seed " << r.seed << ", replications "
    << r.replications << "\n\n";
  o << std::left << std::setw(28) << "config" << std::setw(30) << "method" << std::right << std::setw(10) << "coverage"
    << std::setw(14) << "avg width" << std::setw(14) << "rmse" << std::setw(10) << "clipped"
    << std::setw(10) << "fit (s)" << "\n";
  for (const auto& m : r.methods) {
    o << std::left << std::setw(28) << m.config_name << std::setw(30) << m.label << std::right << std::setw(9) << std::setprecision(2)
      << 100.0 * m.mean.coverage << "%" << std::setw(14) << m.mean.average_width << std::setw(14)
      << m.mean.rmse << std::setw(9) << 100.0 * m.mean.clipping_rate << "%" << std::setw(10)
      << std::setprecision(1) << m.fit_seconds << "\n";
  }
  return o.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("write to " + path.string() + " failed");
}

void emit_plot_data(const MethodResult& result, std::size_t sample_size,
                    const std::filesystem::path& csv_path,
                    const std::filesystem::path& summary_path) {
  const auto& b = result.batch;
  if (sample_size > b.intervals.size()) {
    throw Error("plot sample size " + std::to_string(sample_size) + " exceeds the " +
                std::to_string(b.intervals.size()) + " test rows");
  }
  std::ostringstream csv;
  csv << "row,lo,hi,center,truth\n";
  for (std::size_t k = 0; k < sample_size; ++k) {
    const auto& iv = b.intervals[k];
    csv << b.rows[k] << ',' << ingest::format_number(iv.lo) << ',' << ingest::format_number(iv.hi)
        << ',' << ingest::format_number(iv.center) << ',' << ingest::format_number(b.truths[k])
        << "\n";
  }
  write_text(csv_path, csv.str());

  ordered_json j;
  j["config"] = result.config_name;
  j["label"] = result.label;
  j["alpha"] = result.alpha;
  j["rows"] = sample_size;
  j["metrics"] = metrics_json(result.mean);
  write_text(summary_path, j.dump(2) + "\n");
}

}  // namespace fscp::harness
