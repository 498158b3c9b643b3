#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "fscp/conformal.hpp"
#include "fscp/core.hpp"

namespace fscp::harness {

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class Source { synthetic, csv, mtpl_surrogate, crop_surrogate };
enum class Method { split, oob, bootstrap };

const char* source_name(Source s);
const char* method_name(Method m);

struct ExperimentConfig {
  std::string name = "experiment";

  Source source = Source::synthetic;
  std::size_t n = 10000;  // synthetic and surrogate sources
  double p_zero = 0.5;
  std::filesystem::path csv;
  std::filesystem::path schema;

  SplitProportions proportions;
  std::uint64_t seed = 1;
  double alpha = 0.1;

  Method method = Method::split;
  conformal::TwoStageChoices models;

  std::size_t frequency_trees = 1000;
  std::size_t severity_trees = 1000;
  std::size_t variability_trees = 1000;
  std::size_t mtry = 0;
  std::size_t min_leaf = 5;
  std::size_t max_depth = 0;
  std::size_t threads = 0;
  int glm_max_iter = 50;
  double glm_tol = 1e-8;
  bool oob_positive_only = false;
  std::size_t n_boot = 1000;

  std::size_t replications = 1;
  std::size_t plot_rows = 50;
  std::filesystem::path out;

  /// Short label such as "split forest/forest/forest".
  std::string label() const;
  void validate() const;
};

/// Key-value text, one `key = value` per line, '#' comments. Unknown keys
/// and malformed values raise ConfigError naming the key. Relative csv and
/// schema paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = {});

/// A path to a file, or the name of a bundled config (e.g. "synthetic_split_rf").
ExperimentConfig load_config(const std::string& name_or_path);

/// Canonical text form; parse_config(format_config(c)) == c field by field.
std::string format_config(const ExperimentConfig& config);

/// Apply a single `key = value` override.
void set_option(ExperimentConfig& config, const std::string& key, const std::string& value);

std::filesystem::path bundled_config_dir();
std::filesystem::path bundled_schema_dir();

}  // namespace fscp::harness
