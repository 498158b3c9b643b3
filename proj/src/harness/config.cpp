#include "fscp/harness/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fscp::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a nonnegative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

conformal::ModelChoice to_choice(const std::string& key, const std::string& v) {
  if (v == "forest") return conformal::ModelChoice::forest;
  if (v == "glm" || v == "gamma" || v == "poisson") return conformal::ModelChoice::glm;
  throw ConfigError(key, "expected forest or glm, got '" + v + "'");
}

const char* choice_name(conformal::ModelChoice c, const char* glm) {
  return c == conformal::ModelChoice::forest ? "forest" : glm;
}

std::string num(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

ConfigError::ConfigError(const std::string& key, const std::string& what)
    : Error("config key '" + key + "': " + what), key_(key) {}

const char* source_name(Source s) {
  switch (s) {
    case Source::synthetic: return "synthetic";
    case Source::csv: return "csv";
    case Source::mtpl_surrogate: return "mtpl_surrogate";
    case Source::crop_surrogate: return "crop_surrogate";
  }
  return "synthetic";
}

const char* method_name(Method m) {
  switch (m) {
    case Method::split: return "split";
    case Method::oob: return "oob";
    case Method::bootstrap: return "bootstrap";
  }
  return "split";
}

std::string ExperimentConfig::label() const {
  switch (method) {
    case Method::oob:
      return "oob forest";
    case Method::bootstrap:
      return "bootstrap gamma";
    case Method::split:
      break;
  }
  return std::string("split ") + choice_name(models.frequency, "poisson") + "/" +
         choice_name(models.severity, "gamma") + "/" + choice_name(models.variability, "gamma");
}

void ExperimentConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha", "must lie strictly in (0, 1)");
  const double sum = proportions.train + proportions.calibration + proportions.test;
  if (!(proportions.train > 0.0 && proportions.calibration > 0.0 && proportions.test > 0.0) ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("train", "split proportions must be positive and sum to 1");
  }
  if (method == Method::oob) {
    if (models.frequency != conformal::ModelChoice::forest ||
        models.severity != conformal::ModelChoice::forest ||
        models.variability != conformal::ModelChoice::forest) {
      throw ConfigError("method", "oob requires forest models for every stage");
    }
  }
  if (method == Method::bootstrap && models.severity != conformal::ModelChoice::glm) {
    throw ConfigError("severity", "bootstrap requires the gamma GLM severity stage");
  }
  if (method == Method::bootstrap && n_boot < 2) {
    throw ConfigError("n_boot", "insufficient bootstrap draws");
  }
  if (source == Source::csv && (csv.empty() || schema.empty())) {
    throw ConfigError(csv.empty() ? "csv" : "schema", "csv source needs both csv and schema");
  }
  if (source != Source::csv && n < 3) throw ConfigError("n", "must be at least 3");
  if (!(p_zero >= 0.0 && p_zero <= 1.0)) throw ConfigError("p_zero", "must lie in [0, 1]");
  if (frequency_trees == 0 || severity_trees == 0 || variability_trees == 0) {
    throw ConfigError("trees", "must be at least 1");
  }
  if (min_leaf == 0) throw ConfigError("min_leaf", "must be at least 1");
  if (replications == 0) throw ConfigError("replications", "must be at least 1");
  if (glm_max_iter < 1) throw ConfigError("glm_max_iter", "must be at least 1");
  if (!(glm_tol > 0.0)) throw ConfigError("glm_tol", "must be positive");
}

void set_option(ExperimentConfig& c, const std::string& key, const std::string& v) {
  if (key == "name") {
    c.name = v;
  } else if (key == "source") {
    if (v == "synthetic") c.source = Source::synthetic;
    else if (v == "csv") c.source = Source::csv;
    else if (v == "mtpl_surrogate") c.source = Source::mtpl_surrogate;
    else if (v == "crop_surrogate") c.source = Source::crop_surrogate;
    else throw ConfigError(key, "unknown source '" + v + "'");
  } else if (key == "n") {
    c.n = to_size(key, v);
  } else if (key == "p_zero") {
    c.p_zero = to_double(key, v);
  } else if (key == "csv") {
    c.csv = v;
  } else if (key == "schema") {
    c.schema = v;
  } else if (key == "train") {
    c.proportions.train = to_double(key, v);
  } else if (key == "calibration") {
    c.proportions.calibration = to_double(key, v);
  } else if (key == "test") {
    c.proportions.test = to_double(key, v);
  } else if (key == "seed") {
    c.seed = to_size(key, v);
  } else if (key == "alpha") {
    c.alpha = to_double(key, v);
  } else if (key == "method") {
    if (v == "split") c.method = Method::split;
    else if (v == "oob") c.method = Method::oob;
    else if (v == "bootstrap") c.method = Method::bootstrap;
    else throw ConfigError(key, "unknown method '" + v + "'");
  } else if (key == "frequency") {
    c.models.frequency = to_choice(key, v);
  } else if (key == "severity") {
    c.models.severity = to_choice(key, v);
  } else if (key == "variability") {
    c.models.variability = to_choice(key, v);
  } else if (key == "trees") {
    c.frequency_trees = c.severity_trees = c.variability_trees = to_size(key, v);
  } else if (key == "frequency_trees") {
    c.frequency_trees = to_size(key, v);
  } else if (key == "severity_trees") {
    c.severity_trees = to_size(key, v);
  } else if (key == "variability_trees") {
    c.variability_trees = to_size(key, v);
  } else if (key == "mtry") {
    c.mtry = to_size(key, v);
  } else if (key == "min_leaf") {
    c.min_leaf = to_size(key, v);
  } else if (key == "max_depth") {
    c.max_depth = to_size(key, v);
  } else if (key == "threads") {
    c.threads = to_size(key, v);
  } else if (key == "glm_max_iter") {
    c.glm_max_iter = static_cast<int>(to_size(key, v));
  } else if (key == "glm_tol") {
    c.glm_tol = to_double(key, v);
  } else if (key == "oob_positive_only") {
    c.oob_positive_only = to_bool(key, v);
  } else if (key == "n_boot") {
    c.n_boot = to_size(key, v);
  } else if (key == "replications") {
    c.replications = to_size(key, v);
  } else if (key == "plot_rows") {
    c.plot_rows = to_size(key, v);
  } else if (key == "out") {
    c.out = v;
  } else {
    throw ConfigError(key, "unknown key");
  }
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, "line " + std::to_string(line_no) + " is not 'key = value'");
    }
    set_option(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (!base_dir.empty()) {
    if (!c.csv.empty() && c.csv.is_relative()) c.csv = base_dir / c.csv;
    if (!c.schema.empty() && c.schema.is_relative()) c.schema = base_dir / c.schema;
  }
  c.validate();
  return c;
}

std::filesystem::path bundled_config_dir() { return FSCP_CONFIG_DIR; }
std::filesystem::path bundled_schema_dir() { return FSCP_SCHEMA_DIR; }

ExperimentConfig load_config(const std::string& name_or_path) {
  std::filesystem::path path = name_or_path;
  if (!std::filesystem::exists(path)) {
    path = bundled_config_dir() / (name_or_path + ".cfg");
    if (!std::filesystem::exists(path)) {
      throw ConfigError("config", "no file or bundled config named '" + name_or_path + "'");
    }
  }
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string format_config(const ExperimentConfig& c) {
  std::ostringstream o;
  o << "name = " << c.name << "\n";
  o << "source = " << source_name(c.source) << "\n";
  o << "n = " << c.n << "\n";
  o << "p_zero = " << num(c.p_zero) << "\n";
  if (!c.csv.empty()) o << "csv = " << c.csv.string() << "\n";
  if (!c.schema.empty()) o << "schema = " << c.schema.string() << "\n";
  o << "train = " << num(c.proportions.train) << "\n";
  o << "calibration = " << num(c.proportions.calibration) << "\n";
  o << "test = " << num(c.proportions.test) << "\n";
  o << "seed = " << c.seed << "\n";
  o << "alpha = " << num(c.alpha) << "\n";
  o << "method = " << method_name(c.method) << "\n";
  o << "frequency = " << choice_name(c.models.frequency, "glm") << "\n";
  o << "severity = " << choice_name(c.models.severity, "glm") << "\n";
  o << "variability = " << choice_name(c.models.variability, "glm") << "\n";
  o << "frequency_trees = " << c.frequency_trees << "\n";
  o << "severity_trees = " << c.severity_trees << "\n";
  o << "variability_trees = " << c.variability_trees << "\n";
  o << "mtry = " << c.mtry << "\n";
  o << "min_leaf = " << c.min_leaf << "\n";
  o << "max_depth = " << c.max_depth << "\n";
  o << "threads = " << c.threads << "\n";
  o << "glm_max_iter = " << c.glm_max_iter << "\n";
  o << "glm_tol = " << num(c.glm_tol) << "\n";
  o << "oob_positive_only = " << (c.oob_positive_only ? "true" : "false") << "\n";
  o << "n_boot = " << c.n_boot << "\n";
  o << "replications = " << c.replications << "\n";
  o << "plot_rows = " << c.plot_rows << "\n";
  if (!c.out.empty()) o << "out = " << c.out.string() << "\n";
  return o.str();
}

}  // namespace fscp::harness
