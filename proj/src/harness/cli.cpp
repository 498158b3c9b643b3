#include "fscp/harness/cli.hpp"

#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fscp/harness/experiment.hpp"
#include "fscp/ingest.hpp"
#include "fscp/synth.hpp"

namespace fscp::harness {

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::size_t> replications;
  std::vector<std::string> set;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd->add_option("--alpha", o.alpha, "Miscoverage level (overrides the config)");
  cmd->add_option("--replications", o.replications, "Replication count");
  cmd->add_option("--set", o.set, "Extra config override, KEY=VALUE (repeatable)");
}

ExperimentConfig apply(ExperimentConfig c, const Overrides& o, const std::string& out) {
  if (o.seed) c.seed = *o.seed;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.replications) c.replications = *o.replications;
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError(kv, "override must look like KEY=VALUE");
    set_option(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!out.empty()) c.out = out;
  c.validate();
  return c;
}

int do_synth(const std::string& kind, std::size_t n, std::uint64_t seed, double p_zero,
             const std::string& out, std::ostream& os) {
  ClaimsDataset ds;
  ingest::SchemaConfig schema;
  if (kind == "synthetic") {
    ds = synth::generate({n, seed, p_zero});
    schema = ingest::load_schema(bundled_schema_dir() / "synthetic.schema");
  } else if (kind == "mtpl") {
    ds = synth::mtpl_surrogate(n, seed);
    schema = ingest::load_schema(bundled_schema_dir() / "mtpl.schema");
  } else if (kind == "crop") {
    ds = synth::crop_surrogate(n, seed);
    schema = ingest::load_schema(bundled_schema_dir() / "crop.schema");
  } else {
    throw ConfigError("kind", "expected synthetic, mtpl or crop");
  }
  ingest::write_csv(ds, out, schema);
  os << "wrote " << ds.size() << " rows to " << out << " (zero claims "
     << 100.0 * ds.zero_frequency_share() << "%)\n";
  return 0;
}

int do_experiments(const std::vector<std::string>& names, const Overrides& o,
                   const std::string& out, std::ostream& os) {
  std::vector<ExperimentConfig> configs;
  for (const auto& name : names) configs.push_back(apply(load_config(name), o, out));
  const Report report = compare(configs);
  os << to_table(report);
  const auto dir = configs.front().out;
  if (!dir.empty()) {
    write_report(report, configs, dir);
    os << "report written to " << dir.string() << "\n";
  }
  return 0;
}

int do_coverage(const CoverageSettings& s, const std::string& out, std::ostream& os) {
  const CoverageCheck c = validate_coverage(s);
  os << "coverage " << c.coverage << " over " << c.trials << " test points, score pool "
     << c.score_pool << ", band [" << c.band_lo << ", " << c.band_hi << "] +- "
     << 3.0 * c.standard_error << ": " << (c.pass ? "PASS" : "FAIL") << "\n";
  if (!out.empty()) {
    nlohmann::ordered_json j;
    j["alpha"] = s.alpha;
    j["method"] = method_name(s.method);
    j["replications"] = s.replications;
    j["n_train"] = s.n_train;
    j["n_calibration"] = s.n_calibration;
    j["n_test"] = s.n_test;
    j["trees"] = s.trees;
    j["seed"] = s.seed;
    j["coverage"] = c.coverage;
    j["band"] = {c.band_lo, c.band_hi};
    j["standard_error"] = c.standard_error;
    j["pass"] = c.pass;
    write_text(out, j.dump(2) + "\n");
  }
  return c.pass ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage conformal prediction intervals for claim severity", "fscp"};
  app.require_subcommand(0, 1);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a dataset and write it as CSV");
  std::string kind = "synthetic";
  std::size_t n = 10000;
  std::uint64_t synth_seed = 1;
  double p_zero = 0.5;
  std::string synth_out;
  synth_cmd->add_option("--kind", kind, "synthetic, mtpl or crop")->capture_default_str();
  synth_cmd->add_option("--n", n, "Rows")->capture_default_str();
  synth_cmd->add_option("--seed", synth_seed, "Seed")->capture_default_str();
  synth_cmd->add_option("--p-zero", p_zero, "Point-mass weight of the frequency mixture")
      ->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output CSV path")->required();

  auto* run_cmd = app.add_subcommand("run", "Run one experiment config");
  std::string run_config;
  std::string run_out;
  Overrides run_over;
  run_cmd->add_option("--config", run_config, "Config file or bundled config name")->required();
  run_cmd->add_option("--out", run_out, "Output directory for report files");
  add_overrides(run_cmd, run_over);

  auto* cmp_cmd = app.add_subcommand("compare", "Run several configs on the same test rows");
  std::vector<std::string> cmp_configs;
  std::string cmp_out;
  Overrides cmp_over;
  cmp_cmd->add_option("--config", cmp_configs, "Config files or bundled names (repeatable)")
      ->required();
  cmp_cmd->add_option("--out", cmp_out, "Output directory for report files");
  add_overrides(cmp_cmd, cmp_over);

  auto* cov_cmd = app.add_subcommand("validate-coverage", "Monte Carlo check of the coverage band");
  CoverageSettings cov;
  std::string cov_method = "split";
  std::string cov_out;
  cov_cmd->add_option("--alpha", cov.alpha, "Miscoverage level")->capture_default_str();
  cov_cmd->add_option("--replications", cov.replications, "Replications")->capture_default_str();
  cov_cmd->add_option("--n-train", cov.n_train, "Training rows")->capture_default_str();
  cov_cmd->add_option("--n-cal", cov.n_calibration, "Calibration rows")->capture_default_str();
  cov_cmd->add_option("--n-test", cov.n_test, "Test rows per replication")->capture_default_str();
  cov_cmd->add_option("--trees", cov.trees, "Trees per forest")->capture_default_str();
  cov_cmd->add_option("--method", cov_method, "split or oob")->capture_default_str();
  cov_cmd->add_option("--seed", cov.seed, "Master seed")->capture_default_str();
  cov_cmd->add_option("--threads", cov.threads, "Worker threads, 0 = all cores");
  cov_cmd->add_option("--out", cov_out, "Write the result as JSON");

  if (argc <= 1) {
    out << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (synth_cmd->parsed()) return do_synth(kind, n, synth_seed, p_zero, synth_out, out);
    if (run_cmd->parsed()) return do_experiments({run_config}, run_over, run_out, out);
    if (cmp_cmd->parsed()) return do_experiments(cmp_configs, cmp_over, cmp_out, out);
    if (cov_cmd->parsed()) {
      if (cov_method == "split") cov.method = Method::split;
      else if (cov_method == "oob") cov.method = Method::oob;
      else throw ConfigError("method", "expected split or oob");
      return do_coverage(cov, cov_out, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  out << app.help();
  return 2;
}

}  // namespace fscp::harness
