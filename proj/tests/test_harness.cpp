#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fscp/harness/cli.hpp"
#include "fscp/harness/config.hpp"
#include "fscp/harness/experiment.hpp"
#include "fscp/harness/report.hpp"
#include "fscp/ingest.hpp"
#include "fscp/synth.hpp"

using namespace fscp;
using namespace fscp::harness;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("fscp_test_harness_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr,
        std::string* err_text = nullptr) {
  args.insert(args.begin(), "fscp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

ExperimentConfig small(const std::string& base, std::size_t n, std::size_t trees,
                       std::uint64_t seed) {
  auto c = load_config(base);
  c.n = n;
  c.seed = seed;
  c.frequency_trees = c.severity_trees = c.variability_trees = trees;
  c.n_boot = 200;
  return c;
}

std::string config_key(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

// ---- configuration --------------------------------------------------------

TEST_CASE("config text round-trips") {
  const auto c = parse_config(
      "# comment\nname = demo\nsource = mtpl_surrogate\nn = 1234\nseed = 9\nalpha = 0.2\n"
      "method = split\nfrequency = glm\nseverity = glm\nvariability = forest\ntrees = 40\n"
      "severity_trees = 50\nmin_leaf = 3\nmtry = 2\nmax_depth = 7\nreplications = 3\n"
      "train = 0.6\ncalibration = 0.2\ntest = 0.2\nplot_rows = 10\n");
  CHECK(c.name == "demo");
  CHECK(c.source == Source::mtpl_surrogate);
  CHECK(c.n == 1234);
  CHECK(c.frequency_trees == 40);
  CHECK(c.severity_trees == 50);
  CHECK(c.models.frequency == conformal::ModelChoice::glm);
  CHECK(c.models.variability == conformal::ModelChoice::forest);
  CHECK(c.proportions.train == 0.6);
  const auto again = parse_config(format_config(c));
  CHECK(format_config(again) == format_config(c));
  CHECK(again.max_depth == 7);
  CHECK(again.replications == 3);
  CHECK(c.label() == "split poisson/gamma/forest");
}

TEST_CASE("config errors name the key") {
  CHECK(config_key("alpha = 1.5\n") == "alpha");
  CHECK(config_key("alpha = abc\n") == "alpha");
  CHECK(config_key("colour = red\n") == "colour");
  CHECK(config_key("method = jackknife\n") == "method");
  CHECK(config_key("method = oob\nseverity = glm\n") == "method");
  CHECK(config_key("method = bootstrap\nseverity = forest\n") == "severity");
  CHECK(config_key("method = bootstrap\nseverity = glm\nn_boot = 1\n") == "n_boot");
  CHECK(config_key("train = 0.7\n") == "train");
  CHECK(config_key("trees = 0\n") == "trees");
  CHECK(config_key("source = csv\n") == "csv");
  try {
    parse_config("seed = -3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("config key 'seed': ", 0) == 0);
  }
  CHECK_THROWS_AS(load_config("no_such_config"), ConfigError);
}

TEST_CASE("bundled configs load and validate") {
  for (const auto& entry : std::filesystem::directory_iterator(bundled_config_dir())) {
    if (entry.path().extension() != ".cfg") continue;
    CAPTURE(entry.path().string());
    const auto c = load_config(entry.path().string());
    CHECK_NOTHROW(c.validate());
    CHECK(c.name == entry.path().stem().string());
    if (c.source == Source::csv) {
      CHECK(c.csv.is_absolute());
      CHECK(std::filesystem::exists(c.schema));
    }
  }
  const auto rf = load_config("synthetic_split_rf");
  CHECK(rf.n == 10000);
  CHECK(rf.alpha == 0.1);
  CHECK(rf.frequency_trees == 1000);
}

// ---- metrics and reports --------------------------------------------------

TEST_CASE("evaluate uses interval centers as point predictions") {
  const std::vector<PredictionInterval> iv = {PredictionInterval::zero_clipped(10, 3),
                                              PredictionInterval::zero_clipped(2, 5),
                                              PredictionInterval::symmetric(4, 1)};
  const std::vector<double> truth = {12, 8, 4};
  const auto m = evaluate(iv, truth);
  CHECK(m.coverage == doctest::Approx(2.0 / 3));
  CHECK(m.average_width == doctest::Approx((6 + 7 + 2) / 3.0));
  CHECK(m.rmse == doctest::Approx(std::sqrt((4 + 36 + 0) / 3.0)));
  CHECK(m.clipping_rate == doctest::Approx(1.0 / 3));
}

TEST_CASE("type 7 sample quantiles") {
  const std::vector<double> v = {3, 1, 4, 1, 5, 9, 2, 6};
  // Sorted: 1 1 2 3 4 5 6 9; h = (n - 1) p.
  CHECK(sample_quantile(v, 0.0) == 1);
  CHECK(sample_quantile(v, 1.0) == 9);
  CHECK(sample_quantile(v, 0.5) == doctest::Approx(3.5));
  CHECK(sample_quantile(v, 0.1) == doctest::Approx(1.0 + 0.7 * 0.0));
  CHECK(sample_quantile(v, 0.9) == doctest::Approx(6 + 0.3 * 3));
  CHECK(sample_quantile({7.0}, 0.3) == 7.0);
  CHECK_THROWS_AS(sample_quantile({}, 0.5), Error);
}

TEST_CASE("replication seeds") {
  CHECK(replication_seed(5, 0) == 5);
  CHECK(replication_seed(5, 1) == derive_seed(5, 1));
  CHECK(replication_seed(5, 1) != replication_seed(5, 2));
}

TEST_CASE("reports are byte-identical for the same config and seed") {
  auto c = small("synthetic_split_rf", 1500, 30, 4);
  const auto a = run(c);
  const auto b = run(c);
  CHECK(to_json(a) == to_json(b));
  c.threads = 1;
  CHECK(to_json(run(c)) == to_json(a));
  c.seed = 5;
  CHECK(to_json(run(c)) != to_json(a));

  const auto j = nlohmann::json::parse(to_json(a));
  CHECK(j["seed"] == 4);
  CHECK(j["rows"]["total"] == 1500);
  CHECK(j["methods"].size() == 1);
  CHECK(j["methods"][0]["score_pool"] == a.n_calibration);
  CHECK(to_json(a).find("seconds") == std::string::npos);
  CHECK(to_table(a).find("fit") != std::string::npos);

  for (const auto& base : {"synthetic_oob_rf", "synthetic_bootstrap_gamma", "synthetic_split_gamma"}) {
    CAPTURE(base);
    const auto d = small(base, 1000, 30, 6);
    CHECK(to_json(run(d)) == to_json(run(d)));
  }
}

TEST_CASE("plot data") {
  auto c = small("synthetic_split_rf", 1000, 20, 2);
  const auto report = run(c);
  const auto& m = report.methods[0];
  REQUIRE(m.batch.intervals.size() == 250);
  const auto dir = temp_dir("plot");

  emit_plot_data(m, 50, dir / "a.csv", dir / "a.json");
  const auto text = slurp(dir / "a.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 51);
  CHECK(text.rfind("row,lo,hi,center,truth\n", 0) == 0);
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  const auto cells = ingest::split_record(line, ',');
  REQUIRE(cells.size() == 5);
  CHECK(std::stoul(cells[0]) == m.batch.rows[0]);
  CHECK(std::stod(cells[1]) == m.batch.intervals[0].lo);
  CHECK(std::stod(cells[4]) == m.batch.truths[0]);
  const auto summary = nlohmann::json::parse(slurp(dir / "a.json"));
  CHECK(summary["rows"] == 50);

  emit_plot_data(m, 50, dir / "b.csv", dir / "b.json");
  CHECK(slurp(dir / "b.csv") == text);
  CHECK(slurp(dir / "b.json") == slurp(dir / "a.json"));

  emit_plot_data(m, 0, dir / "z.csv", dir / "z.json");
  CHECK(slurp(dir / "z.csv") == "row,lo,hi,center,truth\n");

  CHECK_THROWS_AS(emit_plot_data(m, 251, dir / "x.csv", dir / "x.json"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("write_report files") {
  const std::vector<ExperimentConfig> cs = {small("synthetic_split_rf", 800, 20, 3),
                                            small("synthetic_split_gamma", 800, 20, 3)};
  const auto report = compare(cs);
  const auto dir = temp_dir("report");
  write_report(report, cs, dir);
  for (const char* f : {"report.json", "report.txt", "plot_synthetic_split_rf.csv",
                        "plot_synthetic_split_gamma_summary.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(slurp(dir / "report.json") == to_json(report));
  std::filesystem::remove_all(dir);
}

// ---- comparisons ----------------------------------------------------------

TEST_CASE("compared methods score the same test rows") {
  std::vector<ExperimentConfig> cs;
  for (const auto* base : {"synthetic_split_gamma", "synthetic_split_rf", "synthetic_oob_rf",
                           "synthetic_bootstrap_gamma"}) {
    cs.push_back(small(base, 1200, 30, 8));
  }
  const auto r = compare(cs);
  REQUIRE(r.methods.size() == 4);
  for (const auto& m : r.methods) {
    CHECK(m.batch.rows == r.methods[0].batch.rows);
    CHECK(m.batch.truths == r.methods[0].batch.truths);
  }
  CHECK(r.n_train + r.n_calibration + r.n_test == 1200);
  CHECK(r.methods[2].score_pool == r.n_train + r.n_calibration);
  CHECK(r.methods[1].score_pool == r.n_calibration);
  for (std::size_t k = 0; k < 3; ++k) {
    for (const auto& iv : r.methods[k].batch.intervals) CHECK(iv.lo >= 0.0);
  }

  // The shared frequency model does not change results.
  const auto alone = run(cs[1]);
  CHECK(alone.methods[0].mean == r.methods[1].mean);

  auto other = cs[0];
  other.seed = 9;
  CHECK_THROWS_AS(compare({cs[1], other}), Error);
}

TEST_CASE("errors carry the config name and replication") {
  auto c = small("synthetic_split_rf", 30, 5, 1);
  c.alpha = 0.01;  // calibration pool too small
  try {
    run(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("synthetic_split_rf") != std::string::npos);
    CHECK(what.find("replication 0") != std::string::npos);
  }
}

TEST_CASE("synthetic comparisons keep the published direction across seeds") {
  // Smaller data and forests than the bundled configs; each inequality must
  // hold for a majority of ten seeds.
  const std::size_t seeds = 10;
  std::size_t gamma_wider = 0, forest_wider_than_oob = 0, rmse_order = 0;
  for (std::uint64_t s = 1; s <= seeds; ++s) {
    std::vector<ExperimentConfig> cs;
    for (const auto* base : {"synthetic_split_gamma", "synthetic_split_rf", "synthetic_oob_rf"}) {
      cs.push_back(small(base, 4000, 150, 100 + s));
    }
    const auto r = compare(cs);
    const auto& g = r.methods[0].mean;
    const auto& f = r.methods[1].mean;
    const auto& o = r.methods[2].mean;
    gamma_wider += g.average_width > f.average_width;
    forest_wider_than_oob += f.average_width > o.average_width;
    rmse_order += g.rmse > f.rmse;
    MESSAGE("seed " << 100 + s << ": widths " << g.average_width << " " << f.average_width << " "
                    << o.average_width << ", coverage " << g.coverage << " " << f.coverage << " "
                    << o.coverage);
  }
  CHECK(gamma_wider > seeds / 2);
  CHECK(forest_wider_than_oob >= 8);  // at least 80% of replications
  CHECK(rmse_order > seeds / 2);
}

TEST_CASE("conformal coverage on 2000 test rows at alpha 0.1") {
  std::vector<ExperimentConfig> cs;
  for (const auto* base : {"synthetic_split_gamma", "synthetic_split_rf", "synthetic_oob_rf"}) {
    cs.push_back(small(base, 8000, 200, 21));
  }
  const auto r = compare(cs);
  REQUIRE(r.n_test == 2000);
  for (const auto& m : r.methods) {
    CAPTURE(m.config_name);
    CHECK(m.mean.coverage >= 0.87);
    CHECK(m.mean.coverage <= 0.93);
  }
}

// ---- bootstrap baseline ---------------------------------------------------

TEST_CASE("bootstrap baseline guards") {
  const auto ds = synth::gamma_design(200, 1);
  const auto split = random_split(ds.size(), {}, 2);
  BootstrapConfig bc;
  bc.n_boot = 1;
  CHECK_THROWS_WITH_AS(bootstrap_baseline(ds, split, MiscoverageLevel(0.1), bc),
                       "insufficient bootstrap draws", Error);
  bc.n_boot = 50;
  bc.frequency_forest.n_trees = 20;
  const auto a = bootstrap_baseline(ds, split, MiscoverageLevel(0.1), bc);
  const auto b = bootstrap_baseline(ds, split, MiscoverageLevel(0.1), bc);
  CHECK(a.intervals == b.intervals);
  CHECK(a.intervals.size() == split.test.size());
  CHECK(a.shape == doctest::Approx(1.0 / a.dispersion));
  for (const auto& iv : a.intervals) {
    CHECK(iv.lo >= 0.0);
    CHECK(iv.lo <= iv.hi);
  }
}

TEST_CASE("bootstrap covers a well-specified gamma response") {
  const auto ds = synth::gamma_design(8000, 31);
  const auto split = random_split(ds.size(), {}, 32);
  BootstrapConfig bc;
  bc.frequency = conformal::ModelChoice::glm;
  bc.seed = 33;
  const auto res = bootstrap_baseline(ds, split, MiscoverageLevel(0.1), bc);
  const auto truths = ds.severities(split.test);
  const double cov = empirical_coverage(res.intervals, truths);
  MESSAGE("gamma design bootstrap coverage " << cov << ", fitted shape " << res.shape);
  CHECK(std::abs(cov - 0.90) <= 0.03);
  CHECK(res.shape == doctest::Approx(2.0).epsilon(0.1));
}

// ---- Monte Carlo coverage -------------------------------------------------

TEST_CASE("validate_coverage bookkeeping") {
  CoverageSettings s;
  s.replications = 200;
  s.n_train = 60;
  s.n_calibration = 9;
  s.n_test = 2;
  s.trees = 20;
  s.threads = 1;
  const auto c = validate_coverage(s);
  CHECK(c.trials == 400);
  CHECK(c.score_pool == 9);
  CHECK(c.band_lo == doctest::Approx(0.8));
  CHECK(c.band_hi == doctest::Approx(0.9));
  CHECK(c.standard_error == doctest::Approx(std::sqrt(0.16 / 400)));
  CHECK(c.coverage == doctest::Approx(static_cast<double>(c.covered) / c.trials));
  s.threads = 3;
  CHECK(validate_coverage(s).covered == c.covered);
  s.n_calibration = 3;
  CHECK_THROWS_AS(validate_coverage(s), CalibrationTooSmall);
}

// ---- CLI ------------------------------------------------------------------

TEST_CASE("cli usage errors") {
  std::string out, err;
  CHECK(cli({}, &out) == 2);
  CHECK(out.find("validate-coverage") != std::string::npos);
  CHECK(cli({"frobnicate"}, &out, &err) == 2);
  CHECK(cli({"run", "--bogus"}, &out, &err) == 2);
  CHECK(cli({"run"}, &out, &err) == 2);
  CHECK(cli({"--help"}, &out) == 0);
  CHECK(cli({"run", "--config", "no_such_config"}, &out, &err) == 1);
  CHECK(err.find("config key 'config'") != std::string::npos);
  CHECK(cli({"run", "--config", "synthetic_split_rf", "--set", "alpha=2"}, &out, &err) == 1);
  CHECK(err.find("'alpha'") != std::string::npos);
  CHECK(cli({"synth", "--kind", "boat", "--out", "/dev/null"}, &out, &err) == 1);
}

TEST_CASE("cli synth writes a loadable file") {
  const auto dir = temp_dir("cli_synth");
  for (const std::string kind : {"synthetic", "mtpl", "crop"}) {
    const auto path = dir / (kind + ".csv");
    std::string out;
    REQUIRE(cli({"synth", "--kind", kind, "--n", "300", "--seed", "4", "--out", path.string()}, &out) == 0);
    const std::string schema = kind == "synthetic" ? "synthetic.schema" : kind + ".schema";
    const auto ds = ingest::load_csv(path, ingest::load_schema(bundled_schema_dir() / schema)).dataset;
    CHECK(ds.size() == 300);
    if (kind == "synthetic") CHECK(ds == synth::generate({300, 4, 0.5}));
    if (kind == "crop") CHECK(ds == synth::crop_surrogate(300, 4));
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli run and compare with overrides") {
  const auto dir = temp_dir("cli_run");
  std::string out, err;
  REQUIRE(cli({"run", "--config", "synthetic_split_rf", "--seed", "3", "--alpha", "0.2", "--set",
               "n=600", "--set", "trees=10", "--out", dir.string()},
              &out, &err) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["seed"] == 3);
  CHECK(j["methods"][0]["alpha"] == 0.2);
  CHECK(j["rows"]["total"] == 600);
  CHECK(std::filesystem::exists(dir / "plot_synthetic_split_rf.csv"));

  // A csv-source config resolving the file relative to itself.
  REQUIRE(cli({"synth", "--n", "500", "--seed", "2", "--out", (dir / "data.csv").string()}) == 0);
  {
    std::ofstream cfg(dir / "local.cfg");
    cfg << "name = local\nsource = csv\ncsv = data.csv\nschema = " << (bundled_schema_dir() / "synthetic.schema").string()
        << "\ntrees = 10\nalpha = 0.2\n";
  }
  CHECK(cli({"run", "--config", (dir / "local.cfg").string()}, &out, &err) == 0);
  CHECK(out.find("local") != std::string::npos);

  CHECK(cli({"compare", "--config", "synthetic_split_rf", "--config", "synthetic_split_gamma",
             "--set", "n=600", "--set", "trees=10"},
            &out, &err) == 0);
  CHECK(out.find("synthetic_split_gamma") != std::string::npos);
  CHECK(cli({"compare", "--config", "synthetic_split_rf", "--config", "mtpl_surrogate_split_rf",
             "--set", "n=600", "--set", "trees=10"},
            &out, &err) == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("cli validate-coverage") {
  const auto dir = temp_dir("cli_cov");
  std::string out;
  const int code = cli({"validate-coverage", "--alpha", "0.2", "--replications", "300", "--n-train",
                        "60", "--n-cal", "20", "--trees", "20", "--out", (dir / "c.json").string()},
                       &out);
  const auto j = nlohmann::json::parse(slurp(dir / "c.json"));
  CHECK(code == (j["pass"].get<bool>() ? 0 : 1));
  CHECK(out.find(j["pass"].get<bool>() ? "PASS" : "FAIL") != std::string::npos);
  CHECK(j["replications"] == 300);
  std::string err;
  CHECK(cli({"validate-coverage", "--method", "bootstrap"}, &out, &err) == 1);
  std::filesystem::remove_all(dir);
}
