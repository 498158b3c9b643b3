#include "fscp/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "fscp/ingest.hpp"
#include "fscp/parallel.hpp"
#include "fscp/synth.hpp"

namespace fscp::harness {

using conformal::ModelChoice;
using models::GlmFamily;

std::uint64_t replication_seed(std::uint64_t seed, std::size_t replication) {
  return replication == 0 ? seed : derive_seed(seed, replication);
}

ClaimsDataset load_dataset(const ExperimentConfig& c, std::uint64_t seed) {
  switch (c.source) {
    case Source::synthetic:
      return synth::generate({c.n, seed, c.p_zero});
    case Source::mtpl_surrogate:
      return synth::mtpl_surrogate(c.n, seed);
    case Source::crop_surrogate:
      return synth::crop_surrogate(c.n, seed);
    case Source::csv: {
      auto loaded = ingest::load_csv(c.csv, ingest::load_schema(c.schema));
      return std::move(loaded.dataset);
    }
  }
  throw Error("unknown data source");
}

double sample_quantile(std::vector<double> v, double p) {
  if (v.empty()) throw Error("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error("quantile level must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

BootstrapResult bootstrap_baseline(const ClaimsDataset& dataset, const SplitIndices& split,
                                   MiscoverageLevel alpha, const BootstrapConfig& config,
                                   models::RegressorPtr frequency) {
  if (config.n_boot < 2) throw Error("insufficient bootstrap draws");
  if (split.train.empty()) throw Error("empty training set");
  const auto enc = ingest::Encoding::fit(dataset, split.train);
  const auto X = enc.transform(dataset, split.train);
  const auto d = dataset.frequencies(split.train);
  const auto y = dataset.severities(split.train);

  if (!frequency) {
    frequency = conformal::fit_stage(config.frequency, GlmFamily::poisson, X, d,
                                     config.frequency_forest, config.glm);
  }
  std::vector<std::size_t> positive;
  std::vector<double> d_pos, y_pos;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] <= 0.0) continue;
    positive.push_back(i);
    d_pos.push_back(d[i]);
    y_pos.push_back(std::max(y[i], conformal::gamma_response_floor));
  }
  if (positive.empty()) throw Error("no positive-frequency training rows");
  const auto glm = models::fit_glm(X.select_rows(positive).with_column(d_pos, "D"), y_pos,
                                   GlmFamily::gamma, config.glm);

  BootstrapResult out;
  out.dispersion = glm.dispersion();
  out.shape = 1.0 / glm.dispersion();
  const auto X_test = enc.transform(dataset, split.test);
  std::mt19937_64 rng(config.seed);
  std::vector<double> draws(config.n_boot);
  out.intervals.reserve(X_test.rows());
  for (std::size_t r = 0; r < X_test.rows(); ++r) {
    const auto x = X_test.row(r);
    const double mean = glm.predict(models::extend_row(x, frequency->predict(x)));
    std::gamma_distribution<double> g(out.shape, mean / out.shape);
    for (double& v : draws) v = g(rng);
    const double lo = sample_quantile(draws, alpha.value() / 2.0);
    const double hi = sample_quantile(draws, 1.0 - alpha.value() / 2.0);
    out.intervals.push_back(PredictionInterval::from_bounds(lo, hi, mean));
  }
  return out;
}

namespace {

models::ForestConfig forest_config(const ExperimentConfig& c, std::size_t trees,
                                   std::uint64_t seed) {
  models::ForestConfig f;
  f.n_trees = trees;
  f.mtry = c.mtry;
  f.min_leaf = c.min_leaf;
  f.max_depth = c.max_depth;
  f.seed = seed;
  f.threads = c.threads;
  return f;
}

conformal::TwoStageConfig two_stage_config(const ExperimentConfig& c, std::uint64_t seed) {
  conformal::TwoStageConfig t;
  t.frequency_forest = forest_config(c, c.frequency_trees, derive_seed(seed, 2));
  t.severity_forest = forest_config(c, c.severity_trees, derive_seed(seed, 3));
  t.variability_forest = forest_config(c, c.variability_trees, derive_seed(seed, 4));
  t.glm = {c.glm_max_iter, c.glm_tol};
  return t;
}

std::string frequency_key(const ExperimentConfig& c) {
  std::string k = c.models.frequency == ModelChoice::forest ? "forest" : "glm";
  if (c.models.frequency == ModelChoice::forest) {
    k += "|" + std::to_string(c.frequency_trees) + "|" + std::to_string(c.mtry) + "|" +
         std::to_string(c.min_leaf) + "|" + std::to_string(c.max_depth);
  } else {
    k += "|" + std::to_string(c.glm_max_iter) + "|" + ingest::format_number(c.glm_tol);
  }
  return k;
}

struct MethodRun {
  std::vector<PredictionInterval> intervals;
  std::size_t score_pool = 0;
  double quantile = 0.0;
  double seconds = 0.0;
};

using FrequencyCache = std::map<std::string, models::RegressorPtr>;

models::RegressorPtr cached_frequency(const ExperimentConfig& c, const ClaimsDataset& ds,
                                      const SplitIndices& split,
                                      const conformal::TwoStageConfig& t, FrequencyCache& cache) {
  const auto key = frequency_key(c);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const auto enc = ingest::Encoding::fit(ds, split.train);
  auto model = conformal::fit_stage(c.models.frequency, GlmFamily::poisson,
                                    enc.transform(ds, split.train), ds.frequencies(split.train),
                                    t.frequency_forest, t.glm);
  cache.emplace(key, model);
  return model;
}

MethodRun run_method(const ExperimentConfig& c, const ClaimsDataset& ds, const SplitIndices& split,
                     std::uint64_t seed, FrequencyCache& cache) {
  const auto start = std::chrono::steady_clock::now();
  const MiscoverageLevel alpha(c.alpha);
  const auto t = two_stage_config(c, seed);
  MethodRun out;
  switch (c.method) {
    case Method::split: {
      auto freq = cached_frequency(c, ds, split, t, cache);
      const auto p = conformal::two_stage_split(ds, split, c.models, alpha, t, std::move(freq));
      out.intervals = p.predict_intervals(ds, split.test);
      out.score_pool = p.scores().size();
      out.quantile = p.quantile();
      break;
    }
    case Method::oob: {
      std::vector<std::size_t> rows = split.train;
      rows.insert(rows.end(), split.calibration.begin(), split.calibration.end());
      std::sort(rows.begin(), rows.end());
      conformal::OobConfig o{t.frequency_forest, t.severity_forest, t.variability_forest,
                             c.oob_positive_only};
      const auto p = conformal::two_stage_oob(ds, rows, o, alpha);
      out.intervals = p.predict_intervals(ds, split.test);
      out.score_pool = p.scores().size();
      out.quantile = p.quantile();
      break;
    }
    case Method::bootstrap: {
      auto freq = cached_frequency(c, ds, split, t, cache);
      BootstrapConfig b{c.n_boot, derive_seed(seed, 5), c.models.frequency, t.frequency_forest,
                        t.glm};
      out.intervals = bootstrap_baseline(ds, split, alpha, b, std::move(freq)).intervals;
      break;
    }
  }
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

void check_comparable(const std::vector<ExperimentConfig>& configs) {
  const auto& a = configs.front();
  for (const auto& b : configs) {
    const bool same = a.source == b.source && a.n == b.n && a.p_zero == b.p_zero &&
                      a.csv == b.csv && a.schema == b.schema && a.seed == b.seed &&
                      a.replications == b.replications &&
                      a.proportions.train == b.proportions.train &&
                      a.proportions.calibration == b.proportions.calibration &&
                      a.proportions.test == b.proportions.test;
    if (!same) {
      throw Error("config '" + b.name + "' differs from '" + a.name +
                  "' in data source, split, seed or replications; compared methods must share "
                  "test rows");
    }
  }
}

Metrics mean_metrics(const std::vector<Metrics>& reps) {
  Metrics m;
  for (const auto& r : reps) {
    m.coverage += r.coverage;
    m.average_width += r.average_width;
    m.rmse += r.rmse;
    m.clipping_rate += r.clipping_rate;
  }
  const double k = static_cast<double>(reps.size());
  m.coverage /= k;
  m.average_width /= k;
  m.rmse /= k;
  m.clipping_rate /= k;
  return m;
}

std::string digest_text(const std::vector<ExperimentConfig>& configs) {
  std::string text;
  for (auto c : configs) {
    c.out.clear();
    c.threads = 0;
    text += format_config(c) + "\n";
  }
  return fnv1a_hex(text);
}

}  // namespace

Report compare(const std::vector<ExperimentConfig>& configs) {
  if (configs.empty()) throw Error("no configs to run");
  for (const auto& c : configs) c.validate();
  check_comparable(configs);
  const auto& first = configs.front();

  Report report;
  report.seed = first.seed;
  report.config_digest = digest_text(configs);
  report.replications = first.replications;
  report.methods.resize(configs.size());

  ClaimsDataset csv_data;
  if (first.source == Source::csv) csv_data = load_dataset(first, first.seed);

  for (std::size_t r = 0; r < first.replications; ++r) {
    const std::uint64_t seed = replication_seed(first.seed, r);
    const ClaimsDataset ds = first.source == Source::csv ? csv_data : load_dataset(first, seed);
    const SplitIndices split = random_split(ds.size(), first.proportions, derive_seed(seed, 1));
    const auto truths = ds.severities(split.test);
    if (r == 0) {
      report.n_rows = ds.size();
      report.n_train = split.train.size();
      report.n_calibration = split.calibration.size();
      report.n_test = split.test.size();
      report.zero_frequency_share = ds.zero_frequency_share();
    }
    FrequencyCache cache;
    for (std::size_t k = 0; k < configs.size(); ++k) {
      const auto& c = configs[k];
      MethodRun m;
      try {
        m = run_method(c, ds, split, seed, cache);
      } catch (const Error& e) {
        throw Error("config '" + c.name + "', replication " + std::to_string(r) + ": " + e.what());
      }
      auto& res = report.methods[k];
      res.replicates.push_back(evaluate(m.intervals, truths));
      res.fit_seconds += m.seconds;
      if (r == 0) {
        res.config_name = c.name;
        res.label = c.label();
        res.method = method_name(c.method);
        res.alpha = c.alpha;
        res.score_pool = m.score_pool;
        res.quantile = m.quantile;
        res.batch = {split.test, std::move(m.intervals), truths};
      }
    }
  }
  for (auto& res : report.methods) res.mean = mean_metrics(res.replicates);
  return report;
}

Report run(const ExperimentConfig& config) { return compare({config}); }

void write_report(const Report& report, const std::vector<ExperimentConfig>& configs,
                  const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", to_json(report));
  write_text(dir / "report.txt", to_table(report));
  for (std::size_t k = 0; k < report.methods.size(); ++k) {
    const auto& m = report.methods[k];
    const std::size_t rows =
        std::min(k < configs.size() ? configs[k].plot_rows : 50, m.batch.intervals.size());
    emit_plot_data(m, rows, dir / ("plot_" + m.config_name + ".csv"),
                   dir / ("plot_" + m.config_name + "_summary.json"));
  }
}

CoverageCheck validate_coverage(const CoverageSettings& s) {
  const MiscoverageLevel alpha(s.alpha);
  if (s.replications == 0 || s.n_test == 0) throw Error("coverage check needs replications and test rows");
  if (s.n_train == 0 || s.n_calibration == 0) throw Error("coverage check needs training and calibration rows");
  if (s.method == Method::bootstrap) throw Error("coverage check supports the split and oob methods");
  const std::size_t n = s.n_train + s.n_calibration + s.n_test;
  const std::size_t pool = s.method == Method::oob ? s.n_train + s.n_calibration : s.n_calibration;
  // Fail early rather than inside every replication.
  if (conformal_rank(pool, alpha) > pool) throw CalibrationTooSmall(pool, minimum_pool_size(alpha));

  std::vector<std::size_t> covered(s.replications, 0);
  parallel_for(s.replications, resolve_threads(s.threads, s.replications), [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(s.seed, r);
    const ClaimsDataset ds = synth::generate({n, seed, 0.5});
    SplitIndices split;
    for (std::size_t i = 0; i < n; ++i) {
      auto& part = i < s.n_train ? split.train
                   : i < s.n_train + s.n_calibration ? split.calibration
                                                     : split.test;
      part.push_back(i);
    }
    auto forest = [&](std::uint64_t stream) {
      models::ForestConfig f;
      f.n_trees = s.trees;
      f.min_leaf = s.min_leaf;
      f.seed = derive_seed(seed, stream);
      f.threads = 1;
      return f;
    };
    std::vector<PredictionInterval> intervals;
    if (s.method == Method::oob) {
      std::vector<std::size_t> rows = split.train;
      rows.insert(rows.end(), split.calibration.begin(), split.calibration.end());
      conformal::OobConfig o{forest(2), forest(3), forest(4), false};
      intervals = conformal::two_stage_oob(ds, rows, o, alpha).predict_intervals(ds, split.test);
    } else {
      conformal::TwoStageConfig t{forest(2), forest(3), forest(4), {}};
      intervals = conformal::two_stage_split(ds, split, s.models, alpha, t)
                      .predict_intervals(ds, split.test);
    }
    const auto truths = ds.severities(split.test);
    for (std::size_t k = 0; k < intervals.size(); ++k) {
      if (intervals[k].contains(truths[k])) ++covered[r];
    }
  });

  CoverageCheck out;
  out.covered = std::accumulate(covered.begin(), covered.end(), std::size_t{0});
  out.trials = s.replications * s.n_test;
  out.coverage = static_cast<double>(out.covered) / static_cast<double>(out.trials);
  out.score_pool = pool;
  out.band_lo = alpha.confidence();
  out.band_hi = alpha.confidence() + 1.0 / static_cast<double>(pool + 1);
  out.standard_error =
      std::sqrt(alpha.value() * alpha.confidence() / static_cast<double>(out.trials));
  out.pass = out.coverage >= out.band_lo - 3.0 * out.standard_error &&
             out.coverage <= out.band_hi + 3.0 * out.standard_error;
  return out;
}

}  // namespace fscp::harness
