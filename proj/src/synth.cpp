#include "fscp/synth.hpp"

#include <cmath>
#include <random>
#include <string>

namespace fscp::synth {

double severity_mean(double x2, double x3, double x4, double x5) {
  return 4.0 * std::exp(x2) + std::sin(x3 * x4) + 5.0 * x5 * x5 * x5;
}

double population_zero_share(double p) {
  // Composite Simpson over x in [0, 10] of exp(-exp(0.01 x)) / 10.
  constexpr int intervals = 2000;
  const double h = 10.0 / intervals;
  double acc = 0.0;
  for (int k = 0; k <= intervals; ++k) {
    const double x = k * h;
    const double f = std::exp(-std::exp(0.01 * x));
    const double w = (k == 0 || k == intervals) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
    acc += w * f;
  }
  const double mean_p0 = acc * h / 3.0 / 10.0;
  return p + (1.0 - p) * mean_p0;
}

ClaimsDataset generate(const SynthConfig& config) {
  if (config.n < 1) throw Error("synthetic sample size must be at least 1");
  if (!(config.p_zero_mixture >= 0.0 && config.p_zero_mixture <= 1.0)) {
    throw Error("mixture weight must lie in [0, 1]");
  }
  std::vector<ColumnSpec> columns;
  for (std::size_t j = 1; j <= SynthConfig::n_predictors; ++j) {
    columns.push_back({"X" + std::to_string(j), ColumnKind::numeric, {}});
  }

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  std::bernoulli_distribution point_mass(config.p_zero_mixture);

  std::vector<ClaimRecord> rows(config.n);
  for (auto& row : rows) {
    row.predictors.resize(SynthConfig::n_predictors);
    for (double& x : row.predictors) x = unif(rng);
    const auto& x = row.predictors;

    const bool zero_branch = point_mass(rng);
    if (!zero_branch) {
      std::poisson_distribution<std::uint32_t> counts(std::exp(0.01 * x[0]));
      row.frequency = counts(rng);
    }
    if (row.frequency > 0) {
      const double mean = severity_mean(x[1], x[2], x[3], x[4]);
      if (!(mean > 0.0)) throw Error("severity mean must be positive");
      std::exponential_distribution<double> sev(1.0 / mean);
      row.severity = sev(rng);
    }
  }
  return ClaimsDataset(std::move(columns), std::move(rows));
}

namespace {

std::size_t pick(std::mt19937_64& rng, std::initializer_list<double> weights) {
  std::discrete_distribution<std::size_t> d(weights);
  return d(rng);
}

}  // namespace

ClaimsDataset mtpl_surrogate(std::size_t n, std::uint64_t seed) {
  std::vector<ColumnSpec> columns = {
      {"Type", ColumnKind::categorical, {"TPL", "TPL+", "TPL++"}},
      {"Fuel", ColumnKind::categorical, {"gasoline", "diesel"}},
      {"Sex", ColumnKind::categorical, {"male", "female"}},
      {"Use", ColumnKind::categorical, {"private", "work"}},
      {"Fleet", ColumnKind::categorical, {"no", "yes"}},
      {"Ageph", ColumnKind::numeric, {}},
      {"Power", ColumnKind::numeric, {}},
      {"Bm", ColumnKind::numeric, {}},
      {"Lat", ColumnKind::numeric, {}},
      {"Long", ColumnKind::numeric, {}},
      {"Expo", ColumnKind::numeric, {}},
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<ClaimRecord> rows(n);
  for (auto& r : rows) {
    const double type = static_cast<double>(pick(rng, {0.6, 0.3, 0.1}));
    const double fuel = static_cast<double>(pick(rng, {0.7, 0.3}));
    const double sex = static_cast<double>(pick(rng, {0.75, 0.25}));
    const double use = static_cast<double>(pick(rng, {0.95, 0.05}));
    const double fleet = static_cast<double>(pick(rng, {0.97, 0.03}));
    const double age = std::floor(18.0 + 72.0 * std::pow(u01(rng), 1.4));
    const double power = std::floor(20.0 + 180.0 * std::pow(u01(rng), 2.0));
    const double bm = std::floor(23.0 * std::pow(u01(rng), 2.5));
    const double lat = std::round((49.5 + 2.0 * u01(rng)) * 1e4) / 1e4;
    const double lon = std::round((2.5 + 3.9 * u01(rng)) * 1e4) / 1e4;
    const double expo = std::round(std::max(0.05, std::min(1.0, 1.2 * u01(rng))) * 1e3) / 1e3;
    r.predictors = {type, fuel, sex, use, fleet, age, power, bm, lat, lon, expo};

    const double rate = expo * std::exp(-2.2 + 0.06 * bm - 0.008 * (age - 40.0) + 0.15 * fuel +
                                        0.1 * (type == 0.0));
    std::poisson_distribution<std::uint32_t> counts(rate);
    r.frequency = counts(rng);
    if (r.frequency > 0) {
      const double mean = std::exp(6.8 + 0.004 * (power - 60.0) + 0.02 * bm);
      std::gamma_distribution<double> sev(0.8, mean / 0.8);
      r.severity = std::round(sev(rng) * 100.0) / 100.0;
      if (r.severity <= 0.0) r.severity = 0.01;
    }
  }
  return ClaimsDataset(std::move(columns), std::move(rows));
}

ClaimsDataset crop_surrogate(std::size_t n, std::uint64_t seed) {
  std::vector<ColumnSpec> columns = {
      {"Year", ColumnKind::numeric, {}},
      {"Latitude", ColumnKind::numeric, {}},
      {"Longitude", ColumnKind::numeric, {}},
      {"AWC", ColumnKind::numeric, {}},
      {"Soil", ColumnKind::categorical,
       {"Latossolo", "Argissolo", "Neossolo", "Cambissolo", "Nitossolo"}},
      {"Area", ColumnKind::numeric, {}},
      {"Irrigation", ColumnKind::numeric, {}},
      {"TempPC1", ColumnKind::numeric, {}},
      {"TempPC2", ColumnKind::numeric, {}},
      {"PrecPC1", ColumnKind::numeric, {}},
      {"PrecPC2", ColumnKind::numeric, {}},
      {"PrecPC3", ColumnKind::numeric, {}},
      {"PrecPC4", ColumnKind::numeric, {}},
  };
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<ClaimRecord> rows(n);
  for (auto& r : rows) {
    const double year = std::floor(1.0 + 6.0 * u01(rng));
    const double lat = -33.0 + 31.0 * u01(rng);
    const double lon = -60.0 + 25.0 * u01(rng);
    const double awc = 50.0 + 150.0 * u01(rng);
    const double soil = static_cast<double>(pick(rng, {0.45, 0.25, 0.12, 0.1, 0.08}));
    const double area = std::exp(4.0 + 2.5 * z(rng));
    const double irrigation = std::min(1.0, 0.05 * std::abs(z(rng)));
    const double t1 = z(rng), t2 = z(rng);
    const double p1 = z(rng), p2 = z(rng), p3 = z(rng), p4 = z(rng);
    r.predictors = {year, lat, lon, awc, soil, area, irrigation, t1, t2, p1, p2, p3, p4};

    // Droughts (low precipitation, high temperature) drive both stages.
    const double drought = -0.9 * p1 + 0.5 * t1 - 0.2 * p2;
    const double rate = std::exp(-1.6 + drought + 0.25 * std::log1p(area / 500.0));
    std::poisson_distribution<std::uint32_t> counts(rate);
    r.frequency = counts(rng);
    if (r.frequency > 0) {
      const double mean = std::exp(10.5 + 0.35 * drought + 0.002 * (awc - 125.0));
      std::gamma_distribution<double> sev(1.2, mean / 1.2);
      r.severity = sev(rng);
    }
  }
  return ClaimsDataset(std::move(columns), std::move(rows));
}

ClaimsDataset gamma_design(std::size_t n, std::uint64_t seed, double shape) {
  if (!(shape > 0.0)) throw Error("gamma shape must be positive");
  std::vector<ColumnSpec> columns = {{"X1", ColumnKind::numeric, {}},
                                     {"X2", ColumnKind::numeric, {}}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::poisson_distribution<std::uint32_t> extra(0.5);
  std::vector<ClaimRecord> rows(n);
  for (auto& r : rows) {
    const double x1 = u01(rng);
    const double x2 = u01(rng);
    r.predictors = {x1, x2};
    r.frequency = 1 + extra(rng);
    const double mean = std::exp(1.0 + 0.8 * x1 - 0.5 * x2);
    std::gamma_distribution<double> sev(shape, mean / shape);
    r.severity = sev(rng);
  }
  return ClaimsDataset(std::move(columns), std::move(rows));
}

}  // namespace fscp::synth
