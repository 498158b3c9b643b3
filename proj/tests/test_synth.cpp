#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fscp/synth.hpp"

using namespace fscp;

namespace {

// Composite Simpson rule on [a, b] with an even number of panels.
template <class F>
double simpson(F f, double a, double b, int panels = 2000) {
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int k = 1; k < panels; ++k) s += f(a + k * h) * (k % 2 ? 4 : 2);
  return s * h / 3;
}

struct Moments {
  double mean = 0, var = 0;
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / m.n;
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= (m.n - 1);
  return m;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ma = moments(a), mb = moments(b);
  double c = 0;
  for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma.mean) * (b[i] - mb.mean);
  return c / (a.size() - 1) / std::sqrt(ma.var * mb.var);
}

std::vector<double> column(const ClaimsDataset& ds, std::size_t j) {
  std::vector<double> v;
  for (const auto& r : ds.rows()) v.push_back(r.predictors[j]);
  return v;
}

}  // namespace

TEST_CASE("ten-thousand-row zero share") {
  const auto ds = synth::generate({10000, 1, 0.5});
  CHECK(ds.size() == 10000);
  CHECK(std::abs(ds.zero_frequency_share() - 0.6743) <= 0.015);

  // Population value from quadrature of E[exp(-exp(0.01 X1))], X1 ~ U[0, 10].
  const double e0 = simpson([](double x) { return std::exp(-std::exp(0.01 * x)); }, 0, 10) / 10;
  CHECK(synth::population_zero_share(0.5) == doctest::Approx(0.5 + 0.5 * e0).epsilon(1e-10));
  CHECK(synth::population_zero_share(0.5) == doctest::Approx(0.675).epsilon(0.002));
  CHECK(synth::population_zero_share(1.0) == 1.0);

  for (std::uint64_t seed : {2, 3, 4}) {
    const double share = synth::generate({20000, seed, 0.5}).zero_frequency_share();
    const double se = std::sqrt(0.675 * 0.325 / 20000);
    CHECK(std::abs(share - synth::population_zero_share(0.5)) <= 3 * se);
  }
}

TEST_CASE("columns and the zero-claim rule") {
  const auto ds = synth::generate({5000, 7, 0.5});
  REQUIRE(ds.arity() == 10);
  for (std::size_t j = 0; j < 10; ++j) {
    CHECK(ds.columns()[j].name == "X" + std::to_string(j + 1));
    CHECK(ds.columns()[j].kind == ColumnKind::numeric);
  }
  for (const auto& r : ds.rows()) {
    if (r.frequency == 0) CHECK(r.severity == 0.0);
    else CHECK(r.severity > 0.0);
    for (double x : r.predictors) {
      CHECK(x >= 0.0);
      CHECK(x <= 10.0);
    }
  }
  CHECK(synth::generate({5000, 7, 1.0}).zero_frequency_share() == 1.0);
}

TEST_CASE("mean positive severity matches the quadrature value") {
  const double e_exp = simpson([](double x) { return 4 * std::exp(x); }, 0, 10) / 10;
  const double e_sin =
      simpson([](double a) { return simpson([a](double b) { return std::sin(a * b); }, 0, 10); }, 0,
              10, 400) /
      100;
  const double e_cube = simpson([](double x) { return 5 * x * x * x; }, 0, 10) / 10;
  const double population = e_exp + e_sin + e_cube;
  CHECK(e_cube == doctest::Approx(1250.0));

  const auto ds = synth::generate({100000, 11, 0.5});
  std::vector<double> y;
  for (const auto& r : ds.rows()) {
    if (r.frequency > 0) y.push_back(r.severity);
  }
  const auto m = moments(y);
  const double se = std::sqrt(m.var / m.n);
  CHECK(std::abs(m.mean - population) <= 3 * se);
}

TEST_CASE("positive severities are exponential around the conditional mean") {
  const auto ds = synth::generate({60000, 12, 0.0});
  std::vector<double> ratio;
  for (const auto& r : ds.rows()) {
    if (r.frequency == 0) continue;
    const auto& x = r.predictors;
    const double mean = 4 * std::exp(x[1]) + std::sin(x[2] * x[3]) + 5 * x[4] * x[4] * x[4];
    CHECK(synth::severity_mean(x[1], x[2], x[3], x[4]) == doctest::Approx(mean).epsilon(1e-14));
    ratio.push_back(r.severity / mean);
  }
  const auto m = moments(ratio);
  // Exponential(1): mean 1, variance 1, fourth central moment 9.
  CHECK(std::abs(m.mean - 1.0) <= 3 * std::sqrt(1.0 / m.n));
  CHECK(std::abs(m.var - 1.0) <= 3 * std::sqrt(8.0 / m.n));
}

TEST_CASE("conditional severity mean is bounded below") {
  double lowest = 1e300;
  for (double x2 = 0; x2 <= 10; x2 += 0.5) {
    for (double x3 = 0; x3 <= 10; x3 += 0.05) {
      for (double x4 = 0; x4 <= 10; x4 += 0.25) {
        lowest = std::min(lowest, synth::severity_mean(x2, x3, x4, 0.0));
      }
    }
  }
  CHECK(lowest > 2.9);
  CHECK(lowest >= 3.0 - 1e-12);
}

TEST_CASE("claim counts follow the mixture") {
  const std::size_t n = 50000;
  const auto ds = synth::generate({n, 13, 0.5});
  double sum = 0;
  for (const auto& r : ds.rows()) sum += r.frequency;
  const double lam = simpson([](double x) { return std::exp(0.01 * x); }, 0, 10) / 10;
  const double expect = 0.5 * lam;
  // Var D = E[Var] + Var E: 0.5 E[l] + 0.5 E[l^2] - 0.25 E[l]^2.
  const double el2 = simpson([](double x) { return std::exp(0.02 * x); }, 0, 10) / 10;
  const double var = 0.5 * lam + 0.5 * el2 - 0.25 * lam * lam;
  CHECK(std::abs(sum / n - expect) <= 3 * std::sqrt(var / n));
}

TEST_CASE("predictor marginals are uniform on [0, 10]") {
  const auto ds = synth::generate({20000, 14, 0.5});
  for (std::size_t j = 0; j < 10; ++j) {
    const auto m = moments(column(ds, j));
    CHECK(std::abs(m.mean - 5.0) <= 3 * std::sqrt(100.0 / 12.0 / m.n));
    // Var of the sample variance for U[0, 10]: (mu4 - sigma^4) / n, mu4 = 10^4 / 80.
    const double sd_var = std::sqrt((1e4 / 80.0 - std::pow(100.0 / 12.0, 2)) / m.n);
    CHECK(std::abs(m.var - 100.0 / 12.0) <= 3 * sd_var);
  }
}

TEST_CASE("decoy predictors are uncorrelated with the response") {
  const auto ds = synth::generate({40000, 15, 0.5});
  std::vector<double> y = ds.severities();
  for (std::size_t j = 5; j < 10; ++j) {
    CAPTURE(j);
    CHECK(std::abs(correlation(column(ds, j), y)) <= 3.0 / std::sqrt(40000.0));
  }
  // X2 drives the response.
  CHECK(correlation(column(ds, 1), y) > 0.1);
}

TEST_CASE("generation is deterministic given the seed") {
  const auto a = synth::generate({3000, 42, 0.5});
  const auto b = synth::generate({3000, 42, 0.5});
  CHECK(a == b);
  CHECK_FALSE(a == synth::generate({3000, 43, 0.5}));
  CHECK(synth::mtpl_surrogate(500, 3) == synth::mtpl_surrogate(500, 3));
  CHECK(synth::crop_surrogate(500, 3) == synth::crop_surrogate(500, 3));
  CHECK(synth::gamma_design(500, 3) == synth::gamma_design(500, 3));
}

TEST_CASE("surrogate datasets") {
  const auto mtpl = synth::mtpl_surrogate(4000, 5);
  const std::vector<std::string> mtpl_cols = {"Type", "Fuel", "Sex",   "Use", "Fleet", "Ageph",
                                              "Power", "Bm",  "Lat",   "Long", "Expo"};
  REQUIRE(mtpl.arity() == mtpl_cols.size());
  for (std::size_t j = 0; j < mtpl_cols.size(); ++j) CHECK(mtpl.columns()[j].name == mtpl_cols[j]);
  CHECK(mtpl.columns()[2].levels == std::vector<std::string>{"male", "female"});
  CHECK(mtpl.zero_frequency_share() > 0.5);
  CHECK(mtpl.zero_frequency_share() < 1.0);

  const auto crop = synth::crop_surrogate(4000, 5);
  CHECK(crop.columns()[4].name == "Soil");
  CHECK(crop.columns()[4].kind == ColumnKind::categorical);
  CHECK(crop.zero_frequency_share() > 0.0);
  CHECK(crop.zero_frequency_share() < 1.0);
  for (const auto& r : crop.rows()) {
    if (r.frequency == 0) CHECK(r.severity == 0.0);
  }
}

TEST_CASE("well-specified gamma design") {
  const double shape = 2.0;
  const auto ds = synth::gamma_design(40000, 6, shape);
  std::vector<double> ratio;
  for (const auto& r : ds.rows()) {
    CHECK(r.frequency >= 1);
    ratio.push_back(r.severity / std::exp(1 + 0.8 * r.predictors[0] - 0.5 * r.predictors[1]));
  }
  const auto m = moments(ratio);
  CHECK(std::abs(m.mean - 1.0) <= 3 * std::sqrt(1 / shape / m.n));
  CHECK(m.var == doctest::Approx(1 / shape).epsilon(0.05));
}
