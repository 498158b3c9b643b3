#include "fscp/models/glm.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace fscp::models {

namespace {

constexpr double kMaxEta = 700.0;

double unit_deviance(GlmFamily family, double y, double mu) {
  if (family == GlmFamily::poisson) {
    const double term = y > 0.0 ? y * std::log(y / mu) : 0.0;
    return 2.0 * (term - (y - mu));
  }
  return 2.0 * (-std::log(y / mu) + (y - mu) / mu);
}

double total_deviance(GlmFamily family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    dev += unit_deviance(family, y[i], std::exp(std::min(eta[i], kMaxEta)));
  }
  return dev;
}

}  // namespace

IrlsFailure::IrlsFailure(const std::string& what, int iteration)
    : Error("IRLS failure at iteration " + std::to_string(iteration) + ": " + what),
      iteration_(iteration) {}

GlmModel::GlmModel(GlmFamily family, std::vector<double> coefficients, double dispersion)
    : family_(family), coefficients_(std::move(coefficients)), dispersion_(dispersion) {
  if (coefficients_.empty()) throw Error("GLM needs at least an intercept");
  for (double b : coefficients_) {
    if (!std::isfinite(b)) throw Error("GLM coefficients must be finite");
  }
  if (!(dispersion_ > 0.0)) throw Error("GLM dispersion must be positive");
}

double GlmModel::linear_predictor(std::span<const double> x) const {
  check_arity(x);
  double eta = coefficients_[0];
  for (std::size_t j = 0; j < x.size(); ++j) eta += coefficients_[j + 1] * x[j];
  return eta;
}

double GlmModel::predict(std::span<const double> x) const {
  return std::exp(std::min(linear_predictor(x), kMaxEta));
}

GlmModel fit_glm(const FeatureMatrix& X, std::span<const double> y_in, GlmFamily family,
                 const GlmConfig& config) {
  const auto n = static_cast<Eigen::Index>(X.rows());
  const auto p = static_cast<Eigen::Index>(X.cols()) + 1;
  if (y_in.size() != X.rows()) throw Error("GLM response length does not match design rows");
  if (X.rows() <= X.cols()) throw Error("GLM needs more rows than feature columns");
  for (double v : y_in) {
    if (!std::isfinite(v)) throw Error("GLM response must be finite");
    if (family == GlmFamily::gamma && v <= 0.0) {
      throw Error("gamma GLM requires strictly positive responses");
    }
    if (family == GlmFamily::poisson && v < 0.0) {
      throw Error("Poisson GLM requires nonnegative responses");
    }
  }

  Eigen::MatrixXd A(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) {
      A(i, j) = X(static_cast<std::size_t>(i), static_cast<std::size_t>(j - 1));
    }
    y[i] = y_in[static_cast<std::size_t>(i)];
  }

  // Starting values follow the usual mustart conventions.
  Eigen::VectorXd eta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    eta[i] = std::log(family == GlmFamily::poisson ? y[i] + 0.1 : y[i]);
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd w(n);
  double dev_old = std::numeric_limits<double>::infinity();
  bool have_beta = false;
  bool converged = false;
  int iter = 0;

  for (iter = 1; iter <= config.max_iter; ++iter) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mu = std::exp(std::min(eta[i], kMaxEta));
      z[i] = eta[i] + (y[i] - mu) / mu;
      // Working weights for the log link: (dmu/deta)^2 / V(mu).
      w[i] = family == GlmFamily::poisson ? mu : 1.0;
    }
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd WA = sw.asDiagonal() * A;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(WA);
    if (qr.rank() < p) throw IrlsFailure("singular weighted design", iter);
    Eigen::VectorXd beta_new = qr.solve(sw.cwiseProduct(z));
    if (!beta_new.allFinite()) throw IrlsFailure("non-finite coefficients", iter);

    Eigen::VectorXd eta_new = A * beta_new;
    double dev = total_deviance(family, y, eta_new);
    if (have_beta) {
      // Step halving when the update overshoots.
      int halvings = 0;
      while ((!std::isfinite(dev) || dev > dev_old * (1.0 + 1e-12) + 1e-12) && halvings < 40) {
        beta_new = 0.5 * (beta_new + beta);
        eta_new = A * beta_new;
        dev = total_deviance(family, y, eta_new);
        ++halvings;
      }
    }
    if (!std::isfinite(dev)) throw IrlsFailure("deviance is not finite", iter);

    const double change =
        have_beta ? (beta_new - beta).cwiseAbs().maxCoeff() : std::numeric_limits<double>::infinity();
    beta = beta_new;
    eta = eta_new;
    dev_old = dev;
    have_beta = true;
    if (change < config.tol) {
      converged = true;
      break;
    }
  }
  iter = std::min(iter, config.max_iter);

  std::vector<double> coef(beta.data(), beta.data() + p);
  double dispersion = 1.0;
  Eigen::VectorXd mu(n);
  for (Eigen::Index i = 0; i < n; ++i) mu[i] = std::exp(std::min(eta[i], kMaxEta));
  if (family == GlmFamily::gamma) {
    double pearson = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = (y[i] - mu[i]) / mu[i];
      pearson += r * r;
    }
    const double df = static_cast<double>(n - p > 0 ? n - p : n);
    dispersion = std::max(pearson / df, std::numeric_limits<double>::min());
  }

  for (Eigen::Index i = 0; i < n; ++i) w[i] = family == GlmFamily::poisson ? mu[i] : 1.0;
  const Eigen::MatrixXd info = A.transpose() * w.asDiagonal() * A;
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p)) * dispersion;

  GlmModel model(family, std::move(coef), dispersion);
  model.standard_errors_.resize(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    model.standard_errors_[static_cast<std::size_t>(j)] = std::sqrt(std::max(0.0, cov(j, j)));
  }
  model.converged_ = converged;
  model.iterations_ = iter;
  model.deviance_ = dev_old;
  return model;
}

}  // namespace fscp::models
