// Estimation-error metrics and the two-stage empirical-volatility regression.
#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace svr {

/// (1/m) sum_i (1/n_i) sum_j (est_ij - truth_ij)^2.
inline double ase_trajectory(const std::vector<std::vector<double>>& estimates,
                             const std::vector<std::vector<double>>& truth) {
  if (estimates.size() != truth.size() || estimates.empty())
    throw std::invalid_argument("ASE needs the same non-zero number of subjects");
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (estimates[i].size() != truth[i].size() || truth[i].empty())
      throw std::invalid_argument("ASE shape mismatch for subject " + std::to_string(i));
    double s = 0.0;
    for (std::size_t j = 0; j < truth[i].size(); ++j) {
      const double d = estimates[i][j] - truth[i][j];
      s += d * d;
    }
    total += s / static_cast<double>(truth[i].size());
  }
  return total / static_cast<double>(truth.size());
}

/// (1/m) sum_i (log_est_i - log_truth_i)^2; both arguments on the log scale.
inline double ase_logvol(std::span<const double> log_est, std::span<const double> log_truth) {
  if (log_est.size() != log_truth.size() || log_est.empty())
    throw std::invalid_argument("log-volatility ASE shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < log_est.size(); ++i) {
    const double d = log_est[i] - log_truth[i];
    s += d * d;
  }
  return s / static_cast<double>(log_est.size());
}

/// Per-coefficient squared error (beta_hat_l - beta_l)^2.
inline std::vector<double> se_beta(std::span<const double> est, std::span<const double> truth) {
  if (est.size() != truth.size()) throw std::invalid_argument("coefficient vectors differ in length");
  std::vector<double> out(est.size());
  for (std::size_t l = 0; l < est.size(); ++l) out[l] = (est[l] - truth[l]) * (est[l] - truth[l]);
  return out;
}

/// (1/n) sum_{j<n} (U_{j+1} - U_j)^2 / (t_{j+1} - t_j).
inline double empirical_volatility(std::span<const double> values, std::span<const double> times) {
  if (values.size() != times.size()) throw std::invalid_argument("values and times differ in length");
  if (values.size() < 2) throw std::invalid_argument("empirical volatility needs at least 2 points");
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < values.size(); ++j) {
    const double dt = times[j + 1] - times[j];
    if (!(dt > 0.0)) throw std::invalid_argument("times must be strictly increasing");
    const double du = values[j + 1] - values[j];
    s += du * du / dt;
  }
  return s / static_cast<double>(values.size());
}

struct OlsResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd std_error;
  Eigen::VectorXd p_value;  // two-sided t test of beta_l = 0
  double residual_variance = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // subjects dropped for zero empirical volatility
};

/// Ordinary least squares with classical standard errors.
inline OlsResult ordinary_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index m = x.rows();
  const Eigen::Index k = x.cols();
  if (m != y.size()) throw std::invalid_argument("OLS: row count mismatch");
  if (m <= k) throw std::invalid_argument("OLS needs more rows than columns");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < k) throw std::invalid_argument("OLS: design matrix is rank deficient");
  OlsResult out;
  out.beta = qr.solve(y);
  const double dof = static_cast<double>(m - k);
  out.residual_variance = (y - x * out.beta).squaredNorm() / dof;
  const Eigen::MatrixXd cov =
      out.residual_variance * (x.transpose() * x).ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  out.std_error = cov.diagonal().cwiseSqrt();
  out.p_value.resize(k);
  boost::math::students_t dist(dof);
  for (Eigen::Index l = 0; l < k; ++l) {
    const double se = out.std_error(l);
    if (se > 0.0) {
      const double t = std::abs(out.beta(l) / se);
      out.p_value(l) = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    } else {
      out.p_value(l) = out.beta(l) == 0.0 ? 1.0 : 0.0;
    }
  }
  out.used = static_cast<std::size_t>(m);
  return out;
}

/// Regresses log empirical volatilities of fitted deviation curves on the
/// covariates (rows of x). Subjects with zero empirical volatility are left out.
inline OlsResult two_stage_beta(const std::vector<std::vector<double>>& deviations,
                                const std::vector<std::vector<double>>& times,
                                const Eigen::MatrixXd& x) {
  if (deviations.size() != times.size() || static_cast<Eigen::Index>(deviations.size()) != x.rows())
    throw std::invalid_argument("two-stage regression: one curve and one covariate row per subject");
  std::vector<Eigen::Index> keep;
  std::vector<double> z;
  for (std::size_t i = 0; i < deviations.size(); ++i) {
    const double ev = empirical_volatility(deviations[i], times[i]);
    if (ev > 0.0) {
      keep.push_back(static_cast<Eigen::Index>(i));
      z.push_back(std::log(ev));
    }
  }
  Eigen::MatrixXd xs(static_cast<Eigen::Index>(keep.size()), x.cols());
  for (std::size_t r = 0; r < keep.size(); ++r) xs.row(static_cast<Eigen::Index>(r)) = x.row(keep[r]);
  OlsResult out =
      ordinary_least_squares(xs, Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())));
  out.excluded = deviations.size() - keep.size();
  return out;
}

}  // namespace svr
