// Kalman filtering, fixed-interval (RTS) smoothing and simulation smoothing
// for linear-Gaussian state-space models with irregular epochs.
//
// Observations at an epoch are processed one scalar row at a time, so epochs
// can carry any number of rows (including none, which is a pure prediction).
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "svr/errors.hpp"
#include "svr/statespace.hpp"

namespace svr {

/// y = loading' x + e, e ~ N(0, variance).
struct ObservationRow {
  StateVector loading;
  double value = 0.0;
  double variance = 1.0;
};

/// Epoch 0 carries the initial-state prior; transitions[j] moves the state
/// from times[j] to times[j+1]. Transition::W holds the full process-noise
/// covariance of that step (already multiplied by any volatility).
struct LinearGaussianSSM {
  std::vector<double> times;
  int state_dim = 1;
  std::vector<std::vector<ObservationRow>> rows;
  std::vector<Transition> transitions;
  StateVector initial_mean;
  StateMatrix initial_cov;

  std::size_t epochs() const { return times.size(); }

  void validate() const {
    const std::size_t n = times.size();
    if (n == 0) throw std::invalid_argument("state-space model needs at least one epoch");
    if (state_dim < 1 || state_dim > kMaxOrder)
      throw std::invalid_argument("state dimension out of range");
    if (rows.size() != n) throw std::invalid_argument("one row list per epoch required");
    if (transitions.size() + 1 != n)
      throw std::invalid_argument("need exactly epochs - 1 transitions");
    if (initial_mean.size() != state_dim || initial_cov.rows() != state_dim ||
        initial_cov.cols() != state_dim)
      throw std::invalid_argument("initial moments have wrong dimension");
    for (std::size_t j = 0; j + 1 < n; ++j) {
      const double gap = times[j + 1] - times[j];
      const Transition& tr = transitions[j];
      if (!(gap > 0.0))
        throw std::invalid_argument("epoch times must be strictly increasing (epoch " +
                                    std::to_string(j + 1) + ")");
      if (std::abs(tr.delta - gap) > 1e-12 * std::max(1.0, std::abs(times[j + 1])))
        throw std::invalid_argument("transition gap does not match epoch times at epoch " +
                                    std::to_string(j));
      if (tr.G.rows() != state_dim || tr.W.rows() != state_dim)
        throw std::invalid_argument("transition has wrong dimension");
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (const ObservationRow& row : rows[j]) {
        if (row.loading.size() != state_dim)
          throw std::invalid_argument("observation loading has wrong dimension");
        if (!(row.variance > 0.0))
          throw std::invalid_argument("observation variance must be positive (epoch " +
                                      std::to_string(j) + ")");
      }
    }
  }
};

struct SmootherOutput {
  std::vector<StateVector> predicted_means;
  std::vector<StateMatrix> predicted_covs;
  std::vector<StateVector> filtered_means;
  std::vector<StateMatrix> filtered_covs;
  std::vector<StateVector> smoothed_means;
  std::vector<StateMatrix> smoothed_covs;
  double log_likelihood = 0.0;
};

namespace detail {

inline void symmetrize(StateMatrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

/// Covariance recursions of the filter and smoother, which do not depend on
/// the observed values. Mean passes reuse them for any data vector.
struct KalmanGains {
  std::vector<StateMatrix> predicted_covs;
  std::vector<StateMatrix> filtered_covs;
  std::vector<std::vector<StateVector>> row_gains;
  std::vector<std::vector<double>> innovation_vars;
  std::vector<StateMatrix> smoother_gains;  // J_j, j = 0..n-2
  std::vector<StateMatrix> smoothed_covs;
};

inline KalmanGains compute_gains(const LinearGaussianSSM& ssm, bool smooth) {
  const std::size_t n = ssm.epochs();
  KalmanGains g;
  g.predicted_covs.resize(n);
  g.filtered_covs.resize(n);
  g.row_gains.resize(n);
  g.innovation_vars.resize(n);

  StateMatrix p = ssm.initial_cov;
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0) {
      const Transition& tr = ssm.transitions[j - 1];
      p = tr.G * p * tr.G.transpose() + tr.W;
      symmetrize(p);
    }
    g.predicted_covs[j] = p;
    g.row_gains[j].reserve(ssm.rows[j].size());
    g.innovation_vars[j].reserve(ssm.rows[j].size());
    for (const ObservationRow& row : ssm.rows[j]) {
      const StateVector pf = p * row.loading;
      const double f = row.loading.dot(pf) + row.variance;
      if (!(f > 0.0) || !std::isfinite(f)) {
        std::ostringstream msg;
        msg << "non-positive innovation variance " << f << " at epoch " << j;
        throw NumericalError(msg.str());
      }
      StateVector k = pf / f;
      p -= k * pf.transpose();
      symmetrize(p);
      g.row_gains[j].push_back(std::move(k));
      g.innovation_vars[j].push_back(f);
    }
    g.filtered_covs[j] = p;
  }

  if (!smooth) return g;

  g.smoother_gains.resize(n > 0 ? n - 1 : 0);
  g.smoothed_covs.resize(n);
  g.smoothed_covs[n - 1] = g.filtered_covs[n - 1];
  for (std::size_t jj = n - 1; jj-- > 0;) {
    const Transition& tr = ssm.transitions[jj];
    // J = P_f G' P_pred^{-1}, computed as the transpose of P_pred^{-1} G P_f.
    const StateMatrix rhs = tr.G * g.filtered_covs[jj];
    Eigen::LDLT<StateMatrix> ldlt(g.predicted_covs[jj + 1]);
    if (ldlt.info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "predicted covariance factorization failed at epoch " << jj + 1;
      throw NumericalError(msg.str());
    }
    const StateMatrix j_gain = ldlt.solve(rhs).transpose();
    StateMatrix ps = g.filtered_covs[jj] +
                     j_gain * (g.smoothed_covs[jj + 1] - g.predicted_covs[jj + 1]) *
                         j_gain.transpose();
    symmetrize(ps);
    g.smoother_gains[jj] = j_gain;
    g.smoothed_covs[jj] = ps;
  }
  return g;
}

struct MeanPass {
  std::vector<StateVector> predicted;
  std::vector<StateVector> filtered;
  std::vector<StateVector> smoothed;
  double log_likelihood = 0.0;
};

/// Forward/backward mean recursions for observation values `values[j][k]`
/// (row k at epoch j) and initial mean `a0`.
inline MeanPass mean_pass(const LinearGaussianSSM& ssm, const KalmanGains& g,
                          const std::vector<std::vector<double>>& values,
                          const StateVector& a0, bool smooth) {
  const std::size_t n = ssm.epochs();
  MeanPass out;
  out.predicted.resize(n);
  out.filtered.resize(n);
  StateVector a = a0;
  double ll = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0) a = ssm.transitions[j - 1].G * a;
    out.predicted[j] = a;
    const auto& rows = ssm.rows[j];
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double f = g.innovation_vars[j][k];
      const double e = values[j][k] - rows[k].loading.dot(a);
      a += g.row_gains[j][k] * e;
      ll -= 0.5 * (std::log(2.0 * M_PI * f) + e * e / f);
    }
    out.filtered[j] = a;
  }
  out.log_likelihood = ll;
  if (!smooth) return out;

  out.smoothed.resize(n);
  out.smoothed[n - 1] = out.filtered[n - 1];
  for (std::size_t jj = n - 1; jj-- > 0;)
    out.smoothed[jj] = out.filtered[jj] +
                       g.smoother_gains[jj] * (out.smoothed[jj + 1] - out.predicted[jj + 1]);
  return out;
}

inline std::vector<std::vector<double>> observed_values(const LinearGaussianSSM& ssm) {
  std::vector<std::vector<double>> v(ssm.epochs());
  for (std::size_t j = 0; j < ssm.epochs(); ++j) {
    v[j].reserve(ssm.rows[j].size());
    for (const ObservationRow& row : ssm.rows[j]) v[j].push_back(row.value);
  }
  return v;
}

/// Lower factor L with L L' = m for a PSD matrix (eigen fallback when the
/// Cholesky factorization fails on a semidefinite input).
inline StateMatrix psd_factor(const StateMatrix& m) {
  Eigen::LLT<StateMatrix> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<StateMatrix> es(m);
  const StateVector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal();
}

template <class Rng>
StateVector standard_normal_vector(int dim, Rng& rng) {
  std::normal_distribution<double> z;
  StateVector v(dim);
  for (int i = 0; i < dim; ++i) v(i) = z(rng);
  return v;
}

}  // namespace detail

inline SmootherOutput kalman_filter(const LinearGaussianSSM& ssm) {
  ssm.validate();
  detail::KalmanGains g = detail::compute_gains(ssm, false);
  detail::MeanPass m =
      detail::mean_pass(ssm, g, detail::observed_values(ssm), ssm.initial_mean, false);
  SmootherOutput out;
  out.predicted_means = std::move(m.predicted);
  out.predicted_covs = std::move(g.predicted_covs);
  out.filtered_means = std::move(m.filtered);
  out.filtered_covs = std::move(g.filtered_covs);
  out.log_likelihood = m.log_likelihood;
  return out;
}

inline SmootherOutput kalman_smooth(const LinearGaussianSSM& ssm) {
  ssm.validate();
  detail::KalmanGains g = detail::compute_gains(ssm, true);
  detail::MeanPass m =
      detail::mean_pass(ssm, g, detail::observed_values(ssm), ssm.initial_mean, true);
  SmootherOutput out;
  out.predicted_means = std::move(m.predicted);
  out.predicted_covs = std::move(g.predicted_covs);
  out.filtered_means = std::move(m.filtered);
  out.filtered_covs = std::move(g.filtered_covs);
  out.smoothed_means = std::move(m.smoothed);
  out.smoothed_covs = std::move(g.smoothed_covs);
  out.log_likelihood = m.log_likelihood;
  return out;
}

/// One draw of all states jointly from p(x_0, ..., x_n | y), by mean
/// correction: simulate (x+, y+) from the model, then return
/// x+ + E[x | y - y+] where the smoother runs with zero initial mean. Since the
/// smoother is affine in the data this equals x_hat + x+ - x_hat+.
template <class Rng>
std::vector<StateVector> simulation_smoother(const LinearGaussianSSM& ssm, Rng& rng) {
  ssm.validate();
  const std::size_t n = ssm.epochs();
  const int r = ssm.state_dim;
  const detail::KalmanGains g = detail::compute_gains(ssm, true);

  std::normal_distribution<double> z;
  std::vector<StateVector> x_plus(n);
  x_plus[0] = ssm.initial_mean + detail::psd_factor(ssm.initial_cov) *
                                     detail::standard_normal_vector(r, rng);
  for (std::size_t j = 1; j < n; ++j) {
    const Transition& tr = ssm.transitions[j - 1];
    x_plus[j] = tr.G * x_plus[j - 1] + detail::psd_factor(tr.W) * detail::standard_normal_vector(r, rng);
  }

  std::vector<std::vector<double>> diff(n);
  for (std::size_t j = 0; j < n; ++j) {
    diff[j].reserve(ssm.rows[j].size());
    for (const ObservationRow& row : ssm.rows[j]) {
      const double y_plus = row.loading.dot(x_plus[j]) + std::sqrt(row.variance) * z(rng);
      diff[j].push_back(row.value - y_plus);
    }
  }

  detail::MeanPass m = detail::mean_pass(ssm, g, diff, StateVector::Zero(r), true);
  for (std::size_t j = 0; j < n; ++j) x_plus[j] += m.smoothed[j];
  return x_plus;
}

}  // namespace svr
