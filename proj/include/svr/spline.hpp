// Double-penalized smoothing splines.
//
// With volatilities fixed and diffuse initial states, the posterior means of
// M_k and U_i minimize
//
//   DPSS = sum_i (1/n_i) |Y_i - M_{k_i}(T_i) - U_i(T_i)|^2
//          + sum_k lambda_Mk int (D^p M_k)^2 + sum_i lambda_Ui int (D^q U_i)^2
//
// whose minimizers are finite representer expansions
//   M_k(t) = mu_k' phi(t) + sum_j nu_kj R_p(t_j, t)   (t_j on the merged grid)
//   U_i(t) = alpha_i' phi(t) + sum_j gamma_ij R_q(t_ij, t).
// Coefficients are found by block coordinate descent (backfitting).
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "svr/dataset.hpp"
#include "svr/errors.hpp"
#include "svr/gp_kernels.hpp"

namespace svr {

struct SplineFit {
  std::vector<Eigen::VectorXd> mu;     // per group, length p
  std::vector<Eigen::VectorXd> nu;     // per group, length n (merged grid)
  std::vector<Eigen::VectorXd> alpha;  // per subject, length q
  std::vector<Eigen::VectorXd> gamma;  // per subject, length n_i
  std::vector<double> lambda_M;
  std::vector<double> lambda_U;
  double dpss_value = 0.0;
  int sweeps = 0;
  std::vector<double> dpss_history;  // objective after each sweep
};

/// Smoothing parameters implied by fixed variance components:
/// lambda_Mk = sum_{i in k} sigma2_eps / (n_i sigma2_Mk), lambda_Ui = sigma2_eps / (n_i sigma2_Ui).
inline void variance_lambdas(const Dataset& data, double sigma2_eps,
                             const std::vector<double>& sigma2_M,
                             const std::vector<double>& sigma2_U, std::vector<double>& lambda_M,
                             std::vector<double>& lambda_U) {
  lambda_M.assign(static_cast<std::size_t>(data.groups), 0.0);
  lambda_U.assign(data.size(), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double ni = static_cast<double>(data.subjects[i].times.size());
    const auto g = static_cast<std::size_t>(data.subjects[i].group - 1);
    lambda_M[g] += sigma2_eps / (ni * sigma2_M[g]);
    lambda_U[i] = sigma2_eps / (ni * sigma2_U[i]);
  }
}

inline constexpr std::size_t kSplineMaxGrid = 2000;

/// Representer bases of one dataset for orders (p, q).
class SplineBasis {
 public:
  SplineBasis(const Dataset& data, int p, int q) : data_(&data), p_(p), q_(q) {
    if (p < 1 || q < 1) throw std::invalid_argument("spline orders must be positive");
    if (data.grid_size() > kSplineMaxGrid)
      throw std::invalid_argument("merged grid has " + std::to_string(data.grid_size()) +
                                  " points; the dense spline solver is limited to " +
                                  std::to_string(kSplineMaxGrid));
    phi_mu_ = gram(data.grid, p, KernelKind::null);
    r_m_ = gram(data.grid, p, KernelKind::green);
    for (const Subject& s : data.subjects) {
      phi_alpha_.push_back(gram(s.times, q, KernelKind::null));
      r_u_.push_back(gram(s.times, q, KernelKind::green));
    }
  }

  const Dataset& data() const { return *data_; }
  int p() const { return p_; }
  int q() const { return q_; }
  const Eigen::MatrixXd& phi_mu() const { return phi_mu_; }
  const Eigen::MatrixXd& r_m() const { return r_m_; }
  const Eigen::MatrixXd& phi_alpha(std::size_t i) const { return phi_alpha_[i]; }
  const Eigen::MatrixXd& r_u(std::size_t i) const { return r_u_[i]; }

  /// M_k on the merged grid.
  Eigen::VectorXd mean_on_grid(const SplineFit& fit, std::size_t g) const {
    return phi_mu_ * fit.mu[g] + r_m_ * fit.nu[g];
  }
  /// M_{k_i} at subject i's observation times (Delta_i applied).
  Eigen::VectorXd mean_at_subject(const SplineFit& fit, std::size_t i) const {
    const auto g = static_cast<std::size_t>(data_->subjects[i].group - 1);
    const Eigen::VectorXd on_grid = mean_on_grid(fit, g);
    const auto& idx = data_->grid_index[i];
    Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j)
      out(static_cast<Eigen::Index>(j)) = on_grid(static_cast<Eigen::Index>(idx[j]));
    return out;
  }
  Eigen::VectorXd deviation_at_subject(const SplineFit& fit, std::size_t i) const {
    return phi_alpha_[i] * fit.alpha[i] + r_u_[i] * fit.gamma[i];
  }
  Eigen::VectorXd observations(std::size_t i) const {
    const auto& v = data_->subjects[i].values;
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  SplineFit zero_fit() const {
    SplineFit f;
    const auto n = static_cast<Eigen::Index>(data_->grid_size());
    f.mu.assign(static_cast<std::size_t>(data_->groups), Eigen::VectorXd::Zero(p_));
    f.nu.assign(static_cast<std::size_t>(data_->groups), Eigen::VectorXd::Zero(n));
    for (const Subject& s : data_->subjects) {
      f.alpha.push_back(Eigen::VectorXd::Zero(q_));
      f.gamma.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.times.size())));
    }
    return f;
  }

 private:
  const Dataset* data_;
  int p_;
  int q_;
  Eigen::MatrixXd phi_mu_;
  Eigen::MatrixXd r_m_;
  std::vector<Eigen::MatrixXd> phi_alpha_;
  std::vector<Eigen::MatrixXd> r_u_;
};

/// Objective in matrix form, using the coefficients and lambdas stored in `fit`.
inline double dpss_objective(const SplineBasis& basis, const SplineFit& fit) {
  const Dataset& d = basis.data();
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Eigen::VectorXd res =
        basis.observations(i) - basis.mean_at_subject(fit, i) - basis.deviation_at_subject(fit, i);
    total += res.squaredNorm() / static_cast<double>(d.subjects[i].times.size());
    total += fit.lambda_U[i] * fit.gamma[i].dot(basis.r_u(i) * fit.gamma[i]);
  }
  for (std::size_t g = 0; g < static_cast<std::size_t>(d.groups); ++g)
    total += fit.lambda_M[g] * fit.nu[g].dot(basis.r_m() * fit.nu[g]);
  return total;
}

namespace detail {

/// Solves S c + Psi b = rhs, Phi' c = 0 by eliminating c:
///   c = S^{-1} (rhs - Psi b),  (Phi' S^{-1} Psi) b = Phi' S^{-1} rhs.
/// S is nonsingular for any positive smoothing parameter; the small p x p
/// system is singular when the data cannot identify the null-space part.
inline void constrained_solve(const Eigen::MatrixXd& s, const Eigen::MatrixXd& phi,
                              const Eigen::MatrixXd& psi, const Eigen::VectorXd& rhs,
                              Eigen::VectorXd& c, Eigen::VectorXd& b, const std::string& what) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(s);
  const Eigen::MatrixXd s_psi = lu.solve(psi);
  const Eigen::VectorXd s_rhs = lu.solve(rhs);
  const Eigen::MatrixXd small = phi.transpose() * s_psi;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(small);
  if (qr.rank() < small.cols() || !s_rhs.allFinite())
    throw NumericalError("singular system in " + what);
  b = qr.solve(phi.transpose() * s_rhs);
  c = s_rhs - s_psi * b;
}

inline void bordered_solve(const Eigen::MatrixXd& s, const Eigen::MatrixXd& phi,
                           const Eigen::VectorXd& rhs, Eigen::VectorXd& c, Eigen::VectorXd& b,
                           const std::string& what) {
  constrained_solve(s, phi, phi, rhs, c, b, what);
}

}  // namespace detail

/// Step (a): for fixed means, each subject's (alpha_i, gamma_i) solve
///   (R_Ui + n_i lambda_Ui I) gamma + Phi_i alpha = Ytilde_i,  Phi_i' gamma = 0.
inline void backfit_subjects(const SplineBasis& basis, SplineFit& fit) {
  const Dataset& d = basis.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double ni = static_cast<double>(d.subjects[i].times.size());
    const Eigen::VectorXd y_tilde = basis.observations(i) - basis.mean_at_subject(fit, i);
    Eigen::MatrixXd s = basis.r_u(i);
    s.diagonal().array() += ni * fit.lambda_U[i];
    detail::bordered_solve(s, basis.phi_alpha(i), y_tilde, fit.gamma[i], fit.alpha[i],
                           "subject step");
  }
}

/// Step (b): for fixed deviations, each group's (mu_k, nu_k) solve
///   (Delta R_M + lambda_Mk I) nu + Delta Phi mu = Ytilde_k,  Phi' nu = 0,
/// with Delta = sum_i Delta_i' Delta_i / n_i and
/// Ytilde_k = sum_i Delta_i' (Y_i - U_i) / n_i.
inline void backfit_groups(const SplineBasis& basis, SplineFit& fit) {
  const Dataset& d = basis.data();
  const auto n = static_cast<Eigen::Index>(d.grid_size());
  for (int g = 1; g <= d.groups; ++g) {
    const auto gk = static_cast<std::size_t>(g - 1);
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd y_tilde = Eigen::VectorXd::Zero(n);
    for (std::size_t i : d.members(g)) {
      const double ni = static_cast<double>(d.subjects[i].times.size());
      const Eigen::VectorXd r = basis.observations(i) - basis.deviation_at_subject(fit, i);
      for (std::size_t j = 0; j < d.grid_index[i].size(); ++j) {
        const auto col = static_cast<Eigen::Index>(d.grid_index[i][j]);
        weight(col) += 1.0 / ni;
        y_tilde(col) += r(static_cast<Eigen::Index>(j)) / ni;
      }
    }
    if (weight.sum() == 0.0) {
      fit.mu[gk].setZero();
      fit.nu[gk].setZero();
      continue;
    }
    Eigen::MatrixXd s = weight.asDiagonal() * basis.r_m();
    s.diagonal().array() += fit.lambda_M[gk];
    // Constraint Phi' nu = 0 (not (Delta Phi)' nu = 0).
    detail::constrained_solve(s, basis.phi_mu(), weight.asDiagonal() * basis.phi_mu(), y_tilde,
                              fit.nu[gk], fit.mu[gk], "group step for group " + std::to_string(g));
  }
}

struct BackfitOptions {
  double tol = 1e-8;  // relative DPSS change
  int max_iter = 200;
  // When positive, also require the fitted values to move by less than this
  // between sweeps. The objective stalls at rounding level well before the
  // coefficients settle, so tight stationarity needs this second test.
  double fit_tol = 0.0;
};

namespace detail {
inline Eigen::VectorXd stacked_fit(const SplineBasis& basis, const SplineFit& fit) {
  const Dataset& d = basis.data();
  Eigen::VectorXd out(static_cast<Eigen::Index>(d.observation_count() * 2));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto n = static_cast<Eigen::Index>(d.subjects[i].times.size());
    out.segment(k, n) = basis.mean_at_subject(fit, i);
    out.segment(k + n, n) = basis.deviation_at_subject(fit, i);
    k += 2 * n;
  }
  return out;
}
}  // namespace detail

/// Alternates steps (a) and (b) from zero coefficients until the relative
/// change of the objective drops below tol (and the fit moves less than
/// fit_tol, when set).
inline SplineFit backfit(const SplineBasis& basis, const std::vector<double>& lambda_M,
                         const std::vector<double>& lambda_U, BackfitOptions opts = {}) {
  const Dataset& d = basis.data();
  if (lambda_M.size() != static_cast<std::size_t>(d.groups) || lambda_U.size() != d.size())
    throw std::invalid_argument("one lambda per group and per subject required");
  for (double l : lambda_M)
    if (!(l > 0.0)) throw std::invalid_argument("smoothing parameters must be positive");
  for (double l : lambda_U)
    if (!(l > 0.0)) throw std::invalid_argument("smoothing parameters must be positive");

  SplineFit fit = basis.zero_fit();
  fit.lambda_M = lambda_M;
  fit.lambda_U = lambda_U;
  double prev = dpss_objective(basis, fit);
  Eigen::VectorXd prev_fit;
  if (opts.fit_tol > 0.0) prev_fit = detail::stacked_fit(basis, fit);
  for (int sweep = 1; sweep <= opts.max_iter; ++sweep) {
    backfit_subjects(basis, fit);
    backfit_groups(basis, fit);
    const double cur = dpss_objective(basis, fit);
    fit.dpss_history.push_back(cur);
    fit.sweeps = sweep;
    fit.dpss_value = cur;
    const double scale = std::max(std::abs(prev), std::numeric_limits<double>::min());
    bool done = std::abs(prev - cur) / scale < opts.tol;
    if (opts.fit_tol > 0.0) {
      Eigen::VectorXd now = detail::stacked_fit(basis, fit);
      done = done && (now - prev_fit).cwiseAbs().maxCoeff() < opts.fit_tol;
      prev_fit = std::move(now);
    }
    if (done) break;
    prev = cur;
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Single-series smoothing splines (per-subject baseline).
// ---------------------------------------------------------------------------

/// Minimizer of (1/n) |y - f|^2 + lambda int (D^r f)^2 over one series.
/// r = 2 gives the natural cubic smoothing spline.
struct SeriesSpline {
  std::vector<double> knots;
  int order = 2;
  Eigen::VectorXd fitted;
  Eigen::VectorXd alpha;
  Eigen::VectorXd gamma;
  double lambda = 0.0;
  double gcv = std::numeric_limits<double>::quiet_NaN();

  /// The fitted function at any t >= 0.
  double operator()(double t) const {
    double v = 0.0;
    for (Eigen::Index l = 0; l < alpha.size(); ++l) v += alpha(l) * poly_basis(static_cast<int>(l), t);
    for (std::size_t j = 0; j < knots.size() && j < static_cast<std::size_t>(gamma.size()); ++j)
      v += gamma(static_cast<Eigen::Index>(j)) * green_kernel(order, knots[j], t);
    return v;
  }
};

inline SeriesSpline smoothing_spline(std::span<const double> times, std::span<const double> values,
                                     double lambda, int r = 2) {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (times.size() != values.size()) throw std::invalid_argument("times and values differ in length");
  if (n < r + 1) throw std::invalid_argument("too few points for the spline order");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  const Eigen::MatrixXd phi = gram(times, r, KernelKind::null);
  const Eigen::MatrixXd rk = gram(times, r, KernelKind::green);
  Eigen::MatrixXd s = rk;
  s.diagonal().array() += static_cast<double>(n) * lambda;
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
  SeriesSpline out;
  out.knots.assign(times.begin(), times.end());
  out.order = r;
  out.lambda = lambda;
  detail::bordered_solve(s, phi, y, out.gamma, out.alpha, "series spline");
  out.fitted = phi * out.alpha + rk * out.gamma;
  return out;
}

/// n |(I - A) y|^2 / tr(I - A)^2 for the smoother matrix A(lambda).
/// I - A = n lambda Q with Q = S^{-1} - S^{-1} Phi (Phi' S^{-1} Phi)^{-1} Phi' S^{-1}.
inline double gcv_score(std::span<const double> times, std::span<const double> values,
                        double lambda, int r = 2) {
  const auto n = static_cast<Eigen::Index>(times.size());
  if (times.size() != values.size()) throw std::invalid_argument("times and values differ in length");
  if (n < r + 1) throw std::invalid_argument("too few points for the spline order");
  if (!(lambda > 0.0)) throw std::invalid_argument("GCV needs lambda > 0 (trace(I - A) vanishes)");
  const Eigen::MatrixXd phi = gram(times, r, KernelKind::null);
  Eigen::MatrixXd s = gram(times, r, KernelKind::green);
  const double nl = static_cast<double>(n) * lambda;
  s.diagonal().array() += nl;
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("GCV: penalized Gram matrix not positive definite");
  const Eigen::MatrixXd s_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd b = s_inv * phi;
  const Eigen::MatrixXd c = phi.transpose() * b;
  const Eigen::MatrixXd q = s_inv - b * c.ldlt().solve(b.transpose());
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values.data(), n);
  const double tr = nl * q.trace();
  if (!(tr > 0.0)) throw std::invalid_argument("GCV: trace(I - A) is zero for this lambda");
  const Eigen::VectorXd res = nl * (q * y);
  return static_cast<double>(n) * res.squaredNorm() / (tr * tr);
}

inline constexpr int kGcvGridPoints = 41;

/// Log-spaced grid 1e-6 .. 1e6 times the pilot tr(R) / n^2.
inline std::vector<double> gcv_grid(std::span<const double> times, int r = 2) {
  const Eigen::MatrixXd rk = gram(times, r, KernelKind::green);
  const double n = static_cast<double>(times.size());
  const double pilot = rk.trace() / (n * n);
  std::vector<double> grid;
  for (int k = 0; k < kGcvGridPoints; ++k)
    grid.push_back(pilot * std::pow(10.0, -6.0 + 12.0 * k / (kGcvGridPoints - 1)));
  return grid;
}

/// Cubic smoothing spline of one series; lambda by GCV over gcv_grid() when
/// not supplied.
inline SeriesSpline ncs_fit(std::span<const double> times, std::span<const double> values,
                            std::optional<double> lambda = std::nullopt) {
  if (times.size() < 4) throw std::invalid_argument("cubic spline fit needs at least 4 points");
  if (lambda) return smoothing_spline(times, values, *lambda, 2);
  double best_lambda = 0.0;
  double best_score = std::numeric_limits<double>::infinity();
  for (double l : gcv_grid(times, 2)) {
    const double score = gcv_score(times, values, l, 2);
    if (score < best_score) {
      best_score = score;
      best_lambda = l;
    }
  }
  SeriesSpline out = smoothing_spline(times, values, best_lambda, 2);
  out.gcv = best_score;
  return out;
}

}  // namespace svr
