// Covariance kernels of the Gaussian processes induced by the SDE priors.
//
// An order-r process started from X_0 ~ N(0, s0 I) at t = 0 with diffusion s1
// splits into a polynomial part with kernel s0 * sum_l phi_l(s) phi_l(t) and a
// Wiener part with kernel s1 * int G_r(s,u) G_r(t,u) du, where
// phi_l(t) = t^l / l! and G_r(s,u) = (s-u)_+^{r-1} / (r-1)!.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "svr/errors.hpp"
#include "svr/statespace.hpp"

namespace svr {

inline double poly_basis(int l, double t) {
  if (l < 0) return 0.0;
  double v = 1.0;
  for (int k = 1; k <= l; ++k) v *= t / k;
  return v;
}

/// d^ds/ds^ds d^dt/dt^dt of sum_{l<r} phi_l(s) phi_l(t).
inline double null_kernel_derivative(int r, int ds, int dt, double s, double t) {
  double sum = 0.0;
  for (int l = std::max(ds, dt); l < r; ++l) sum += poly_basis(l - ds, s) * poly_basis(l - dt, t);
  return sum;
}

inline double null_kernel(int r, double s, double t) { return null_kernel_derivative(r, 0, 0, s, t); }

/// d^ds/ds^ds d^dt/dt^dt of int_0^min(s,t) G_r(s,u) G_r(t,u) du, for ds, dt < r.
///
/// Differentiating lowers each truncated power, giving
///   int_0^a v^{ea} (d + v)^{eb} dv / (ea! eb!)
/// with a = min(s,t), d = |s - t| and ea, eb the exponents attached to the
/// nearer and farther point. Expanding (d + v)^{eb} binomially integrates
/// term by term.
inline double green_kernel_derivative(int r, int ds, int dt, double s, double t) {
  if (ds < 0 || dt < 0 || ds >= r || dt >= r)
    throw std::invalid_argument("derivative order must lie in [0, r)");
  const int es = r - 1 - ds;
  const int et = r - 1 - dt;
  const bool s_first = s <= t;
  const double a = s_first ? s : t;
  if (a <= 0.0) return 0.0;
  const double d = s_first ? t - s : s - t;
  const int ea = s_first ? es : et;
  const int eb = s_first ? et : es;
  double sum = 0.0;
  double binom = 1.0;
  for (int k = 0; k <= eb; ++k) {
    if (k > 0) binom = binom * (eb - k + 1) / k;
    sum += binom * std::pow(d, eb - k) * std::pow(a, ea + k + 1) / (ea + k + 1);
  }
  return sum / (detail::factorial(ea) * detail::factorial(eb));
}

inline double green_kernel(int r, double s, double t) { return green_kernel_derivative(r, 0, 0, s, t); }

enum class KernelKind { null, green };

namespace detail {
inline void require_sorted(std::span<const double> points) {
  if (!std::is_sorted(points.begin(), points.end()))
    throw std::invalid_argument("kernel points must be sorted ascending");
}
}  // namespace detail

/// For KernelKind::green the n x n Gram matrix; for KernelKind::null the
/// n x r basis matrix with rows (phi_0(t), ..., phi_{r-1}(t)).
inline Eigen::MatrixXd gram(std::span<const double> points, int r, KernelKind kind) {
  detail::require_sorted(points);
  const auto n = static_cast<Eigen::Index>(points.size());
  if (kind == KernelKind::null) {
    Eigen::MatrixXd phi(n, r);
    for (Eigen::Index i = 0; i < n; ++i)
      for (int l = 0; l < r; ++l) phi(i, l) = poly_basis(l, points[i]);
    return phi;
  }
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = green_kernel(r, points[i], points[j]);
      k(j, i) = k(i, j);
    }
  }
  return k;
}

// ---------------------------------------------------------------------------
// Direct Gaussian-process conditioning (small-instance oracle).
// ---------------------------------------------------------------------------

/// One latent integrated-Wiener process with its two variance components.
struct GpComponent {
  int order = 1;
  double null_variance = 1.0;   // initial-state variance (per coordinate)
  double green_variance = 1.0;  // diffusion
};

/// Linear functional sum_{c in components} D^derivative X_c(time).
struct GpFunctional {
  double time = 0.0;
  int derivative = 0;
  std::vector<int> components;
};

struct GpObservation {
  GpFunctional at;
  double value = 0.0;
};

struct GpProblem {
  std::vector<GpComponent> components;
  double noise_variance = 1.0;
  std::vector<GpObservation> observations;
};

struct GpPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double log_likelihood = 0.0;  // log density of the observation vector
};

inline constexpr std::size_t kDirectGpMaxObservations = 200;

inline double functional_covariance(const GpProblem& problem, const GpFunctional& a,
                                    const GpFunctional& b) {
  double cov = 0.0;
  for (int ca : a.components) {
    for (int cb : b.components) {
      if (ca != cb) continue;
      const GpComponent& c = problem.components.at(static_cast<std::size_t>(ca));
      if (a.derivative >= c.order || b.derivative >= c.order)
        throw std::invalid_argument("functional derivative exceeds process order");
      cov += c.null_variance * null_kernel_derivative(c.order, a.derivative, b.derivative, a.time, b.time);
      cov += c.green_variance *
             green_kernel_derivative(c.order, a.derivative, b.derivative, a.time, b.time);
    }
  }
  return cov;
}

/// Exact Gaussian conditioning of the queried functionals on the observations.
/// O(n^3); meant for instances of at most 200 observations.
inline GpPosterior direct_gp_posterior(const GpProblem& problem,
                                       std::span<const GpFunctional> queries) {
  const std::size_t n = problem.observations.size();
  if (n > kDirectGpMaxObservations)
    throw std::invalid_argument("direct GP oracle is limited to " +
                                std::to_string(kDirectGpMaxObservations) + " observations");
  const auto nq = static_cast<Eigen::Index>(queries.size());
  const auto no = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd kqq(nq, nq);
  for (Eigen::Index i = 0; i < nq; ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      kqq(i, j) = kqq(j, i) = functional_covariance(problem, queries[i], queries[j]);

  GpPosterior out;
  if (n == 0) {
    out.mean = Eigen::VectorXd::Zero(nq);
    out.cov = kqq;
    return out;
  }

  Eigen::MatrixXd koo(no, no);
  Eigen::VectorXd y(no);
  for (Eigen::Index i = 0; i < no; ++i) {
    y(i) = problem.observations[i].value;
    for (Eigen::Index j = 0; j <= i; ++j)
      koo(i, j) = koo(j, i) =
          functional_covariance(problem, problem.observations[i].at, problem.observations[j].at);
  }
  koo.diagonal().array() += problem.noise_variance;

  Eigen::LLT<Eigen::MatrixXd> llt(koo);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(koo, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "observation covariance is not positive definite (n=" << n
        << ", min eigenvalue=" << es.eigenvalues().minCoeff()
        << ", max eigenvalue=" << es.eigenvalues().maxCoeff() << ")";
    throw NumericalError(msg.str());
  }

  Eigen::MatrixXd kqo(nq, no);
  for (Eigen::Index i = 0; i < nq; ++i)
    for (Eigen::Index j = 0; j < no; ++j)
      kqo(i, j) = functional_covariance(problem, queries[i], problem.observations[j].at);

  const Eigen::VectorXd alpha = llt.solve(y);
  out.mean = kqo * alpha;
  const Eigen::MatrixXd v = llt.matrixL().solve(kqo.transpose());
  out.cov = kqq - v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose());

  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  out.log_likelihood =
      -0.5 * (y.dot(alpha) + log_det + static_cast<double>(n) * std::log(2.0 * M_PI));
  return out;
}

}  // namespace svr
