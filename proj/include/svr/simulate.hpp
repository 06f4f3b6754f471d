// Synthetic multi-subject data for the two simulation designs.
//
// Case I draws from the volatility-regression model itself; Case II uses
// fixed smooth group curves plus two random functional components, so all
// subjects share one volatility level.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "svr/dataset.hpp"
#include "svr/random.hpp"
#include "svr/smoother.hpp"
#include "svr/statespace.hpp"

namespace svr {

struct SimTruth {
  std::vector<double> grid;                 // design grid shared by all subjects
  std::vector<std::vector<double>> M;       // per group, at each grid point
  std::vector<std::vector<double>> U;       // per subject, at each grid point
  std::vector<std::vector<bool>> observed;  // per subject, retained after deletion
  std::vector<std::string> ids;
  std::vector<int> groups;
  Eigen::MatrixXd X;                        // m x 3, first column ones
  std::vector<double> sigma2_U;             // empty when the design has no volatilities
  Eigen::VectorXd beta;                     // empty when the design has no regression

  bool has_volatility() const { return !sigma2_U.empty(); }

  /// True M + U at subject i's retained points.
  std::vector<double> trajectory(std::size_t i) const {
    std::vector<double> out;
    const auto& m = M[static_cast<std::size_t>(groups[i] - 1)];
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (observed[i][j]) out.push_back(m[j] + U[i][j]);
    return out;
  }
};

struct SimOptions {
  std::size_t subjects = 100;
  double retention = 0.8;     // per-point keep probability
  double noise_variance = 1.0;
};

struct SimResult {
  Dataset data;
  SimTruth truth;
};

namespace detail {

inline std::vector<double> design_grid() {
  std::vector<double> g;
  for (int j = 1; j <= 20; ++j) g.push_back(0.2 * j);
  return g;
}

inline std::string subject_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%03zu", i + 1);
  return buf;
}

/// First coordinate of an order-r integrated Wiener path started at zero at
/// t = 0, with diffusion `variance`, sampled exactly at `grid`.
template <class R>
std::vector<double> integrated_wiener_path(int r, double variance, const std::vector<double>& grid,
                                           R& rng) {
  StateVector x = StateVector::Zero(r);
  std::vector<double> out;
  double prev = 0.0;
  for (double t : grid) {
    const Transition tr = Transition::make(r, t - prev);
    x = tr.G * x + detail::psd_factor(variance * tr.W) * detail::standard_normal_vector(r, rng);
    out.push_back(x(0));
    prev = t;
  }
  return out;
}

template <class R>
std::vector<int> group_labels(std::size_t m, R& rng) {
  std::bernoulli_distribution second(0.5);
  std::vector<int> g(m);
  for (;;) {
    int ones = 0;
    for (auto& v : g) {
      v = second(rng) ? 2 : 1;
      ones += v == 1;
    }
    if (m < 2 || (ones > 0 && ones < static_cast<int>(m))) return g;
  }
}

template <class R>
std::vector<bool> retention_mask(std::size_t n, double keep, R& rng) {
  std::bernoulli_distribution b(keep);
  std::vector<bool> mask(n);
  for (;;) {
    std::size_t kept = 0;
    for (std::size_t j = 0; j < n; ++j) {
      mask[j] = b(rng);
      kept += mask[j];
    }
    if (kept >= 2) return mask;
  }
}

template <class R>
void draw_covariates(SimTruth& t, std::size_t m, R& rng) {
  std::bernoulli_distribution x1(0.4);
  std::normal_distribution<double> x2(0.0, 0.5);  // variance 0.25
  t.X.resize(static_cast<Eigen::Index>(m), 3);
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    t.X(r, 0) = 1.0;
    t.X(r, 1) = x1(rng) ? 1.0 : 0.0;
    t.X(r, 2) = x2(rng);
  }
}

template <class R>
Dataset assemble(const SimTruth& t, double noise_variance, R& rng) {
  std::normal_distribution<double> z;
  const double sd = std::sqrt(noise_variance);
  Dataset d;
  d.groups = 2;
  d.covariate_names = {"x1", "x2"};
  for (std::size_t i = 0; i < t.ids.size(); ++i) {
    Subject s;
    s.id = t.ids[i];
    s.group = t.groups[i];
    const auto& m = t.M[static_cast<std::size_t>(s.group - 1)];
    for (std::size_t j = 0; j < t.grid.size(); ++j) {
      const double e = sd * z(rng);  // drawn for every grid point so deletion does not shift the stream
      if (!t.observed[i][j]) continue;
      s.times.push_back(t.grid[j]);
      s.values.push_back(m[j] + t.U[i][j] + e);
    }
    const auto r = static_cast<Eigen::Index>(i);
    s.covariates = {t.X(r, 0), t.X(r, 1), t.X(r, 2)};
    d.subjects.push_back(std::move(s));
  }
  d.finalize(2);
  return d;
}

}  // namespace detail

inline void validate(const SimOptions& o) {
  if (o.subjects == 0) throw std::invalid_argument("need at least one subject");
  if (!(o.retention > 0.0 && o.retention <= 1.0))
    throw std::invalid_argument("retention probability must lie in (0, 1]");
  if (!(o.noise_variance >= 0.0)) throw std::invalid_argument("noise variance must be non-negative");
}

/// Case I: sigma2_M1 = sigma2_M2 = 10, sigma2_eps = 1, p = 2, q = 1,
/// log sigma2_Ui ~ N(x_i' beta, 1) with beta = (0, 0.6, 2)', x_i1 ~ Bernoulli(0.4),
/// x_i2 ~ N(0, 0.25). Paths start from zero at t = 0.
inline SimResult gen_case1(std::uint64_t seed, SimOptions opts = {}) {
  validate(opts);
  Rng rng(mix64(seed ^ 0x5eed0001ULL));
  const std::size_t m = opts.subjects;
  SimTruth t;
  t.grid = detail::design_grid();
  t.beta = Eigen::Vector3d(0.0, 0.6, 2.0);
  for (int g = 0; g < 2; ++g) t.M.push_back(detail::integrated_wiener_path(2, 10.0, t.grid, rng));
  t.groups = detail::group_labels(m, rng);
  detail::draw_covariates(t, m, rng);
  std::normal_distribution<double> z;
  for (std::size_t i = 0; i < m; ++i) {
    t.ids.push_back(detail::subject_id(i));
    const double mean = t.X.row(static_cast<Eigen::Index>(i)).dot(t.beta);
    t.sigma2_U.push_back(std::exp(mean + z(rng)));
    t.U.push_back(detail::integrated_wiener_path(1, t.sigma2_U.back(), t.grid, rng));
    t.observed.push_back(detail::retention_mask(t.grid.size(), opts.retention, rng));
  }
  Dataset d = detail::assemble(t, opts.noise_variance, rng);
  return {std::move(d), std::move(t)};
}

/// Case II mean curve of 1-based group g.
inline double case2_mean(int g, double t) {
  return g == 1 ? 10.0 * (t + std::sin(t)) : 10.0 * (t + std::cos(t));
}

/// Case II subject deviation with random scores a1 ~ N(0, 4), a2 ~ N(0, 1).
inline double case2_deviation(int g, double a1, double a2, double t) {
  const double c = std::cos(M_PI * t / 10.0);
  const double s = std::sin(M_PI * t / 10.0);
  return g == 1 ? 0.6 * a1 * c + 0.2 * a2 * s : 0.5 * a1 * c + 0.3 * a2 * s;
}

inline SimResult gen_case2(std::uint64_t seed, SimOptions opts = {}) {
  validate(opts);
  Rng rng(mix64(seed ^ 0x5eed0002ULL));
  const std::size_t m = opts.subjects;
  SimTruth t;
  t.grid = detail::design_grid();
  for (int g = 1; g <= 2; ++g) {
    std::vector<double> curve;
    for (double x : t.grid) curve.push_back(case2_mean(g, x));
    t.M.push_back(std::move(curve));
  }
  t.groups = detail::group_labels(m, rng);
  detail::draw_covariates(t, m, rng);
  std::normal_distribution<double> a1(0.0, 2.0);
  std::normal_distribution<double> a2(0.0, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    t.ids.push_back(detail::subject_id(i));
    const double s1 = a1(rng);
    const double s2 = a2(rng);
    std::vector<double> u;
    for (double x : t.grid) u.push_back(case2_deviation(t.groups[i], s1, s2, x));
    t.U.push_back(std::move(u));
    t.observed.push_back(detail::retention_mask(t.grid.size(), opts.retention, rng));
  }
  Dataset d = detail::assemble(t, opts.noise_variance, rng);
  return {std::move(d), std::move(t)};
}

}  // namespace svr
