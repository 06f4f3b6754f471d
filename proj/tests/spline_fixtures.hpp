// Small spline instances and the exact references they are checked against.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "svr/gp_kernels.hpp"
#include "svr/spline.hpp"

namespace svr::fixtures {

inline Dataset toy(const std::vector<std::vector<double>>& times, const std::vector<int>& groups,
                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Dataset d;
  d.covariate_names = {};
  for (std::size_t i = 0; i < times.size(); ++i) {
    Subject s;
    s.id = "t" + std::to_string(i);
    s.group = groups[i];
    s.times = times[i];
    for (double t : s.times) s.values.push_back(std::sin(t) + 0.3 * t * groups[i] + 0.4 * z(rng));
    s.covariates = {1.0};
    d.subjects.push_back(s);
  }
  d.finalize(2);
  return d;
}

inline Dataset two_by_three() { return toy({{0.3, 1.1, 2.0}, {0.5, 1.1, 2.4}}, {1, 1}, 5); }

inline Dataset four_subjects(std::vector<int> groups) {
  return toy({{0.2, 0.7, 1.5, 2.1, 3.0},
              {0.4, 0.7, 1.2, 2.5, 2.9},
              {0.3, 1.0, 1.6, 2.2, 2.8},
              {0.5, 0.9, 1.6, 2.0, 3.1}},
             groups, 9);
}

// Sum of the four stationarity residual norms of the DPSS.
inline double normal_equation_residual(const SplineBasis& b, const SplineFit& f) {
  const Dataset& d = b.data();
  double worst = 0.0;
  std::vector<Eigen::VectorXd> res(d.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    res[i] = b.mean_at_subject(f, i) + b.deviation_at_subject(f, i) - b.observations(i);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double ni = static_cast<double>(d.subjects[i].times.size());
    worst = std::max(worst, (b.phi_alpha(i).transpose() * res[i] / ni).norm());
    worst = std::max(worst, (b.r_u(i) * (res[i] / ni + f.lambda_U[i] * f.gamma[i])).norm());
  }
  const auto n = static_cast<Eigen::Index>(d.grid_size());
  for (int g = 1; g <= d.groups; ++g) {
    Eigen::VectorXd lifted = Eigen::VectorXd::Zero(n);
    for (std::size_t i : d.members(g)) {
      const double ni = static_cast<double>(d.subjects[i].times.size());
      for (std::size_t j = 0; j < d.grid_index[i].size(); ++j)
        lifted(static_cast<Eigen::Index>(d.grid_index[i][j])) += res[i](static_cast<Eigen::Index>(j)) / ni;
    }
    const auto gk = static_cast<std::size_t>(g - 1);
    worst = std::max(worst, (b.phi_mu().transpose() * lifted).norm());
    worst = std::max(worst, (b.r_m() * (lifted + f.lambda_M[gk] * f.nu[gk])).norm());
  }
  return worst;
}

// Exact posterior mean of M + U at the observations (diffuse initial states)
// by direct Gaussian conditioning.
inline std::vector<Eigen::VectorXd> bayes_mean(const Dataset& d, int p, int q, double s2eps,
                                               const std::vector<double>& s2m, const std::vector<double>& s2u) {
  GpProblem prob;
  for (int g = 0; g < d.groups; ++g) prob.components.push_back({p, 1e8, s2m[static_cast<std::size_t>(g)]});
  for (std::size_t i = 0; i < d.size(); ++i) prob.components.push_back({q, 1e8, s2u[i]});
  prob.noise_variance = s2eps;
  std::vector<GpFunctional> queries;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const std::vector<int> comps{d.subjects[i].group - 1, d.groups + static_cast<int>(i)};
    for (std::size_t j = 0; j < d.subjects[i].times.size(); ++j) {
      queries.push_back({d.subjects[i].times[j], 0, comps});
      prob.observations.push_back({queries.back(), d.subjects[i].values[j]});
    }
  }
  const GpPosterior post = direct_gp_posterior(prob, queries);
  std::vector<Eigen::VectorXd> out;
  Eigen::Index k = 0;
  for (const Subject& s : d.subjects) {
    const auto n = static_cast<Eigen::Index>(s.times.size());
    out.push_back(post.mean.segment(k, n));
    k += n;
  }
  return out;
}

inline double max_gap(const SplineBasis& b, const SplineFit& f, const std::vector<Eigen::VectorXd>& ref) {
  double worst = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i)
    worst = std::max(worst, (b.mean_at_subject(f, i) + b.deviation_at_subject(f, i) - ref[i]).cwiseAbs().maxCoeff());
  return worst;
}

}  // namespace svr::fixtures
