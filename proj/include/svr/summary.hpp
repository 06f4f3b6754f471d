// Posterior summaries: mean, KDE mode, standard deviation and the shortest
// interval holding a given share of the draws.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace svr {

struct ParameterSummary {
  double mean = 0.0;
  double mode = 0.0;
  double sd = 0.0;
  double hpd_lo = 0.0;
  double hpd_hi = 0.0;
};

inline constexpr std::size_t kMinSummaryDraws = 100;
inline constexpr int kModeGridPoints = 512;

/// Shortest interval [x_(i), x_(i+w-1)] over the sorted draws, w = ceil(prob n).
inline std::pair<double, double> hpd_interval(std::vector<double> draws, double prob = 0.95) {
  if (draws.empty()) throw std::invalid_argument("HPD interval of an empty sample");
  if (!(prob > 0.0 && prob <= 1.0)) throw std::invalid_argument("HPD mass must lie in (0, 1]");
  std::sort(draws.begin(), draws.end());
  const std::size_t n = draws.size();
  const auto w = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(prob * n - 1e-9)));
  std::size_t best = 0;
  double width = draws[w - 1] - draws[0];
  for (std::size_t i = 1; i + w <= n; ++i) {
    const double d = draws[i + w - 1] - draws[i];
    if (d < width) {
      width = d;
      best = i;
    }
  }
  return {draws[best], draws[best + w - 1]};
}

/// Maximizer of a Gaussian kernel density estimate on a 512-point grid with
/// the normal-reference bandwidth 1.06 * sd * n^{-1/5}.
inline double kde_mode(std::span<const double> draws) {
  if (draws.empty()) throw std::invalid_argument("mode of an empty sample");
  const double n = static_cast<double>(draws.size());
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : draws) ss += (x - mean) * (x - mean);
  const double sd = draws.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const double h = 1.06 * sd * std::pow(n, -0.2);
  if (!(h > 0.0)) return mean;
  const auto [lo_it, hi_it] = std::minmax_element(draws.begin(), draws.end());
  const double lo = *lo_it - 3.0 * h;
  const double hi = *hi_it + 3.0 * h;
  double best_x = lo;
  double best_d = -1.0;
  for (int g = 0; g < kModeGridPoints; ++g) {
    const double x = lo + (hi - lo) * g / (kModeGridPoints - 1);
    double dens = 0.0;
    for (double v : draws) {
      const double z = (x - v) / h;
      dens += std::exp(-0.5 * z * z);
    }
    if (dens > best_d) {
      best_d = dens;
      best_x = x;
    }
  }
  return best_x;
}

/// Summary without the minimum-sample guard.
inline ParameterSummary describe(std::span<const double> draws, double prob = 0.95) {
  if (draws.empty()) throw std::invalid_argument("cannot summarize an empty sample");
  ParameterSummary s;
  const double n = static_cast<double>(draws.size());
  s.mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : draws) ss += (x - s.mean) * (x - s.mean);
  s.sd = draws.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  s.mode = kde_mode(draws);
  std::tie(s.hpd_lo, s.hpd_hi) = hpd_interval(std::vector<double>(draws.begin(), draws.end()), prob);
  return s;
}

inline ParameterSummary summarize(std::span<const double> draws, double prob = 0.95) {
  if (draws.size() < kMinSummaryDraws)
    throw std::invalid_argument("posterior summary needs at least 100 draws, got " +
                                std::to_string(draws.size()));
  return describe(draws, prob);
}

}  // namespace svr
