#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace svr {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream keyed by (seed, key...). Draws made from a substream
/// do not depend on how many other substreams were used before it.
inline Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return Rng(h);
}

/// Inverse-gamma draw with shape `shape` and scale `scale` (density
/// proportional to x^{-shape-1} exp(-scale/x)).
template <class R>
double draw_inverse_gamma(double shape, double scale, R& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return scale / gamma(rng);
}

inline double log_inverse_gamma_pdf(double x, double shape, double scale) {
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

/// Log density of a log-normal variable whose logarithm is N(mu, sigma2).
inline double log_lognormal_pdf(double x, double mu, double sigma2) {
  const double z = std::log(x) - mu;
  return -std::log(x) - 0.5 * std::log(2.0 * M_PI * sigma2) - 0.5 * z * z / sigma2;
}

}  // namespace svr
