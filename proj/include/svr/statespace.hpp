// Exact discretization of the (r-1)-fold integrated Wiener process.
//
// The state X = (X, DX, ..., D^{r-1}X)' obeys dX = C X dt + D dW with C the
// upper shift matrix and D = e_r. Over a gap delta:
//
//   X(t + delta) = G(delta) X(t) + w,   w ~ N(0, W(delta))
//
// with G = exp(C delta) and W the integrated noise covariance.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace svr {

/// Largest SDE order supported by the fixed-capacity state types.
inline constexpr int kMaxOrder = 8;

using StateVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxOrder, 1>;
using StateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxOrder, kMaxOrder>;

namespace detail {

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

inline void check_order_and_gap(int r, double delta) {
  if (r < 1 || r > kMaxOrder)
    throw std::invalid_argument("SDE order must lie in [1, " + std::to_string(kMaxOrder) +
                                "], got " + std::to_string(r));
  if (!(delta >= 0.0))
    throw std::invalid_argument("time gap must be non-negative, got " + std::to_string(delta));
}

}  // namespace detail

/// exp(C * delta). C is nilpotent (C^r = 0), so the series stops at k = r - 1;
/// the k = r term of the textbook sum is identically zero.
inline StateMatrix transition_matrix(int r, double delta) {
  detail::check_order_and_gap(r, delta);
  StateMatrix g = StateMatrix::Identity(r, r);
  double power = 1.0;
  for (int k = 1; k < r; ++k) {
    power *= delta / k;  // delta^k / k!
    for (int l = 0; l + k < r; ++l) g(l, l + k) = power;
  }
  return g;
}

/// Integrated process-noise covariance for unit diffusion:
///   W = int_0^delta exp(C(delta-u)) D D' exp(C'(delta-u)) du.
/// Entry (l, l') with 1-based indices is
///   delta^{2r+1-l-l'} / ((r-l)! (r-l')! (2r+1-l-l')).
inline StateMatrix process_noise(int r, double delta) {
  detail::check_order_and_gap(r, delta);
  StateMatrix w(r, r);
  for (int l = 1; l <= r; ++l) {
    for (int lp = l; lp <= r; ++lp) {
      const int e = 2 * r + 1 - l - lp;
      const double v =
          std::pow(delta, e) / (detail::factorial(r - l) * detail::factorial(r - lp) * e);
      w(l - 1, lp - 1) = v;
      w(lp - 1, l - 1) = v;
    }
  }
  return w;
}

/// One discretized step of an order-r integrated Wiener process.
struct Transition {
  int order = 1;
  double delta = 0.0;
  StateMatrix G;
  StateMatrix W;  // unit-diffusion noise covariance; scale by the volatility

  static Transition make(int r, double delta) {
    return Transition{r, delta, transition_matrix(r, delta), process_noise(r, delta)};
  }
};

}  // namespace svr
