// Independent numerical references used only by the test suites.
#pragma once

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <vector>

namespace svr::oracle {

inline double integrate(const std::function<double(double)>& f, double a, double b) {
  if (b <= a) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 10, 1e-13, &err);
}

/// Shift matrix C of the integrated Wiener process.
inline Eigen::MatrixXd shift_matrix(int r) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(r, r);
  for (int l = 0; l + 1 < r; ++l) c(l, l + 1) = 1.0;
  return c;
}

/// int_0^delta exp(C(delta-u)) D D' exp(C'(delta-u)) du, entrywise by quadrature,
/// with the matrix exponential from Eigen's MatrixFunctions module.
inline Eigen::MatrixXd process_noise_quadrature(int r, double delta) {
  const Eigen::MatrixXd c = shift_matrix(r);
  Eigen::MatrixXd w(r, r);
  for (int a = 0; a < r; ++a) {
    for (int b = 0; b < r; ++b) {
      w(a, b) = integrate(
          [&](double u) {
            const Eigen::MatrixXd e = (c * (delta - u)).exp();
            return e(a, r - 1) * e(b, r - 1);
          },
          0.0, delta);
    }
  }
  return w;
}

inline double truncated_power(double x, int e, double fact) {
  return x > 0.0 ? std::pow(x, e) / fact : 0.0;
}

/// int_0^{min(s,t)} (s-u)^{r-1} (t-u)^{r-1} / ((r-1)!)^2 du by quadrature.
inline double green_kernel_quadrature(int r, double s, double t) {
  double fact = 1.0;
  for (int k = 2; k < r; ++k) fact *= k;
  return integrate(
      [&](double u) {
        const double gs = r == 1 ? (s > u ? 1.0 : 0.0) : truncated_power(s - u, r - 1, fact);
        const double gt = r == 1 ? (t > u ? 1.0 : 0.0) : truncated_power(t - u, r - 1, fact);
        return gs * gt;
      },
      0.0, std::min(s, t));
}

}  // namespace svr::oracle
