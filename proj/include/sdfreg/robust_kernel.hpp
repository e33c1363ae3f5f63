// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <stdexcept>

namespace sdfreg {

/// @brief Parameters of the general adaptive robust loss.
///
/// p is the scale of the quadratic bowl (world units), alpha the shape:
/// alpha = 2 gives a half-quadratic, alpha = 0 a log form, and increasingly
/// negative alpha saturates harder against outliers. Both are learnable
/// during registration.
struct RobustKernelParams {
  double p{0.1};
  double alpha{1.0};
};

namespace detail {
constexpr double kAlphaBranchEps = 1e-9;
}

/// @brief kappa(r; p, alpha) for r >= 0.
///
/// General form (|alpha-2|/alpha) * [((r/p)^2/|alpha-2| + 1)^(alpha/2) - 1]
/// with the standard limits at alpha = 2 and alpha = 0. kappa(0) = 0 and
/// kappa is nondecreasing in r for every valid (p, alpha).
inline double kernel(double r, const RobustKernelParams& k) {
  if (!(k.p > 0.0)) throw std::invalid_argument("kernel scale p <= 0");
  const double x = (r / k.p) * (r / k.p);
  if (std::abs(k.alpha - 2.0) < detail::kAlphaBranchEps) return 0.5 * x;
  if (std::abs(k.alpha) < detail::kAlphaBranchEps) return std::log(0.5 * x + 1.0);
  const double b = std::abs(k.alpha - 2.0);
  return (b / k.alpha) * (std::pow(x / b + 1.0, 0.5 * k.alpha) - 1.0);
}

/// d kappa / d r. Shares the closed form u^(alpha/2 - 1) * r / p^2 across all
/// alpha branches.
inline double kernel_dr(double r, const RobustKernelParams& k) {
  if (!(k.p > 0.0)) throw std::invalid_argument("kernel scale p <= 0");
  if (std::abs(k.alpha - 2.0) < detail::kAlphaBranchEps) return r / (k.p * k.p);
  const double b = std::abs(k.alpha - 2.0);
  const double u = (r / k.p) * (r / k.p) / b + 1.0;
  return (r / (k.p * k.p)) * std::pow(u, 0.5 * k.alpha - 1.0);
}

/// d kappa / d p.
inline double kernel_dp(double r, const RobustKernelParams& k) {
  if (!(k.p > 0.0)) throw std::invalid_argument("kernel scale p <= 0");
  const double r2p3 = r * r / (k.p * k.p * k.p);
  if (std::abs(k.alpha - 2.0) < detail::kAlphaBranchEps) return -r2p3;
  const double b = std::abs(k.alpha - 2.0);
  const double u = (r / k.p) * (r / k.p) / b + 1.0;
  return -r2p3 * std::pow(u, 0.5 * k.alpha - 1.0);
}

/// d kappa / d alpha. Closed form away from the removable singularities at
/// alpha in {0, 2}; near them a symmetric difference of the exact kernel is
/// used instead.
inline double kernel_dalpha(double r, const RobustKernelParams& k) {
  if (!(k.p > 0.0)) throw std::invalid_argument("kernel scale p <= 0");
  const double a = k.alpha;
  if (std::abs(a - 2.0) < 1e-5 || std::abs(a) < 1e-5) {
    const double h = 1e-6;
    RobustKernelParams lo = k, hi = k;
    lo.alpha -= h;
    hi.alpha += h;
    return (kernel(r, hi) - kernel(r, lo)) / (2.0 * h);
  }
  const double x = (r / k.p) * (r / k.p);
  const double b = std::abs(a - 2.0);  // = 2 - a on the admissible range
  const double u = x / b + 1.0;
  const double ua = std::pow(u, 0.5 * a);
  const double sign_b = a < 2.0 ? -1.0 : 1.0;  // d|a-2|/da
  // kappa = (b/a) (u^(a/2) - 1); differentiate the product.
  const double dg = (sign_b * a - b) / (a * a);
  const double du_da = -sign_b * x / (b * b);
  const double dh = ua * (0.5 * std::log(u) + 0.5 * a * du_da / u);
  return dg * (ua - 1.0) + (b / a) * dh;
}

}  // namespace sdfreg
