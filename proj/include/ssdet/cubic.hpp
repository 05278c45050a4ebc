#pragma once

// Real roots of b1 x^3 + b2 x^2 + b3 x + b4 by Cardano's method in its
// discriminant-split form, followed by Newton polishing on the original
// coefficients.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "ssdet/errors.hpp"

namespace ssdet {

using Cubic = std::array<double, 4>;  // (b1, b2, b3, b4), highest degree first

inline double eval_cubic(const Cubic& b, double x) noexcept {
  return ((b[0] * x + b[1]) * x + b[2]) * x + b[3];
}

inline double eval_cubic_derivative(const Cubic& b, double x) noexcept {
  return (3.0 * b[0] * x + 2.0 * b[1]) * x + b[2];
}

inline double cubic_scale(const Cubic& b) noexcept {
  double s = 0.0;
  for (double c : b) s = std::max(s, std::abs(c));
  return s;
}

// Residual bound every returned root satisfies.
inline double cubic_residual_bound(const Cubic& b, double root) noexcept {
  const double r = std::max(1.0, std::abs(root));
  return 1e-9 * std::max(1.0, cubic_scale(b) * r * r * r);
}

namespace detail {

inline double polish_root(const Cubic& b, double x) noexcept {
  double fx = std::abs(eval_cubic(b, x));
  for (int it = 0; it < 8 && fx > 0.0; ++it) {
    const double d = eval_cubic_derivative(b, x);
    if (d == 0.0 || !std::isfinite(d)) break;
    const double next = x - eval_cubic(b, x) / d;
    const double fn = std::abs(eval_cubic(b, next));
    if (!(fn < fx)) break;
    x = next;
    fx = fn;
  }
  return x;
}

inline void quadratic_roots(double a, double b, double c, std::vector<double>& out) {
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) {
    // Allow a rounding-level negative discriminant to count as a double root.
    if (disc > -1e-14 * std::max(b * b, std::abs(4.0 * a * c))) out.push_back(-b / (2.0 * a));
    return;
  }
  const double sq = std::sqrt(disc);
  const double qv = -0.5 * (b + std::copysign(sq, b));
  if (qv != 0.0) {
    out.push_back(qv / a);
    out.push_back(c / qv);
  } else {
    out.push_back(0.0);
  }
}

}  // namespace detail

// Returns the distinct real roots in ascending order. Leading coefficients
// that vanish relative to the largest one drop the degree (quadratic, then
// linear). Throws DegenerateToConstant when no variable term survives.
inline std::vector<double> solve_cubic_real(const Cubic& b) {
  constexpr double kZero = 1e-14;
  const double scale = cubic_scale(b);
  if (scale < kZero) throw DegenerateToConstant("solve_cubic_real: all coefficients vanish");
  const double rel = kZero * scale;

  std::vector<double> roots;
  if (std::abs(b[0]) > rel) {
    const double a = b[1] / b[0];
    const double bb = b[2] / b[0];
    const double c = b[3] / b[0];
    const double q = (a * a - 3.0 * bb) / 9.0;
    const double r = (2.0 * a * a * a - 9.0 * a * bb + 27.0 * c) / 54.0;
    const double q3 = q * q * q;
    const double r2 = r * r;
    if (r2 <= q3) {
      // Three real roots (double root at equality).
      const double sq = std::sqrt(q);
      const double ratio = std::clamp(r / (sq * sq * sq), -1.0, 1.0);
      const double theta = std::acos(ratio);
      constexpr double two_pi = 2.0 * std::numbers::pi;
      for (int k = 0; k < 3; ++k)
        roots.push_back(-2.0 * sq * std::cos((theta + two_pi * k) / 3.0) - a / 3.0);
    } else {
      const double big = -std::copysign(std::cbrt(std::abs(r) + std::sqrt(r2 - q3)), r);
      const double small = big != 0.0 ? q / big : 0.0;
      roots.push_back(big + small - a / 3.0);
      // Complex pair -(big+small)/2 - a/3 +- i sqrt(3)/2 (big-small). Keep its
      // real part when the imaginary part is at rounding level.
      const double re = -0.5 * (big + small) - a / 3.0;
      const double im = 0.5 * std::sqrt(3.0) * std::abs(big - small);
      if (im <= 1e-12 * std::max(1.0, std::abs(re))) roots.push_back(re);
    }
  } else if (std::abs(b[1]) > rel) {
    detail::quadratic_roots(b[1], b[2], b[3], roots);
  } else if (std::abs(b[2]) > rel) {
    roots.push_back(-b[3] / b[2]);
  } else {
    throw DegenerateToConstant("solve_cubic_real: polynomial is constant");
  }

  for (double& x : roots) x = detail::polish_root(b, x);
  std::sort(roots.begin(), roots.end());
  std::vector<double> distinct;
  for (double x : roots) {
    if (distinct.empty() || std::abs(x - distinct.back()) > 1e-10) distinct.push_back(x);
  }
  return distinct;
}

}  // namespace ssdet
