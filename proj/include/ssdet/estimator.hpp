#pragma once

// Minimization of the determinant-ratio objective
//
//   h(a1, a2) = [1 + q11][1 + q22] - q12^2,
//   qij = (z_i - m_i)^T S^{-1} (z_j - m_j),
//   m1 = a1 v1 - a2 v2,  m2 = a1 v2 + a2 v1,
//
// by cyclic coordinate descent. Each coordinate step solves the cubic
// stationarity equation of h along that coordinate in closed form.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "ssdet/cubic.hpp"
#include "ssdet/errors.hpp"
#include "ssdet/realspd.hpp"
#include "ssdet/scenario.hpp"

namespace ssdet {

// Every inner product h and its derivatives depend on. r_ij = v_i^T S^{-1} z_j.
struct HScalars {
  double p11 = 0, p12 = 0, p22 = 0;          // v_i^T S^{-1} v_j
  double r11 = 0, r12 = 0, r21 = 0, r22 = 0;  // v_i^T S^{-1} z_j
  double s11 = 0, s12 = 0, s22 = 0;           // z_i^T S^{-1} z_j
};

// Immutable bundle of the primary data, steering and scatter matrix with
// the whitened quantities cached once.
class HContext {
 public:
  HContext(Vector z1, Vector z2, SteeringPair v, SpdMatrix s)
      : z1_(std::move(z1)), z2_(std::move(z2)), v_(std::move(v)), s_(std::move(s)) {
    const std::size_t n = s_.dim();
    if (z1_.size() != n || z2_.size() != n || v_.v1.size() != n || v_.v2.size() != n)
      throw DimensionMismatch("HContext: vector lengths disagree with S");
    const Vector wz1 = s_.whiten(z1_), wz2 = s_.whiten(z2_);
    const Vector wv1 = s_.whiten(v_.v1), wv2 = s_.whiten(v_.v2);
    c_.p11 = dot(wv1, wv1);
    c_.p12 = dot(wv1, wv2);
    c_.p22 = dot(wv2, wv2);
    c_.r11 = dot(wv1, wz1);
    c_.r12 = dot(wv1, wz2);
    c_.r21 = dot(wv2, wz1);
    c_.r22 = dot(wv2, wz2);
    c_.s11 = dot(wz1, wz1);
    c_.s12 = dot(wz1, wz2);
    c_.s22 = dot(wz2, wz2);
  }

  // S = Z_S Z_S^T from the secondary columns.
  static HContext from_observation(const SplitObservation& obs, const SteeringPair& v) {
    return HContext(obs.z1, obs.z2, v, SpdMatrix(gram(obs.zs)));
  }

  const Vector& z1() const noexcept { return z1_; }
  const Vector& z2() const noexcept { return z2_; }
  const SteeringPair& steering() const noexcept { return v_; }
  const SpdMatrix& s() const noexcept { return s_; }
  const HScalars& scalars() const noexcept { return c_; }

 private:
  Vector z1_, z2_;
  SteeringPair v_;
  SpdMatrix s_;
  HScalars c_;
};

// Residual quadratic forms at a given amplitude.
struct ResidualForms {
  double q11, q12, q22;
};

inline ResidualForms residual_forms(const HScalars& c, const Amplitude& a) noexcept {
  const double x = a.a1, y = a.a2;
  ResidualForms f{};
  f.q11 = c.s11 + x * x * c.p11 + y * y * c.p22 - 2 * x * c.r11 + 2 * y * c.r21 - 2 * x * y * c.p12;
  f.q22 = c.s22 + x * x * c.p22 + y * y * c.p11 - 2 * x * c.r22 - 2 * y * c.r12 + 2 * x * y * c.p12;
  f.q12 = c.s12 - x * (c.r21 + c.r12) - y * c.r11 + y * c.r22 + (x * x - y * y) * c.p12 +
          x * y * (c.p11 - c.p22);
  return f;
}

inline double h_eval(const HScalars& c, const Amplitude& a) noexcept {
  const ResidualForms f = residual_forms(c, a);
  return (1.0 + f.q11) * (1.0 + f.q22) - f.q12 * f.q12;
}

inline double h_eval(const HContext& ctx, const Amplitude& a) noexcept { return h_eval(ctx.scalars(), a); }

// Closed-form two-step estimates for a known (or plugged-in) covariance W.
inline Amplitude two_step_estimate(std::span<const double> z1, std::span<const double> z2,
                                   const SteeringPair& v, const SpdMatrix& w) {
  const Vector wz1 = w.whiten(z1), wz2 = w.whiten(z2);
  const Vector wv1 = w.whiten(v.v1), wv2 = w.whiten(v.v2);
  const double den = dot(wv1, wv1) + dot(wv2, wv2);
  return {(dot(wv1, wz1) + dot(wv2, wz2)) / den, (dot(wv1, wz2) - dot(wv2, wz1)) / den};
}

inline Amplitude two_step_estimate(const HScalars& c) noexcept {
  const double den = c.p11 + c.p22;
  return {(c.r11 + c.r22) / den, (c.r12 - c.r21) / den};
}

inline Amplitude two_step_estimate(const HContext& ctx) noexcept { return two_step_estimate(ctx.scalars()); }

// The fifteen auxiliary products whose pairwise combinations give the cubic
// dh/da1 = b1 a1^3 + b2 a1^2 + b3 a1 + b4 with a2 held at `beta`.
// Index k holds a_{k+1}.
inline std::array<double, 15> alpha1_table(const HScalars& c, double beta) noexcept {
  std::array<double, 15> a{};
  a[0] = 2 * c.p11;
  a[1] = -2 * beta * c.p12 - 2 * c.r11;
  a[2] = c.p22;
  a[3] = -2 * c.r22 + 2 * beta * c.p12;
  a[4] = beta * beta * c.p11 - 2 * beta * c.r12 + c.s22 + 1;
  a[5] = a[0] / 2;
  a[6] = -2 * c.r11 - 2 * beta * c.p12;
  a[7] = beta * beta * c.p22 + 2 * beta * c.r21 + c.s11 + 1;
  a[8] = 2 * c.p22;
  a[9] = 2 * beta * c.p12 - 2 * c.r22;
  a[10] = c.p12;
  a[11] = -c.r21 - c.r12 + beta * (c.p11 - c.p22);
  a[12] = c.s12 + beta * (c.r22 - c.r11) - beta * beta * c.p12;
  a[13] = 2 * c.p12;
  a[14] = -c.r12 + beta * c.p11 - c.r21 - beta * c.p22;
  return a;
}

// Same for dh/da2 with a1 held at `gamma`.
inline std::array<double, 15> alpha2_table(const HScalars& c, double gamma) noexcept {
  std::array<double, 15> t{};
  t[0] = 2 * c.p22;
  t[1] = -2 * gamma * c.p12 + 2 * c.r21;
  t[2] = c.p11;
  t[3] = -2 * c.r12 + 2 * gamma * c.p12;
  t[4] = gamma * gamma * c.p22 - 2 * gamma * c.r22 + c.s22 + 1;
  t[5] = t[0] / 2;
  t[6] = 2 * c.r21 - 2 * gamma * c.p12;
  t[7] = gamma * gamma * c.p11 - 2 * gamma * c.r11 + c.s11 + 1;
  t[8] = 2 * c.p11;
  t[9] = 2 * gamma * c.p12 - 2 * c.r12;
  t[10] = -c.p12;
  t[11] = -c.r11 + c.r22 + gamma * (c.p11 - c.p22);
  t[12] = c.s12 - gamma * (c.r21 + c.r12) + gamma * gamma * c.p12;
  t[13] = -2 * c.p12;
  t[14] = c.r22 - gamma * c.p22 - c.r11 + gamma * c.p11;
  return t;
}

// Both tables combine the same way:
//   (A x + B)(C x^2 + D x + E) + (I x + J)(F x^2 + G x + H) - 2 (K x^2 + L x + M)(N x + O).
inline Cubic assemble_cubic(const std::array<double, 15>& a) noexcept {
  return {a[0] * a[2] + a[8] * a[5] - 2 * a[10] * a[13],
          a[0] * a[3] + a[1] * a[2] + a[5] * a[9] + a[8] * a[6] - 2 * a[10] * a[14] - 2 * a[11] * a[13],
          a[0] * a[4] + a[1] * a[3] + a[6] * a[9] + a[8] * a[7] - 2 * a[11] * a[14] - 2 * a[12] * a[13],
          a[1] * a[4] + a[7] * a[9] - 2 * a[12] * a[14]};
}

inline Cubic cubic_coeffs_alpha1(const HScalars& c, double alpha2_fixed) noexcept {
  return assemble_cubic(alpha1_table(c, alpha2_fixed));
}

inline Cubic cubic_coeffs_alpha2(const HScalars& c, double alpha1_fixed) noexcept {
  return assemble_cubic(alpha2_table(c, alpha1_fixed));
}

inline Cubic cubic_coeffs_alpha1(const HContext& ctx, double alpha2_fixed) noexcept {
  return cubic_coeffs_alpha1(ctx.scalars(), alpha2_fixed);
}

inline Cubic cubic_coeffs_alpha2(const HContext& ctx, double alpha1_fixed) noexcept {
  return cubic_coeffs_alpha2(ctx.scalars(), alpha1_fixed);
}

enum class Coordinate { Alpha1 = 1, Alpha2 = 2 };

// Minimizer of h along one coordinate with the other held fixed, chosen
// among the real stationary points (ties go to the smaller magnitude).
// With `current` supplied, a degenerate cubic or a candidate that does not
// improve h keeps the current value.
inline double coordinate_min(const HScalars& c, Coordinate coord, double other_fixed,
                             std::optional<double> current = std::nullopt) {
  const bool first = coord == Coordinate::Alpha1;
  const auto point = [&](double x) { return first ? Amplitude{x, other_fixed} : Amplitude{other_fixed, x}; };
  const Cubic poly = first ? cubic_coeffs_alpha1(c, other_fixed) : cubic_coeffs_alpha2(c, other_fixed);

  std::vector<double> roots;
  try {
    roots = solve_cubic_real(poly);
  } catch (const DegenerateToConstant&) {
    if (current) return *current;
    throw;
  }
  if (roots.empty()) {
    if (current) return *current;
    throw DegenerateToConstant("coordinate_min: no real stationary point");
  }

  double best = roots.front();
  double best_h = h_eval(c, point(best));
  for (std::size_t i = 1; i < roots.size(); ++i) {
    const double hv = h_eval(c, point(roots[i]));
    const double tie = 1e-15 * std::max(std::abs(hv), std::abs(best_h));
    if (hv < best_h - tie || (std::abs(hv - best_h) <= tie && std::abs(roots[i]) < std::abs(best))) {
      best = roots[i];
      best_h = hv;
    }
  }
  if (current && h_eval(c, point(*current)) < best_h) return *current;
  return best;
}

inline double coordinate_min(const HContext& ctx, Coordinate coord, double other_fixed,
                             std::optional<double> current = std::nullopt) {
  return coordinate_min(ctx.scalars(), coord, other_fixed, current);
}

struct EstimationTrace {
  std::vector<Amplitude> iterates;  // entry 0 is the seed
  std::vector<double> objective;    // h at each iterate
  bool converged = false;
  int iterations_used = 0;
};

struct Algorithm1Options {
  int max_iter = 100;
  double eps1 = 1e-6;
  double eps2 = 1e-6;
  Coordinate first = Coordinate::Alpha1;
  // Run exactly max_iter sweeps without the tolerance test.
  bool fixed_iterations = false;

  static Algorithm1Options sweeps(int n) {
    Algorithm1Options o;
    o.max_iter = n;
    o.fixed_iterations = true;
    return o;
  }
};

struct Estimate {
  Amplitude amplitude;
  EstimationTrace trace;
};

// Cyclic minimization of h from `seed`. One iteration updates both
// coordinates, in the order given by options.first. Stops once both updates
// fall within (eps1, eps2), or after max_iter iterations.
inline Estimate algorithm1(const HScalars& c, Amplitude seed, const Algorithm1Options& opt = {}) {
  if (opt.max_iter < 0) throw InvalidModel("algorithm1: max_iter must be non-negative");
  if (!opt.fixed_iterations && !(opt.eps1 > 0.0 && opt.eps2 > 0.0))
    throw InvalidModel("algorithm1: tolerances must be positive");

  Estimate out{seed, {}};
  auto& tr = out.trace;
  Amplitude a = seed;
  tr.iterates.push_back(a);
  tr.objective.push_back(h_eval(c, a));

  for (int it = 1; it <= opt.max_iter; ++it) {
    const Amplitude prev = a;
    if (opt.first == Coordinate::Alpha1) {
      a.a1 = coordinate_min(c, Coordinate::Alpha1, a.a2, a.a1);
      a.a2 = coordinate_min(c, Coordinate::Alpha2, a.a1, a.a2);
    } else {
      a.a2 = coordinate_min(c, Coordinate::Alpha2, a.a1, a.a2);
      a.a1 = coordinate_min(c, Coordinate::Alpha1, a.a2, a.a1);
    }
    tr.iterates.push_back(a);
    tr.objective.push_back(h_eval(c, a));
    tr.iterations_used = it;
    if (!opt.fixed_iterations && std::abs(a.a1 - prev.a1) <= opt.eps1 && std::abs(a.a2 - prev.a2) <= opt.eps2) {
      tr.converged = true;
      break;
    }
  }
  out.amplitude = a;
  return out;
}

inline Estimate algorithm1(const HContext& ctx, Amplitude seed, const Algorithm1Options& opt = {}) {
  return algorithm1(ctx.scalars(), seed, opt);
}

// Seeded with the two-step estimates.
inline Estimate algorithm1(const HContext& ctx, const Algorithm1Options& opt = {}) {
  return algorithm1(ctx.scalars(), two_step_estimate(ctx), opt);
}

}  // namespace ssdet
