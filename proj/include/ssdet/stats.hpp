#pragma once

// Binomial intervals and the isotonic fit used to read crossings off noisy
// Pd curves.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ssdet/errors.hpp"

namespace ssdet {

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  bool contains(double x) const noexcept { return x >= lo && x <= hi; }
};

inline constexpr double kZ95 = 1.959963984540054;

// Wilson score interval for k successes in n trials.
inline Interval wilson_interval(std::size_t k, std::size_t n, double z = kZ95) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Interval that a nominal probability p would produce with n trials: the
// Wilson interval centred on the expected count. Used for "estimate inside
// the CI of nominal" checks.
inline Interval nominal_interval(double p, std::size_t n, double z = kZ95) {
  const double nn = static_cast<double>(n);
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

// Pool-adjacent-violators weighted least-squares non-decreasing fit.
inline std::vector<double> isotonic_fit(std::span<const double> y, std::span<const double> w = {}) {
  if (!w.empty() && w.size() != y.size()) throw DimensionMismatch("isotonic_fit: weights size");
  struct Block {
    double sum, weight;
    std::size_t count;
  };
  std::vector<Block> blocks;
  blocks.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    blocks.push_back({y[i] * wi, wi, 1});
    while (blocks.size() > 1) {
      const Block& b = blocks.back();
      const Block& a = blocks[blocks.size() - 2];
      if (a.sum / a.weight <= b.sum / b.weight) break;
      const Block merged{a.sum + b.sum, a.weight + b.weight, a.count + b.count};
      blocks.pop_back();
      blocks.back() = merged;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (const Block& b : blocks) out.insert(out.end(), b.count, b.sum / b.weight);
  return out;
}

// First x where the piecewise-linear curve through (x, y) reaches `level`.
// y should be non-decreasing; returns nullopt if it never gets there.
inline std::optional<double> first_crossing(std::span<const double> x, std::span<const double> y, double level) {
  if (x.size() != y.size()) throw DimensionMismatch("first_crossing: size mismatch");
  if (x.empty()) return std::nullopt;
  if (y[0] >= level) return x[0];
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (y[i] >= level) {
      if (!std::isfinite(x[i - 1])) return x[i];
      const double f = (level - y[i - 1]) / (y[i] - y[i - 1]);
      return x[i - 1] + f * (x[i] - x[i - 1]);
    }
  }
  return std::nullopt;
}

}  // namespace ssdet
