#pragma once

// Steering vectors, the clutter-plus-noise covariance, the complex -> real
// split of the observation, and the synthetic data generator.

#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "ssdet/errors.hpp"
#include "ssdet/hermitian.hpp"
#include "ssdet/realspd.hpp"
#include "ssdet/rng.hpp"

namespace ssdet {

// Real and imaginary parts of a unit-norm complex steering vector.
struct SteeringPair {
  Vector v1;
  Vector v2;

  std::size_t dim() const noexcept { return v1.size(); }
};

// Complex target response split into (Re, Im).
struct Amplitude {
  double a1 = 0.0;
  double a2 = 0.0;

  double norm2() const noexcept { return a1 * a1 + a2 * a2; }
  friend bool operator==(const Amplitude&, const Amplitude&) = default;
};

// Real primary pair and the 2K real secondary columns
// [Re r_1 ... Re r_K  Im r_1 ... Im r_K].
struct SplitObservation {
  Vector z1;
  Vector z2;
  Matrix zs;

  std::size_t dim() const noexcept { return z1.size(); }
  std::size_t secondary_count() const noexcept { return zs.cols() / 2; }
};

// The same data in the complex domain, used by the conventional detectors.
struct ComplexObservation {
  CVector r;
  CMatrix rs;  // N x K

  std::size_t dim() const noexcept { return r.size(); }
  std::size_t secondary_count() const noexcept { return rs.cols(); }
};

struct ClutterModel {
  std::size_t n = 8;
  double rho_c = 0.9;
  double cnr_db = 20.0;  // -inf gives white noise only
  double fd = 0.0;       // clutter Doppler, cycles/sample
  double sigma_n2 = 1.0;

  static ClutterModel white(std::size_t n, double sigma_n2 = 1.0) {
    ClutterModel m;
    m.n = n;
    m.cnr_db = -std::numeric_limits<double>::infinity();
    m.sigma_n2 = sigma_n2;
    return m;
  }

  double clutter_power() const { return sigma_n2 * std::pow(10.0, cnr_db / 10.0); }
  bool is_real() const noexcept { return fd == 0.0; }

  void validate() const {
    if (n < 2) throw InvalidModel("clutter model: need at least 2 channels, got " + std::to_string(n));
    if (!(rho_c > 0.0 && rho_c < 1.0))
      throw InvalidModel("clutter model: rho_c must lie in (0,1), got " + std::to_string(rho_c));
    if (!(sigma_n2 > 0.0) || !std::isfinite(sigma_n2))
      throw InvalidModel("clutter model: sigma_n2 must be positive");
    if (std::isnan(cnr_db) || cnr_db == std::numeric_limits<double>::infinity())
      throw InvalidModel("clutter model: cnr_db must be finite or -inf");
    if (!std::isfinite(fd)) throw InvalidModel("clutter model: fd must be finite");
  }
};

inline SteeringPair steering(std::size_t n, double nu_d) {
  SteeringPair v{Vector(n), Vector(n)};
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(k) * nu_d;
    v.v1[k] = std::cos(phase) * scale;
    v.v2[k] = std::sin(phase) * scale;
  }
  return v;
}

inline CVector to_complex(const SteeringPair& v) {
  CVector c(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) c[i] = {v.v1[i], v.v2[i]};
  return c;
}

// Real clutter-plus-noise covariance (zero clutter Doppler). This is the
// complex-domain covariance M0; each real component has covariance M0 / 2.
inline SpdMatrix clutter_covariance(const ClutterModel& model) {
  model.validate();
  if (!model.is_real())
    throw InvalidModel("clutter_covariance: nonzero clutter Doppler gives a complex covariance; "
                       "use clutter_covariance_complex");
  const double sc2 = model.clutter_power();
  Matrix m(model.n, model.n);
  for (std::size_t i = 0; i < model.n; ++i) {
    for (std::size_t j = 0; j < model.n; ++j) {
      const double d = static_cast<double>(i > j ? i - j : j - i);
      m(i, j) = sc2 * std::pow(model.rho_c, d * d) + (i == j ? model.sigma_n2 : 0.0);
    }
  }
  return SpdMatrix(m);
}

inline CMatrix clutter_covariance_entries_complex(const ClutterModel& model) {
  model.validate();
  const double sc2 = model.clutter_power();
  CMatrix m(model.n, model.n);
  for (std::size_t i = 0; i < model.n; ++i) {
    for (std::size_t j = 0; j < model.n; ++j) {
      const double lag = static_cast<double>(i) - static_cast<double>(j);
      const double mag = sc2 * std::pow(model.rho_c, lag * lag);
      const double ph = 2.0 * std::numbers::pi * model.fd * lag;
      m(i, j) = cdouble(mag * std::cos(ph), mag * std::sin(ph));
      if (i == j) m(i, j) += model.sigma_n2;
    }
  }
  return m;
}

inline HermitianPd clutter_covariance_complex(const ClutterModel& model) {
  return HermitianPd(clutter_covariance_entries_complex(model));
}

inline SplitObservation split(const ComplexObservation& c) {
  const std::size_t n = c.dim();
  const std::size_t k = c.secondary_count();
  SplitObservation s{Vector(n), Vector(n), Matrix(n, 2 * k)};
  for (std::size_t i = 0; i < n; ++i) {
    s.z1[i] = c.r[i].real();
    s.z2[i] = c.r[i].imag();
    for (std::size_t j = 0; j < k; ++j) {
      s.zs(i, j) = c.rs(i, j).real();
      s.zs(i, k + j) = c.rs(i, j).imag();
    }
  }
  return s;
}

inline ComplexObservation to_complex(const SplitObservation& s) {
  const std::size_t n = s.dim();
  const std::size_t k = s.secondary_count();
  ComplexObservation c{CVector(n), CMatrix(n, k)};
  for (std::size_t i = 0; i < n; ++i) {
    c.r[i] = {s.z1[i], s.z2[i]};
    for (std::size_t j = 0; j < k; ++j) c.rs(i, j) = {s.zs(i, j), s.zs(i, k + j)};
  }
  return c;
}

// Draws circular complex Gaussian data with covariance M0 through its
// factor, n = L (g1 + j g2) / sqrt(2). When M0 is real this is exactly two
// independent real N(0, M0/2) vectors.
class Sampler {
 public:
  explicit Sampler(const ClutterModel& model) : n_(model.n) {
    model.validate();
    const HermitianPd m0(clutter_covariance_entries_complex(model));
    factor_ = m0.lower();
    real_ = model.is_real();
  }

  std::size_t dim() const noexcept { return n_; }

  CVector noise(TrialStream& rng) const {
    Vector g1(n_), g2(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      g1[i] = rng.normal();
      g2[i] = rng.normal();
    }
    CVector x(n_);
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    for (std::size_t i = 0; i < n_; ++i) {
      cdouble acc{0.0, 0.0};
      if (real_) {
        double re = 0.0, im = 0.0;
        for (std::size_t k = 0; k <= i; ++k) {
          const double l = factor_(i, k).real();
          re += l * g1[k];
          im += l * g2[k];
        }
        acc = {re, im};
      } else {
        for (std::size_t k = 0; k <= i; ++k) acc += factor_(i, k) * cdouble(g1[k], g2[k]);
      }
      x[i] = acc * inv_sqrt2;
    }
    return x;
  }

  ComplexObservation draw(const SteeringPair& v, std::optional<Amplitude> alpha, std::size_t k,
                          TrialStream& rng) const {
    if (v.dim() != n_) throw DimensionMismatch("Sampler::draw: steering dimension");
    ComplexObservation obs{noise(rng), CMatrix(n_, k)};
    if (alpha) {
      const cdouble a(alpha->a1, alpha->a2);
      for (std::size_t i = 0; i < n_; ++i) obs.r[i] += a * cdouble(v.v1[i], v.v2[i]);
    }
    for (std::size_t j = 0; j < k; ++j) obs.rs.set_col(j, noise(rng));
    return obs;
  }

 private:
  std::size_t n_;
  CMatrix factor_;
  bool real_ = true;
};

// Secondary count must satisfy 2K >= N so that Z_S Z_S^T is almost surely
// positive definite.
inline SplitObservation sample(const ClutterModel& model, const SteeringPair& v,
                               std::optional<Amplitude> alpha, std::size_t k, TrialStream& rng) {
  if (v.dim() != model.n) throw DimensionMismatch("sample: steering/model dimension mismatch");
  if (2 * k < model.n)
    throw DimensionMismatch("sample: need 2K >= N secondary columns (K=" + std::to_string(k) +
                            ", N=" + std::to_string(model.n) + ")");
  return split(Sampler(model).draw(v, alpha, k, rng));
}

// v^H M0^{-1} v for a real M0.
inline double steering_power(const SteeringPair& v, const SpdMatrix& m0) {
  return m0.quad_form(v.v1, v.v1) + m0.quad_form(v.v2, v.v2);
}

inline double steering_power(const SteeringPair& v, const HermitianPd& m0) {
  const CVector c = to_complex(v);
  return m0.quad_form(c, c).real();
}

template <typename Cov>
double sinr(const Amplitude& alpha, const SteeringPair& v, const Cov& m0) {
  return 10.0 * std::log10(alpha.norm2() * steering_power(v, m0));
}

// Inverse of sinr(): the amplitude with the requested SINR and phase.
// A target of -inf dB gives the null amplitude.
template <typename Cov>
Amplitude alpha_for_sinr(double target_sinr_db, double phase, const SteeringPair& v, const Cov& m0) {
  if (std::isnan(target_sinr_db) || target_sinr_db == std::numeric_limits<double>::infinity())
    throw InvalidModel("alpha_for_sinr: target must be finite or -inf");
  if (target_sinr_db == -std::numeric_limits<double>::infinity()) return {};
  const double mag = std::sqrt(std::pow(10.0, target_sinr_db / 10.0) / steering_power(v, m0));
  return {mag * std::cos(phase), mag * std::sin(phase)};
}

// Everything a Monte-Carlo run needs to synthesize one trial.
struct Scenario {
  ClutterModel clutter;
  std::size_t k = 16;
  double nu_d = 0.0;
  double phase = std::numbers::pi / 4.0;
  int sweeps = 3;

  std::size_t n() const noexcept { return clutter.n; }
};

}  // namespace ssdet
