#pragma once

// Decision statistics. Four exploit a real (symmetric-spectrum) covariance
// and work on the split observation; the known-covariance benchmark shares
// their form; Kelly's GLRT, the AMF and the complex Rao test are the
// conventional competitors and work on complex data.

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssdet/errors.hpp"
#include "ssdet/estimator.hpp"
#include "ssdet/hermitian.hpp"
#include "ssdet/realspd.hpp"
#include "ssdet/scenario.hpp"

namespace ssdet {

enum class DetectorKind { SS_AMF, I_GLRT, SS_RAO, I_WALD, BENCH_GLRT, KELLY, AMF, C_RAO };

inline constexpr std::array<DetectorKind, 8> kAllDetectors = {
    DetectorKind::SS_AMF,     DetectorKind::I_GLRT, DetectorKind::SS_RAO, DetectorKind::I_WALD,
    DetectorKind::BENCH_GLRT, DetectorKind::KELLY,  DetectorKind::AMF,    DetectorKind::C_RAO};

inline std::string_view detector_name(DetectorKind k) {
  switch (k) {
    case DetectorKind::SS_AMF: return "ss-amf";
    case DetectorKind::I_GLRT: return "i-glrt";
    case DetectorKind::SS_RAO: return "ss-rao";
    case DetectorKind::I_WALD: return "i-wald";
    case DetectorKind::BENCH_GLRT: return "benchmark";
    case DetectorKind::KELLY: return "kelly";
    case DetectorKind::AMF: return "amf";
    case DetectorKind::C_RAO: return "rao";
  }
  return "?";
}

inline std::optional<DetectorKind> parse_detector(std::string_view name) {
  for (DetectorKind k : kAllDetectors)
    if (detector_name(k) == name) return k;
  if (name == "k-glrt" || name == "kelly-glrt") return DetectorKind::KELLY;
  if (name == "c-rao") return DetectorKind::C_RAO;
  if (name == "bench-glrt") return DetectorKind::BENCH_GLRT;
  return std::nullopt;
}

// Detectors working on the real split: they need 2K >= N.
inline bool is_symmetric_spectrum(DetectorKind k) noexcept {
  return k == DetectorKind::SS_AMF || k == DetectorKind::I_GLRT || k == DetectorKind::SS_RAO ||
         k == DetectorKind::I_WALD || k == DetectorKind::BENCH_GLRT;
}

// Complex-domain competitors: they need K >= N.
inline bool is_complex_domain(DetectorKind k) noexcept {
  return k == DetectorKind::KELLY || k == DetectorKind::AMF || k == DetectorKind::C_RAO;
}

// Thresholds for the I-GLRT are kept on ln t; every other statistic is used as is.
inline bool log_domain(DetectorKind k) noexcept { return k == DetectorKind::I_GLRT; }

// Reason a (N, K) pair is unusable for a detector, or empty when fine.
inline std::string secondary_rule_violation(DetectorKind k, std::size_t n, std::size_t kk) {
  if (is_complex_domain(k) && kk < n)
    return std::string(detector_name(k)) + " needs K >= N (got K=" + std::to_string(kk) +
           ", N=" + std::to_string(n) + ")";
  if (k != DetectorKind::BENCH_GLRT && 2 * kk < n)
    return std::string(detector_name(k)) + " needs 2K >= N (got K=" + std::to_string(kk) +
           ", N=" + std::to_string(n) + ")";
  return {};
}

struct DecisionRecord {
  DetectorKind detector;
  double statistic;
  double threshold;
  bool decide_h1;
};

inline DecisionRecord decide(DetectorKind k, double statistic, double threshold) {
  return {k, statistic, threshold, statistic > threshold};
}

// ---------------------------------------------------------------------------
// Symmetric-spectrum family

// [t1(W) + t2(W)] / [v1^T W^-1 v1 + v2^T W^-1 v2]
inline double ss_amf_formula(std::span<const double> z1, std::span<const double> z2, const SteeringPair& v,
                             const SpdMatrix& w) {
  const Vector wz1 = w.whiten(z1), wz2 = w.whiten(z2);
  const Vector wv1 = w.whiten(v.v1), wv2 = w.whiten(v.v2);
  const double t1 = dot(wv1, wz1) + dot(wv2, wz2);
  const double t2 = dot(wv1, wz2) - dot(wv2, wz1);
  return (t1 * t1 + t2 * t2) / (dot(wv1, wv1) + dot(wv2, wv2));
}

inline double ss_amf(const HScalars& c) noexcept {
  const double t1 = c.r11 + c.r22;
  const double t2 = c.r12 - c.r21;
  return (t1 * t1 + t2 * t2) / (c.p11 + c.p22);
}

inline SpdMatrix secondary_scatter(const SplitObservation& obs) {
  if (2 * obs.secondary_count() < obs.dim())
    throw NotPositiveDefinite("secondary scatter: 2K=" + std::to_string(2 * obs.secondary_count()) +
                              " < N=" + std::to_string(obs.dim()) + " leaves S singular");
  return SpdMatrix(gram(obs.zs));
}

inline double ss_amf(const SplitObservation& obs, const SteeringPair& v) {
  return ss_amf_formula(obs.z1, obs.z2, v, secondary_scatter(obs));
}

// Known-covariance GLRT (benchmark); m is the covariance of each real component.
inline double known_m_glrt(std::span<const double> z1, std::span<const double> z2, const SteeringPair& v,
                           const SpdMatrix& m) {
  return ss_amf_formula(z1, z2, v, m);
}

// S0 = Z Z^T + S
inline SpdMatrix total_scatter(const SplitObservation& obs, const SpdMatrix& s) {
  Matrix s0 = s.entries();
  add_outer(s0, obs.z1);
  add_outer(s0, obs.z2);
  return SpdMatrix(s0);
}

inline double ss_rao(const SplitObservation& obs, const SteeringPair& v, const SpdMatrix& s) {
  return ss_amf_formula(obs.z1, obs.z2, v, total_scatter(obs, s));
}

inline double ss_rao(const SplitObservation& obs, const SteeringPair& v) {
  return ss_rao(obs, v, secondary_scatter(obs));
}

struct IterativeOptions {
  int sweeps = 3;
  std::optional<Amplitude> seed{};      // defaults to the two-step estimates
  std::optional<Amplitude> forced{};    // bypass estimation entirely
  Coordinate first = Coordinate::Alpha1;
};

inline Amplitude iterative_estimate(const HContext& ctx, const IterativeOptions& opt) {
  if (opt.forced) return *opt.forced;
  if (opt.sweeps < 0) throw InvalidModel("iterative detectors: sweeps must be >= 0");
  const Amplitude seed = opt.seed ? *opt.seed : two_step_estimate(ctx);
  auto ao = Algorithm1Options::sweeps(opt.sweeps);
  ao.first = opt.first;
  return algorithm1(ctx, seed, ao).amplitude;
}

// Residuals e1 = z1 - m1(a), e2 = z2 - m2(a).
inline std::pair<Vector, Vector> residuals(const HContext& ctx, const Amplitude& a) {
  const auto& v = ctx.steering();
  Vector e1 = ctx.z1(), e2 = ctx.z2();
  for (std::size_t i = 0; i < e1.size(); ++i) {
    e1[i] -= a.a1 * v.v1[i] - a.a2 * v.v2[i];
    e2[i] -= a.a1 * v.v2[i] + a.a2 * v.v1[i];
  }
  return {std::move(e1), std::move(e2)};
}

// ln{ det[Z Z^T + S] / det[E E^T + S] } at a given amplitude estimate.
inline double i_glrt_log_at(const HContext& ctx, const Amplitude& a) {
  const auto [e1, e2] = residuals(ctx, a);
  return rank_two_update_logdet(ctx.s(), ctx.z1(), ctx.z2()) - rank_two_update_logdet(ctx.s(), e1, e2);
}

inline double i_glrt_log(const HContext& ctx, const IterativeOptions& opt = {}) {
  return i_glrt_log_at(ctx, iterative_estimate(ctx, opt));
}

inline double i_glrt(const SplitObservation& obs, const SteeringPair& v, int sweeps = 3) {
  const HContext ctx(obs.z1, obs.z2, v, secondary_scatter(obs));
  return std::exp(i_glrt_log(ctx, {.sweeps = sweeps}));
}

// sigma_F = v1^T M1^-1 v1 + v2^T M1^-1 v2 with M1 = (E E^T + S) / (2K + 2),
// evaluated through the Woodbury identity from the cached scalars.
inline double sigma_f(const HContext& ctx, const Amplitude& a, std::size_t k) {
  const HScalars& c = ctx.scalars();
  const ResidualForms f = residual_forms(c, a);
  const double det = (1.0 + f.q11) * (1.0 + f.q22) - f.q12 * f.q12;
  const auto reduce = [&](double bx, double by) {
    return ((1.0 + f.q22) * bx * bx - 2.0 * f.q12 * bx * by + (1.0 + f.q11) * by * by) / det;
  };
  const double e1v1 = c.r11 - a.a1 * c.p11 + a.a2 * c.p12;
  const double e2v1 = c.r12 - a.a1 * c.p12 - a.a2 * c.p11;
  const double e1v2 = c.r21 - a.a1 * c.p12 + a.a2 * c.p22;
  const double e2v2 = c.r22 - a.a1 * c.p22 - a.a2 * c.p12;
  const double inner = (c.p11 - reduce(e1v1, e2v1)) + (c.p22 - reduce(e1v2, e2v2));
  return static_cast<double>(2 * k + 2) * inner;
}

inline double i_wald_at(const HContext& ctx, const Amplitude& a, std::size_t k) {
  return sigma_f(ctx, a, k) * a.norm2();
}

inline double i_wald(const HContext& ctx, std::size_t k, const IterativeOptions& opt = {}) {
  return i_wald_at(ctx, iterative_estimate(ctx, opt), k);
}

inline double i_wald(const SplitObservation& obs, const SteeringPair& v, int sweeps = 3) {
  const HContext ctx(obs.z1, obs.z2, v, secondary_scatter(obs));
  return i_wald(ctx, obs.secondary_count(), {.sweeps = sweeps});
}

// Amplitude block of the Fisher information: (v1^T M^-1 v1 + v2^T M^-1 v2) I_2.
inline Matrix fisher_aa(const SpdMatrix& m, const SteeringPair& v) {
  const double d = m.quad_form(v.v1, v.v1) + m.quad_form(v.v2, v.v2);
  return Matrix{{d, 0.0}, {0.0, d}};
}

// ---------------------------------------------------------------------------
// Complex-domain competitors

inline HermitianPd complex_scatter(const CMatrix& rs) {
  if (rs.cols() < rs.rows())
    throw NotPositiveDefinite("complex scatter: K=" + std::to_string(rs.cols()) +
                              " < N=" + std::to_string(rs.rows()) + " leaves S_c singular");
  return HermitianPd(scatter(rs));
}

// Shared pieces: v^H P r, v^H P v, r^H P r for a factorized P^-1.
struct ComplexForms {
  double vr2, vv, rr;
};

inline ComplexForms complex_forms(const HermitianPd& p, std::span<const cdouble> r, std::span<const cdouble> v) {
  const CVector wr = p.whiten(r);
  const CVector wv = p.whiten(v);
  return {std::norm(cdot(wv, wr)), cdot(wv, wv).real(), cdot(wr, wr).real()};
}

inline double kelly_glrt(const HermitianPd& sc, std::span<const cdouble> r, std::span<const cdouble> v) {
  const ComplexForms f = complex_forms(sc, r, v);
  return f.vr2 / (f.vv * (1.0 + f.rr));
}

inline double amf(const HermitianPd& sc, std::span<const cdouble> r, std::span<const cdouble> v) {
  const ComplexForms f = complex_forms(sc, r, v);
  return f.vr2 / f.vv;
}

inline HermitianPd complex_total_scatter(const HermitianPd& sc, std::span<const cdouble> r) {
  CMatrix s0 = sc.entries();
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j) s0(i, j) += r[i] * std::conj(r[j]);
  return HermitianPd(s0);
}

inline double c_rao(const HermitianPd& sc, std::span<const cdouble> r, std::span<const cdouble> v) {
  return amf(complex_total_scatter(sc, r), r, v);
}

inline double kelly_glrt(const CVector& r, const CMatrix& rs, const CVector& v) {
  return kelly_glrt(complex_scatter(rs), r, v);
}
inline double amf(const CVector& r, const CMatrix& rs, const CVector& v) { return amf(complex_scatter(rs), r, v); }
inline double c_rao(const CVector& r, const CMatrix& rs, const CVector& v) {
  return c_rao(complex_scatter(rs), r, v);
}

// ---------------------------------------------------------------------------

struct DetectorSettings {
  int sweeps = 3;
  Coordinate first = Coordinate::Alpha1;
  // Covariance of each real component, required by the benchmark.
  std::optional<SpdMatrix> known_m;
};

// Evaluates a fixed list of detectors on one trial, sharing S, S0 and the
// cached scalars between them. Statistics are returned in decision domain
// (see log_domain()).
class DetectorBank {
 public:
  DetectorBank(std::vector<DetectorKind> kinds, SteeringPair v, DetectorSettings settings = {})
      : kinds_(std::move(kinds)), v_(std::move(v)), vc_(to_complex(v_)), settings_(std::move(settings)) {
    for (DetectorKind k : kinds_) {
      if (is_symmetric_spectrum(k)) need_real_ = true;
      if (is_complex_domain(k)) need_complex_ = true;
      if (k == DetectorKind::BENCH_GLRT && !settings_.known_m)
        throw InvalidModel("benchmark detector needs the true covariance");
    }
  }

  const std::vector<DetectorKind>& kinds() const noexcept { return kinds_; }
  const SteeringPair& steering() const noexcept { return v_; }
  bool needs_real() const noexcept { return need_real_; }
  bool needs_complex() const noexcept { return need_complex_; }

  // `real_data` feeds the symmetric-spectrum family, `complex_data` the
  // competitors; either may be null when no detector of that family is listed.
  void evaluate(const SplitObservation* real_data, const ComplexObservation* complex_data,
                std::span<double> out) const {
    if (out.size() != kinds_.size()) throw DimensionMismatch("DetectorBank::evaluate: output size");
    std::optional<HContext> ctx;
    std::optional<HermitianPd> sc;
    std::optional<Amplitude> est;
    const auto real_ctx = [&]() -> const HContext& {
      if (!ctx) {
        if (!real_data) throw InvalidModel("DetectorBank: real data missing");
        ctx.emplace(real_data->z1, real_data->z2, v_, secondary_scatter(*real_data));
      }
      return *ctx;
    };
    const auto estimate = [&]() -> const Amplitude& {
      if (!est) est = iterative_estimate(real_ctx(), {.sweeps = settings_.sweeps, .first = settings_.first});
      return *est;
    };
    const auto cplx = [&]() -> const HermitianPd& {
      if (!sc) {
        if (!complex_data) throw InvalidModel("DetectorBank: complex data missing");
        sc.emplace(complex_scatter(complex_data->rs));
      }
      return *sc;
    };

    for (std::size_t i = 0; i < kinds_.size(); ++i) {
      switch (kinds_[i]) {
        case DetectorKind::SS_AMF: out[i] = ss_amf(real_ctx().scalars()); break;
        case DetectorKind::I_GLRT: out[i] = i_glrt_log_at(real_ctx(), estimate()); break;
        case DetectorKind::SS_RAO: {
          const SpdMatrix& s = real_ctx().s();
          out[i] = ss_rao(*real_data, v_, s);
          break;
        }
        case DetectorKind::I_WALD: {
          const Amplitude& a = estimate();
          out[i] = i_wald_at(real_ctx(), a, real_data->secondary_count());
          break;
        }
        case DetectorKind::BENCH_GLRT:
          if (!real_data) throw InvalidModel("DetectorBank: real data missing");
          out[i] = known_m_glrt(real_data->z1, real_data->z2, v_, *settings_.known_m);
          break;
        case DetectorKind::KELLY: {
          const HermitianPd& p = cplx();
          out[i] = kelly_glrt(p, complex_data->r, vc_);
          break;
        }
        case DetectorKind::AMF: {
          const HermitianPd& p = cplx();
          out[i] = amf(p, complex_data->r, vc_);
          break;
        }
        case DetectorKind::C_RAO: {
          const HermitianPd& p = cplx();
          out[i] = c_rao(p, complex_data->r, vc_);
          break;
        }
      }
    }
  }

 private:
  std::vector<DetectorKind> kinds_;
  SteeringPair v_;
  CVector vc_;
  DetectorSettings settings_;
  bool need_real_ = false;
  bool need_complex_ = false;
};

}  // namespace ssdet
