#pragma once

// Threshold calibration by order statistics and Pd-versus-SINR sweeps.
// Every trial draws from its own counter-derived stream, so results do not
// depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ssdet/detectors.hpp"
#include "ssdet/errors.hpp"
#include "ssdet/parallel.hpp"
#include "ssdet/rng.hpp"
#include "ssdet/scenario.hpp"
#include "ssdet/stats.hpp"

namespace ssdet {

inline void validate_detectors(const std::vector<DetectorKind>& kinds, const Scenario& sc) {
  if (kinds.empty()) throw InvalidModel("no detectors selected");
  for (DetectorKind k : kinds) {
    const std::string why = secondary_rule_violation(k, sc.n(), sc.k);
    if (!why.empty()) throw InvalidModel(why);
  }
}

// Synthesizes trials for a scenario. The symmetric-spectrum detectors always
// see zero-Doppler clutter (their real-covariance premise); the complex
// competitors see the configured clutter Doppler. When that is zero both
// families share the same draw.
class TrialGenerator {
 public:
  TrialGenerator(const Scenario& sc, const std::vector<DetectorKind>& kinds)
      : sc_(sc), v_(steering(sc.n(), sc.nu_d)), real_model_(sc.clutter) {
    sc.clutter.validate();
    validate_detectors(kinds, sc);
    real_model_.fd = 0.0;
    for (DetectorKind k : kinds) {
      need_real_ |= is_symmetric_spectrum(k);
      need_complex_ |= is_complex_domain(k);
    }
    separate_complex_ = need_complex_ && !sc.clutter.is_real();
    real_sampler_.emplace(real_model_);
    real_m0_.emplace(clutter_covariance(real_model_));
    if (separate_complex_) {
      complex_sampler_.emplace(sc.clutter);
      complex_m0_.emplace(clutter_covariance_complex(sc.clutter));
    }
    Matrix m = real_m0_->entries();
    m *= 0.5;
    DetectorSettings ds;
    ds.sweeps = sc.sweeps;
    ds.known_m = SpdMatrix(m);
    bank_.emplace(kinds, v_, std::move(ds));
  }

  const SteeringPair& steering_pair() const noexcept { return v_; }
  const DetectorBank& bank() const noexcept { return *bank_; }
  const SpdMatrix& real_m0() const noexcept { return *real_m0_; }

  // Statistics for one trial. `sinr_db` of -inf (or nullopt) gives H0.
  void run(std::optional<double> sinr_db, TrialStream& rng, std::span<double> out) const {
    std::optional<Amplitude> a_real, a_cplx;
    if (sinr_db && *sinr_db > -std::numeric_limits<double>::infinity()) {
      a_real = alpha_for_sinr(*sinr_db, sc_.phase, v_, *real_m0_);
      if (separate_complex_) a_cplx = alpha_for_sinr(*sinr_db, sc_.phase, v_, *complex_m0_);
    }
    const ComplexObservation c0 = real_sampler_->draw(v_, a_real, sc_.k, rng);
    const SplitObservation s0 = split(c0);
    if (separate_complex_) {
      const ComplexObservation c1 = complex_sampler_->draw(v_, a_cplx, sc_.k, rng);
      bank_->evaluate(&s0, &c1, out);
    } else {
      bank_->evaluate(&s0, &c0, out);
    }
  }

 private:
  Scenario sc_;
  SteeringPair v_;
  ClutterModel real_model_;
  bool need_real_ = false, need_complex_ = false, separate_complex_ = false;
  std::optional<Sampler> real_sampler_, complex_sampler_;
  std::optional<SpdMatrix> real_m0_;
  std::optional<HermitianPd> complex_m0_;
  std::optional<DetectorBank> bank_;
};

// stats[d][t] for detector d, trial t.
using StatisticTable = std::vector<std::vector<double>>;

inline StatisticTable simulate_statistics(const Scenario& sc, const std::vector<DetectorKind>& kinds,
                                          std::optional<double> sinr_db, std::size_t trials,
                                          std::uint64_t seed, StreamDomain domain, std::uint64_t block,
                                          unsigned threads = 0) {
  const TrialGenerator gen(sc, kinds);
  StatisticTable table(kinds.size(), std::vector<double>(trials));
  parallel_for(trials, threads, [&](std::size_t t) {
    TrialStream rng(seed, domain, block, t);
    double buf[kAllDetectors.size()];
    gen.run(sinr_db, rng, std::span<double>(buf, kinds.size()));
    for (std::size_t d = 0; d < kinds.size(); ++d) table[d][t] = buf[d];
  });
  return table;
}

// Index (0-based, descending order) of the order statistic used as threshold:
// the floor(n*pfa)+1-th largest value. With strict exceedance this leaves at
// most floor(n*pfa) values above the threshold while the next-lower order
// statistic would exceed n*pfa.
inline std::size_t threshold_rank(std::size_t trials, double pfa) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(trials) * pfa + 1e-9));
}

inline void check_trials(std::size_t trials, double pfa) {
  if (!(pfa > 0.0 && pfa < 1.0)) throw InvalidModel("pfa must lie in (0,1)");
  if (static_cast<double>(trials) * pfa < 10.0 - 1e-9)
    throw InsufficientTrials("need trials*pfa >= 10 (trials=" + std::to_string(trials) +
                             ", pfa=" + std::to_string(pfa) + ")");
}

inline double order_statistic_threshold(std::vector<double> stats, double pfa) {
  const std::size_t j = threshold_rank(stats.size(), pfa);
  if (j >= stats.size()) throw InsufficientTrials("order statistic out of range");
  std::nth_element(stats.begin(), stats.begin() + static_cast<std::ptrdiff_t>(j), stats.end(),
                   std::greater<double>());
  return stats[j];
}

inline std::size_t count_exceedances(std::span<const double> stats, double eta) {
  return static_cast<std::size_t>(std::count_if(stats.begin(), stats.end(), [eta](double s) { return s > eta; }));
}

struct CalibrationResult {
  DetectorKind detector;
  double pfa_target = 0.0;
  std::size_t trials = 0;
  double threshold = 0.0;  // in decision domain (ln t for the I-GLRT)
  std::size_t exceedances = 0;
  Interval pfa_ci;
  std::uint64_t seed = 0;

  bool log_threshold() const noexcept { return log_domain(detector); }
  double empirical_pfa() const noexcept {
    return trials ? static_cast<double>(exceedances) / static_cast<double>(trials) : 0.0;
  }
};

inline std::vector<CalibrationResult> calibrate(const std::vector<DetectorKind>& kinds, const Scenario& sc,
                                                double pfa, std::size_t trials, std::uint64_t seed,
                                                unsigned threads = 0) {
  check_trials(trials, pfa);
  const StatisticTable t =
      simulate_statistics(sc, kinds, std::nullopt, trials, seed, StreamDomain::Calibration, 0, threads);
  std::vector<CalibrationResult> out;
  for (std::size_t d = 0; d < kinds.size(); ++d) {
    CalibrationResult r;
    r.detector = kinds[d];
    r.pfa_target = pfa;
    r.trials = trials;
    r.seed = seed;
    r.threshold = order_statistic_threshold(t[d], pfa);
    r.exceedances = count_exceedances(t[d], r.threshold);
    r.pfa_ci = wilson_interval(r.exceedances, trials);
    out.push_back(r);
  }
  return out;
}

inline CalibrationResult calibrate(DetectorKind kind, const Scenario& sc, double pfa, std::size_t trials,
                                   std::uint64_t seed, unsigned threads = 0) {
  return calibrate(std::vector<DetectorKind>{kind}, sc, pfa, trials, seed, threads).front();
}

// Fresh H0 draws (detection domain) counted against given thresholds.
struct PfaEstimate {
  DetectorKind detector;
  std::size_t trials;
  std::size_t exceedances;
  double pfa;
  Interval ci;
};

inline std::vector<PfaEstimate> measure_pfa_sim(const std::vector<DetectorKind>& kinds,
                                                const std::vector<double>& thresholds, const Scenario& sc,
                                                std::size_t trials, std::uint64_t seed, unsigned threads = 0) {
  if (thresholds.size() != kinds.size()) throw DimensionMismatch("measure_pfa_sim: thresholds");
  const StatisticTable t =
      simulate_statistics(sc, kinds, std::nullopt, trials, seed, StreamDomain::Detection, 0, threads);
  std::vector<PfaEstimate> out;
  for (std::size_t d = 0; d < kinds.size(); ++d) {
    const std::size_t e = count_exceedances(t[d], thresholds[d]);
    out.push_back({kinds[d], trials, e, static_cast<double>(e) / static_cast<double>(trials),
                   wilson_interval(e, trials)});
  }
  return out;
}

struct PdPoint {
  DetectorKind detector;
  double sinr_db = 0.0;
  double pd = 0.0;
  std::size_t trials = 0;
  std::size_t detections = 0;
  Interval ci95;
};

// One block of trials per SINR point; the same block seeds every detector so
// curves are paired.
inline std::vector<PdPoint> pd_sweep(const std::vector<DetectorKind>& kinds, const std::vector<double>& thresholds,
                                     const Scenario& sc, const std::vector<double>& sinr_grid_db,
                                     std::size_t trials_per_point, std::uint64_t seed, unsigned threads = 0) {
  if (thresholds.size() != kinds.size()) throw DimensionMismatch("pd_sweep: one threshold per detector");
  if (trials_per_point == 0) throw InvalidModel("pd_sweep: trials_per_point must be positive");
  std::vector<PdPoint> out;
  for (std::size_t p = 0; p < sinr_grid_db.size(); ++p) {
    const StatisticTable t = simulate_statistics(sc, kinds, sinr_grid_db[p], trials_per_point, seed,
                                                 StreamDomain::Detection, p + 1, threads);
    for (std::size_t d = 0; d < kinds.size(); ++d) {
      const std::size_t hits = count_exceedances(t[d], thresholds[d]);
      out.push_back({kinds[d], sinr_grid_db[p],
                     static_cast<double>(hits) / static_cast<double>(trials_per_point), trials_per_point, hits,
                     wilson_interval(hits, trials_per_point)});
    }
  }
  return out;
}

inline std::vector<PdPoint> curve_of(const std::vector<PdPoint>& pts, DetectorKind k) {
  std::vector<PdPoint> c;
  for (const auto& p : pts)
    if (p.detector == k) c.push_back(p);
  std::sort(c.begin(), c.end(), [](const PdPoint& a, const PdPoint& b) { return a.sinr_db < b.sinr_db; });
  return c;
}

// SINR where the isotonic-fitted curve reaches `level`.
inline std::optional<double> crossing_sinr(const std::vector<PdPoint>& curve, double level) {
  std::vector<double> x, y, w;
  for (const auto& p : curve) {
    x.push_back(p.sinr_db);
    y.push_back(p.pd);
    w.push_back(static_cast<double>(p.trials));
  }
  const std::vector<double> fit = isotonic_fit(y, w);
  return first_crossing(x, fit, level);
}

inline std::vector<double> sinr_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw InvalidModel("sinr grid: need step > 0 and hi >= lo");
  std::vector<double> g;
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) g.push_back(lo + step * static_cast<double>(i));
  return g;
}

inline std::string format_double(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline void write_pd_csv(std::ostream& os, const std::vector<PdPoint>& pts) {
  os << "detector,sinr_db,pd,ci_lo,ci_hi,trials\r\n";
  for (const auto& p : pts)
    os << detector_name(p.detector) << ',' << format_double(p.sinr_db) << ',' << format_double(p.pd) << ','
       << format_double(p.ci95.lo) << ',' << format_double(p.ci95.hi) << ',' << p.trials << "\r\n";
}

}  // namespace ssdet
