#pragma once

// Sliding-window analysis over an Nt x Ns range-time matrix: the N x (K+1)
// window moves over time and range, the primary cell sits in the middle and
// the K/2 cells on each side are the training data.

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ssdet/detectors.hpp"
#include "ssdet/errors.hpp"
#include "ssdet/montecarlo.hpp"
#include "ssdet/parallel.hpp"
#include "ssdet/rng.hpp"
#include "ssdet/scenario.hpp"
#include "ssdet/stats.hpp"

namespace ssdet {

struct RangeTimeCube {
  std::size_t nt = 0;
  std::size_t ns = 0;
  std::vector<cdouble> data;  // data[t * ns + s]

  RangeTimeCube() = default;
  RangeTimeCube(std::size_t nt_, std::size_t ns_) : nt(nt_), ns(ns_), data(nt_ * ns_) {}

  cdouble& operator()(std::size_t t, std::size_t s) { return data[t * ns + s]; }
  const cdouble& operator()(std::size_t t, std::size_t s) const { return data[t * ns + s]; }

  RangeTimeCube scaled(double c) const {
    RangeTimeCube out = *this;
    for (auto& x : out.data) x *= c;
    return out;
  }

  friend bool operator==(const RangeTimeCube&, const RangeTimeCube&) = default;
};

enum class CubeFormat { Binary, Csv };

inline CubeFormat cube_format_for(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot != std::string::npos && path.substr(dot) == ".csv") return CubeFormat::Csv;
  return CubeFormat::Binary;
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

inline void check_finite(const RangeTimeCube& c) {
  for (std::size_t i = 0; i < c.data.size(); ++i) {
    if (!std::isfinite(c.data[i].real()) || !std::isfinite(c.data[i].imag()))
      throw CubeFormatError(CubeFormatError::Kind::NonFinitePayload,
                            "cube: non-finite sample at t=" + std::to_string(i / c.ns) +
                                ", s=" + std::to_string(i % c.ns));
  }
}

inline bool parse_u64(const std::string& s, std::uint64_t& v) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    if (s.find_first_not_of("0123456789 \t\r") != std::string::npos) return false;
    v = std::stoull(s, &used);
  } catch (...) {
    return false;
  }
  return used > 0;
}

inline bool parse_real(const std::string& s, double& v) {
  std::size_t used = 0;
  try {
    v = std::stod(s, &used);
  } catch (...) {
    return false;
  }
  return std::isfinite(v) && s.find_first_not_of(" \t\r", used) == std::string::npos;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> f;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      f.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  f.push_back(cur);
  return f;
}

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline std::string encode_cube_binary(const RangeTimeCube& c) {
  std::string out;
  out.reserve(16 + c.data.size() * 16);
  detail::put_u64(out, c.nt);
  detail::put_u64(out, c.ns);
  for (const cdouble& x : c.data) {
    detail::put_u64(out, std::bit_cast<std::uint64_t>(x.real()));
    detail::put_u64(out, std::bit_cast<std::uint64_t>(x.imag()));
  }
  return out;
}

inline RangeTimeCube decode_cube_binary(const std::string& bytes) {
  using K = CubeFormatError::Kind;
  if (bytes.size() < 16) throw CubeFormatError(K::MalformedHeader, "cube: file shorter than the 16-byte header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t nt = detail::get_u64(p), ns = detail::get_u64(p + 8);
  if (nt == 0 || ns == 0 || nt > (std::uint64_t{1} << 32) || ns > (std::uint64_t{1} << 32))
    throw CubeFormatError(K::MalformedHeader,
                          "cube: implausible header nt=" + std::to_string(nt) + ", ns=" + std::to_string(ns));
  const std::uint64_t need = nt * ns * 16;
  const std::uint64_t have = bytes.size() - 16;
  if (have < need)
    throw CubeFormatError(K::TruncatedPayload, "cube: payload has " + std::to_string(have) + " bytes, header needs " +
                                                  std::to_string(need));
  if (have > need)
    throw CubeFormatError(K::MalformedHeader, "cube: " + std::to_string(have - need) +
                                                  " trailing bytes after the declared payload");
  RangeTimeCube c(nt, ns);
  const unsigned char* q = p + 16;
  for (std::size_t i = 0; i < c.data.size(); ++i, q += 16)
    c.data[i] = {std::bit_cast<double>(detail::get_u64(q)), std::bit_cast<double>(detail::get_u64(q + 8))};
  detail::check_finite(c);
  return c;
}

// CSV layout: "nt,ns" / "<nt>,<ns>" / "t,s,re,im" / one row per sample.
// The two name lines are optional when reading.
inline std::string encode_cube_csv(const RangeTimeCube& c) {
  std::ostringstream os;
  os << "nt,ns\r\n" << c.nt << ',' << c.ns << "\r\nt,s,re,im\r\n";
  for (std::size_t t = 0; t < c.nt; ++t)
    for (std::size_t s = 0; s < c.ns; ++s)
      os << t << ',' << s << ',' << detail::fmt17(c(t, s).real()) << ',' << detail::fmt17(c(t, s).imag())
         << "\r\n";
  return os.str();
}

inline RangeTimeCube decode_cube_csv(const std::string& text) {
  using K = CubeFormatError::Kind;
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  std::size_t i = 0;
  if (i < lines.size() && lines[i] == "nt,ns") ++i;
  if (i >= lines.size()) throw CubeFormatError(K::MalformedHeader, "cube csv: missing dimension line");
  const auto dims = detail::split_csv(lines[i]);
  std::uint64_t nt = 0, ns = 0;
  if (dims.size() != 2 || !detail::parse_u64(dims[0], nt) || !detail::parse_u64(dims[1], ns) || nt == 0 ||
      ns == 0)
    throw CubeFormatError(K::MalformedHeader, "cube csv: bad dimension line '" + lines[i] + "'");
  ++i;
  if (i < lines.size() && lines[i] == "t,s,re,im") ++i;
  RangeTimeCube c(nt, ns);
  std::vector<char> seen(c.data.size(), 0);
  std::size_t filled = 0;
  for (; i < lines.size(); ++i) {
    const auto f = detail::split_csv(lines[i]);
    std::uint64_t t = 0, s = 0;
    double re = 0, im = 0;
    const bool bad_value = f.size() == 4 && (!detail::parse_real(f[2], re) || !detail::parse_real(f[3], im));
    if (f.size() != 4 || !detail::parse_u64(f[0], t) || !detail::parse_u64(f[1], s)) {
      throw CubeFormatError(K::MalformedRecord, "cube csv: bad row " + std::to_string(i + 1) + ": '" + lines[i] + "'");
    }
    if (bad_value) {
      // Distinguish written-out non-finite values from garbage.
      std::string a = f[2] + f[3];
      for (auto& ch : a) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (a.find("nan") != std::string::npos || a.find("inf") != std::string::npos)
        throw CubeFormatError(K::NonFinitePayload, "cube csv: non-finite sample at row " + std::to_string(i + 1));
      throw CubeFormatError(K::MalformedRecord, "cube csv: bad number in row " + std::to_string(i + 1));
    }
    if (t >= nt || s >= ns)
      throw CubeFormatError(K::MalformedRecord, "cube csv: index out of range in row " + std::to_string(i + 1));
    const std::size_t idx = t * ns + s;
    if (seen[idx]) throw CubeFormatError(K::MalformedRecord, "cube csv: duplicate sample in row " + std::to_string(i + 1));
    seen[idx] = 1;
    ++filled;
    c.data[idx] = {re, im};
  }
  if (filled != c.data.size())
    throw CubeFormatError(K::TruncatedPayload, "cube csv: " + std::to_string(filled) + " of " +
                                                   std::to_string(c.data.size()) + " samples present");
  detail::check_finite(c);
  return c;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CubeFormatError(CubeFormatError::Kind::Io, "cannot open '" + path + "'");
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline RangeTimeCube load_cube(const std::string& path, CubeFormat fmt) {
  const std::string bytes = read_file(path);
  return fmt == CubeFormat::Binary ? decode_cube_binary(bytes) : decode_cube_csv(bytes);
}

inline RangeTimeCube load_cube(const std::string& path) { return load_cube(path, cube_format_for(path)); }

inline void save_cube(const std::string& path, const RangeTimeCube& c, CubeFormat fmt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CubeFormatError(CubeFormatError::Kind::Io, "cannot write '" + path + "'");
  const std::string bytes = fmt == CubeFormat::Binary ? encode_cube_binary(c) : encode_cube_csv(c);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CubeFormatError(CubeFormatError::Kind::Io, "write failed for '" + path + "'");
}

inline void save_cube(const std::string& path, const RangeTimeCube& c) { save_cube(path, c, cube_format_for(path)); }

// ---------------------------------------------------------------------------

struct WindowConfig {
  std::size_t n = 8;
  std::size_t k = 16;
  std::size_t guard = 0;  // cells skipped on each side of the primary

  void validate(const RangeTimeCube& c) const {
    if (n < 2) throw InvalidModel("window: N must be >= 2");
    if (k == 0 || k % 2 != 0) throw InvalidModel("window: K must be even and positive, got " + std::to_string(k));
    if (c.nt < n)
      throw InvalidModel("window: cube has " + std::to_string(c.nt) + " temporal samples, N=" + std::to_string(n));
    if (c.ns < k + 2 * guard + 1)
      throw InvalidModel("window: cube has " + std::to_string(c.ns) + " range cells, need at least " +
                         std::to_string(k + 2 * guard + 1));
  }

  std::size_t half() const noexcept { return k / 2 + guard; }
};

inline std::size_t window_count(std::size_t nt, std::size_t ns, const WindowConfig& cfg) {
  if (nt < cfg.n || ns < cfg.k + 2 * cfg.guard + 1) return 0;
  return (nt - cfg.n + 1) * (ns - cfg.k - 2 * cfg.guard);
}

// Secondary range indices for primary cell pc, left block then right block.
inline std::vector<std::size_t> secondary_cells(std::size_t pc, const WindowConfig& cfg) {
  std::vector<std::size_t> cells;
  const std::size_t h = cfg.k / 2;
  for (std::size_t i = h; i >= 1; --i) cells.push_back(pc - cfg.guard - i);
  for (std::size_t i = 1; i <= h; ++i) cells.push_back(pc + cfg.guard + i);
  return cells;
}

struct Window {
  std::size_t t = 0;   // first temporal sample
  std::size_t pc = 0;  // primary range cell
  ComplexObservation obs;
};

// Windows in time-major order: index w = (t * cells) + (pc - first_pc).
class SlidingWindows {
 public:
  SlidingWindows(const RangeTimeCube& cube, WindowConfig cfg) : cube_(&cube), cfg_(cfg) {
    cfg_.validate(cube);
    cells_ = cube.ns - cfg_.k - 2 * cfg_.guard;
    times_ = cube.nt - cfg_.n + 1;
  }

  std::size_t size() const noexcept { return cells_ * times_; }
  std::size_t first_pc() const noexcept { return cfg_.half(); }
  std::size_t cells() const noexcept { return cells_; }
  const WindowConfig& config() const noexcept { return cfg_; }

  Window operator[](std::size_t w) const {
    Window win;
    win.t = w / cells_;
    win.pc = first_pc() + w % cells_;
    const auto sec = secondary_cells(win.pc, cfg_);
    win.obs.r.resize(cfg_.n);
    win.obs.rs = CMatrix(cfg_.n, cfg_.k);
    for (std::size_t i = 0; i < cfg_.n; ++i) {
      win.obs.r[i] = (*cube_)(win.t + i, win.pc);
      for (std::size_t j = 0; j < sec.size(); ++j) win.obs.rs(i, j) = (*cube_)(win.t + i, sec[j]);
    }
    return win;
  }

  class iterator {
   public:
    using value_type = Window;
    using difference_type = std::ptrdiff_t;
    using iterator_category = std::input_iterator_tag;
    iterator(const SlidingWindows* owner, std::size_t i) : owner_(owner), i_(i) {}
    Window operator*() const { return (*owner_)[i_]; }
    iterator& operator++() {
      ++i_;
      return *this;
    }
    iterator operator++(int) {
      iterator tmp = *this;
      ++i_;
      return tmp;
    }
    bool operator==(const iterator& o) const noexcept { return i_ == o.i_; }

   private:
    const SlidingWindows* owner_;
    std::size_t i_;
  };

  iterator begin() const { return {this, 0}; }
  iterator end() const { return {this, size()}; }

 private:
  const RangeTimeCube* cube_;
  WindowConfig cfg_;
  std::size_t cells_ = 0, times_ = 0;
};

inline SlidingWindows sliding_windows(const RangeTimeCube& cube, const WindowConfig& cfg) {
  return SlidingWindows(cube, cfg);
}

// ---------------------------------------------------------------------------

struct CfarOptions {
  double nu_d = 0.0;
  int sweeps = 3;
  // Complex-domain covariance M0 of the cube, when known (synthetic data).
  // Needed by the benchmark detector and by known-covariance injection.
  std::optional<Matrix> known_m0;
  unsigned threads = 0;
};

struct CfarRow {
  DetectorKind detector;
  std::size_t pc;
  std::size_t t;
  double statistic;
  bool decide;
};

struct CfarPfaEntry {
  DetectorKind detector;
  double threshold;
  std::size_t exceedances;
  double pfa;
  Interval ci;
};

struct CfarPfaReport {
  std::size_t windows = 0;
  bool insufficient_windows = false;  // fewer than 10 / pfa_target windows
  std::vector<CfarPfaEntry> entries;
};

namespace detail {

inline DetectorBank make_cfar_bank(const std::vector<DetectorKind>& kinds, const WindowConfig& cfg,
                                   const CfarOptions& opt) {
  if (kinds.empty()) throw InvalidModel("cfar: no detectors selected");
  for (DetectorKind k : kinds) {
    const std::string why = secondary_rule_violation(k, cfg.n, cfg.k);
    if (!why.empty()) throw InvalidModel(why);
  }
  DetectorSettings ds;
  ds.sweeps = opt.sweeps;
  if (opt.known_m0) {
    if (opt.known_m0->rows() != cfg.n || opt.known_m0->cols() != cfg.n)
      throw DimensionMismatch("cfar: known covariance must be N x N");
    Matrix m = *opt.known_m0;
    m *= 0.5;
    ds.known_m = SpdMatrix(m);
  }
  return DetectorBank(kinds, steering(cfg.n, opt.nu_d), std::move(ds));
}

}  // namespace detail

// Applies the detectors to every window with no target; deterministic.
// `pfa_target` only drives the window-count warning flag.
inline CfarPfaReport measure_pfa(const RangeTimeCube& cube, const WindowConfig& cfg,
                                 const std::vector<DetectorKind>& kinds, const std::vector<double>& thresholds,
                                 double pfa_target, const CfarOptions& opt = {},
                                 std::vector<CfarRow>* verbose = nullptr) {
  if (thresholds.size() != kinds.size()) throw DimensionMismatch("measure_pfa: one threshold per detector");
  const SlidingWindows windows(cube, cfg);
  const DetectorBank bank = detail::make_cfar_bank(kinds, cfg, opt);
  const std::size_t nw = windows.size(), nd = kinds.size();
  std::vector<double> stats(nw * nd);
  parallel_for(nw, opt.threads, [&](std::size_t w) {
    const Window win = windows[w];
    const SplitObservation s = split(win.obs);
    bank.evaluate(&s, &win.obs, std::span<double>(stats.data() + w * nd, nd));
  }, 64);

  CfarPfaReport rep;
  rep.windows = nw;
  rep.insufficient_windows = static_cast<double>(nw) < 10.0 / pfa_target;
  for (std::size_t d = 0; d < nd; ++d) {
    std::size_t e = 0;
    for (std::size_t w = 0; w < nw; ++w) e += stats[w * nd + d] > thresholds[d];
    rep.entries.push_back({kinds[d], thresholds[d], e, static_cast<double>(e) / static_cast<double>(nw),
                           wilson_interval(e, nw)});
  }
  if (verbose) {
    verbose->clear();
    verbose->reserve(nw * nd);
    for (std::size_t w = 0; w < nw; ++w) {
      const std::size_t t = w / windows.cells();
      const std::size_t pc = windows.first_pc() + w % windows.cells();
      for (std::size_t d = 0; d < nd; ++d) {
        const double st = stats[w * nd + d];
        verbose->push_back({kinds[d], pc, t, st, st > thresholds[d]});
      }
    }
  }
  return rep;
}

struct InjectionOptions {
  // Fixed target phase; when absent each window draws a uniform phase from
  // the seed.
  std::optional<double> phase;
  // Use CfarOptions::known_m0 for the SINR instead of the per-window proxy.
  bool use_known_m0 = false;
};

// Covariance used to set the SINR of an injected target: the known M0 or,
// on recorded data, the proxy M0 ~ S / K with S the 2K-column real scatter
// (equivalently M ~ S / (2K) per real component).
inline double injection_steering_power(const SplitObservation& s, const SteeringPair& v,
                                       const InjectionOptions& inj, const std::optional<SpdMatrix>& known) {
  if (inj.use_known_m0) return steering_power(v, *known);
  Matrix proxy = gram(s.zs);
  proxy *= 1.0 / static_cast<double>(s.secondary_count());
  return steering_power(v, SpdMatrix(proxy));
}

inline std::vector<PdPoint> measure_pd_injected(const RangeTimeCube& cube, const WindowConfig& cfg,
                                                const std::vector<DetectorKind>& kinds,
                                                const std::vector<double>& thresholds,
                                                const std::vector<double>& sinr_grid_db, std::uint64_t seed,
                                                const CfarOptions& opt = {}, const InjectionOptions& inj = {}) {
  if (thresholds.size() != kinds.size()) throw DimensionMismatch("measure_pd_injected: one threshold per detector");
  if (inj.use_known_m0 && !opt.known_m0) throw InvalidModel("known-covariance injection needs known_m0");
  const SlidingWindows windows(cube, cfg);
  const DetectorBank bank = detail::make_cfar_bank(kinds, cfg, opt);
  const SteeringPair v = steering(cfg.n, opt.nu_d);
  std::optional<SpdMatrix> known;
  if (opt.known_m0) known.emplace(*opt.known_m0);
  const std::size_t nw = windows.size(), nd = kinds.size();

  std::vector<PdPoint> out;
  for (std::size_t p = 0; p < sinr_grid_db.size(); ++p) {
    std::vector<unsigned char> hit(nw * nd, 0);
    const double db = sinr_grid_db[p];
    parallel_for(nw, opt.threads, [&](std::size_t w) {
      Window win = windows[w];
      if (db > -std::numeric_limits<double>::infinity()) {
        const SplitObservation clean = split(win.obs);
        double phase = 0.0;
        if (inj.phase) {
          phase = *inj.phase;
        } else {
          TrialStream rng(seed, StreamDomain::Injection, p, w);
          phase = 2.0 * std::numbers::pi * rng.uniform();
        }
        const double power = injection_steering_power(clean, v, inj, known);
        const double mag = std::sqrt(std::pow(10.0, db / 10.0) / power);
        const cdouble a = std::polar(mag, phase);
        for (std::size_t i = 0; i < cfg.n; ++i) win.obs.r[i] += a * cdouble(v.v1[i], v.v2[i]);
      }
      const SplitObservation s = split(win.obs);
      double buf[kAllDetectors.size()];
      bank.evaluate(&s, &win.obs, std::span<double>(buf, nd));
      for (std::size_t d = 0; d < nd; ++d) hit[w * nd + d] = buf[d] > thresholds[d];
    }, 64);
    for (std::size_t d = 0; d < nd; ++d) {
      std::size_t h = 0;
      for (std::size_t w = 0; w < nw; ++w) h += hit[w * nd + d];
      out.push_back({kinds[d], db, static_cast<double>(h) / static_cast<double>(nw), nw, h, wilson_interval(h, nw)});
    }
  }
  return out;
}

// Synthetic cube: each range cell is an independent circular Gaussian
// temporal sequence whose Nt x Nt covariance follows `model` (model.n is
// overridden by nt). Any N-sample sub-window then has the N x N covariance
// of the same model.
inline RangeTimeCube synthetic_cube(std::size_t nt, std::size_t ns, ClutterModel model, std::uint64_t seed) {
  model.n = nt;
  const Sampler sampler(model);
  RangeTimeCube c(nt, ns);
  for (std::size_t s = 0; s < ns; ++s) {
    TrialStream rng(seed, StreamDomain::Cube, 0, s);
    const CVector col = sampler.noise(rng);
    for (std::size_t t = 0; t < nt; ++t) c(t, s) = col[t];
  }
  return c;
}

inline void write_cfar_rows_csv(std::ostream& os, const std::vector<CfarRow>& rows) {
  os << "detector,pc,t,statistic,decide\r\n";
  for (const auto& r : rows)
    os << detector_name(r.detector) << ',' << r.pc << ',' << r.t << ',' << detail::fmt17(r.statistic) << ','
       << (r.decide ? 1 : 0) << "\r\n";
}

}  // namespace ssdet
