#pragma once

// Flat key=value run configuration shared by every CLI command. Layering is
// defaults < preset < config file < command-line flags.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssdet/detectors.hpp"
#include "ssdet/errors.hpp"
#include "ssdet/montecarlo.hpp"
#include "ssdet/scenario.hpp"

namespace ssdet {

class ConfigError : public Error {
 public:
  using Error::Error;
};

using KeyValues = std::map<std::string, std::string>;

struct RunConfig {
  // scenario
  std::size_t n = 8;
  std::size_t k = 16;
  double rho_c = 0.9;
  double cnr_db = 20.0;
  double fd = 0.0;
  double sigma_n2 = 1.0;
  double nu_d = 0.0;
  double phase = std::numbers::pi / 4.0;
  int sweeps = 3;
  // detection
  std::vector<DetectorKind> detectors = {DetectorKind::SS_AMF, DetectorKind::I_GLRT, DetectorKind::SS_RAO,
                                         DetectorKind::I_WALD};
  double pfa = 1e-3;
  std::size_t calibration_trials = 100000;
  std::size_t pd_trials = 2000;
  double sinr_min = 0.0;
  double sinr_max = 30.0;
  double sinr_step = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: SSDET_THREADS or hardware count
  // io
  std::string output;       // empty: stdout
  std::string calibration;  // thresholds file for pd / cfar
  std::string cube;
  std::string preset;
  // cfar
  std::size_t guard = 0;
  bool verbose = false;
  bool self_test = false;
  std::size_t cube_nt = 8;
  std::size_t cube_ns = 10016;
  bool cfar_pd = false;
  // estimate-demo
  std::size_t estimate_trials = 1000;
  double estimate_sinr = 15.0;

  Scenario scenario() const {
    Scenario sc;
    sc.clutter.n = n;
    sc.clutter.rho_c = rho_c;
    sc.clutter.cnr_db = cnr_db;
    sc.clutter.fd = fd;
    sc.clutter.sigma_n2 = sigma_n2;
    sc.k = k;
    sc.nu_d = nu_d;
    sc.phase = phase;
    sc.sweeps = sweeps;
    return sc;
  }

  std::vector<double> grid() const { return sinr_grid(sinr_min, sinr_max, sinr_step); }

  void apply(const std::string& key, const std::string& value);
  void apply(const KeyValues& kv) {
    for (const auto& [key, value] : kv) apply(key, value);
  }
  KeyValues to_key_values() const;
  std::string serialize() const;

  // Checks everything downstream modules would reject, for a given command.
  void validate(const std::string& command) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  if (v == "-inf") return -std::numeric_limits<double>::infinity();
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (...) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  return x;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (...) {
    throw ConfigError("config: '" + key + "' out of range: '" + v + "'");
  }
}

inline int to_int(const std::string& key, const std::string& v) {
  const std::uint64_t x = to_u64(key, v);
  if (x > 1000000) throw ConfigError("config: '" + key + "' too large");
  return static_cast<int>(x);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

inline std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<DetectorKind> to_detectors(const std::string& v) {
  std::vector<DetectorKind> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto k = parse_detector(item);
    if (!k) throw ConfigError("config: unknown detector '" + item + "'");
    out.push_back(*k);
  }
  return out;
}

inline std::string join_detectors(const std::vector<DetectorKind>& ks) {
  std::string s;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (i) s += ',';
    s += detector_name(ks[i]);
  }
  return s;
}

}  // namespace config_detail

inline void RunConfig::apply(const std::string& key, const std::string& raw) {
  using namespace config_detail;
  const std::string v = trim(raw);
  if (key == "n") n = to_u64(key, v);
  else if (key == "k") k = to_u64(key, v);
  else if (key == "rho_c") rho_c = to_double(key, v);
  else if (key == "cnr_db") cnr_db = to_double(key, v);
  else if (key == "fd") fd = to_double(key, v);
  else if (key == "sigma_n2") sigma_n2 = to_double(key, v);
  else if (key == "nu_d") nu_d = to_double(key, v);
  else if (key == "phase") phase = to_double(key, v);
  else if (key == "sweeps") sweeps = to_int(key, v);
  else if (key == "detectors") detectors = to_detectors(v);
  else if (key == "pfa") pfa = to_double(key, v);
  else if (key == "calibration_trials") calibration_trials = to_u64(key, v);
  else if (key == "pd_trials") pd_trials = to_u64(key, v);
  else if (key == "sinr_min") sinr_min = to_double(key, v);
  else if (key == "sinr_max") sinr_max = to_double(key, v);
  else if (key == "sinr_step") sinr_step = to_double(key, v);
  else if (key == "seed") seed = to_u64(key, v);
  else if (key == "threads") threads = static_cast<unsigned>(to_int(key, v));
  else if (key == "output") output = v;
  else if (key == "calibration") calibration = v;
  else if (key == "cube") cube = v;
  else if (key == "preset") preset = v;
  else if (key == "guard") guard = to_u64(key, v);
  else if (key == "verbose") verbose = to_bool(key, v);
  else if (key == "self_test") self_test = to_bool(key, v);
  else if (key == "cube_nt") cube_nt = to_u64(key, v);
  else if (key == "cube_ns") cube_ns = to_u64(key, v);
  else if (key == "cfar_pd") cfar_pd = to_bool(key, v);
  else if (key == "estimate_trials") estimate_trials = to_u64(key, v);
  else if (key == "estimate_sinr") estimate_sinr = to_double(key, v);
  else throw ConfigError("config: unknown key '" + key + "'");
}

inline KeyValues RunConfig::to_key_values() const {
  using namespace config_detail;
  return {
      {"n", std::to_string(n)},
      {"k", std::to_string(k)},
      {"rho_c", num(rho_c)},
      {"cnr_db", num(cnr_db)},
      {"fd", num(fd)},
      {"sigma_n2", num(sigma_n2)},
      {"nu_d", num(nu_d)},
      {"phase", num(phase)},
      {"sweeps", std::to_string(sweeps)},
      {"detectors", join_detectors(detectors)},
      {"pfa", num(pfa)},
      {"calibration_trials", std::to_string(calibration_trials)},
      {"pd_trials", std::to_string(pd_trials)},
      {"sinr_min", num(sinr_min)},
      {"sinr_max", num(sinr_max)},
      {"sinr_step", num(sinr_step)},
      {"seed", std::to_string(seed)},
      {"threads", std::to_string(threads)},
      {"output", output},
      {"calibration", calibration},
      {"cube", cube},
      {"preset", preset},
      {"guard", std::to_string(guard)},
      {"verbose", verbose ? "true" : "false"},
      {"self_test", self_test ? "true" : "false"},
      {"cube_nt", std::to_string(cube_nt)},
      {"cube_ns", std::to_string(cube_ns)},
      {"cfar_pd", cfar_pd ? "true" : "false"},
      {"estimate_trials", std::to_string(estimate_trials)},
      {"estimate_sinr", num(estimate_sinr)},
  };
}

inline std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [key, value] : to_key_values()) out += key + " = " + value + "\n";
  return out;
}

// Parses "key = value" lines; '#' starts a comment line. Blank values are
// allowed (they clear string keys).
inline KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = config_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = config_detail::trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[key] = config_detail::trim(t.substr(eq + 1));
  }
  return kv;
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  c.apply(parse_key_values(text));
  return c;
}

inline KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

inline std::vector<std::string> preset_names() { return {"fig4-desk", "fig5-desk", "fig6-desk", "fig7-desk"}; }

// Figure parameter sets at desk scale: Pfa rescaled from 1e-4 to 1e-3.
inline void apply_preset(RunConfig& c, const std::string& name) {
  using D = DetectorKind;
  c.n = 8;
  c.rho_c = 0.9;
  c.cnr_db = 20.0;
  c.fd = 0.0;
  c.nu_d = 0.0;
  c.sweeps = 3;
  c.pfa = 1e-3;
  c.calibration_trials = 100000;
  c.pd_trials = 2000;
  c.sinr_min = 0.0;
  c.sinr_max = 30.0;
  c.sinr_step = 1.0;
  if (name == "fig4-desk") {
    c.k = 6;
    c.detectors = {D::SS_AMF, D::I_GLRT, D::SS_RAO, D::I_WALD};
  } else if (name == "fig5-desk" || name == "fig6-desk" || name == "fig7-desk") {
    c.k = name == "fig5-desk" ? 12 : name == "fig6-desk" ? 16 : 32;
    c.detectors = {D::SS_AMF, D::I_GLRT, D::SS_RAO, D::I_WALD, D::KELLY, D::AMF, D::C_RAO, D::BENCH_GLRT};
  } else {
    throw ConfigError("unknown preset '" + name + "' (known: fig4-desk, fig5-desk, fig6-desk, fig7-desk)");
  }
  c.preset = name;
}

// defaults < preset < file < flags. The preset may come from either layer.
inline RunConfig layered_config(const KeyValues& file, const KeyValues& flags) {
  RunConfig c;
  std::string preset;
  if (auto it = file.find("preset"); it != file.end()) preset = it->second;
  if (auto it = flags.find("preset"); it != flags.end()) preset = it->second;
  if (!preset.empty()) apply_preset(c, preset);
  c.apply(file);
  c.apply(flags);
  return c;
}

inline void RunConfig::validate(const std::string& command) const {
  const auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (n < 2) fail("n must be >= 2");
  if (k == 0) fail("k must be >= 1");
  if (!(rho_c > 0.0 && rho_c < 1.0)) fail("rho_c must lie in (0,1)");
  if (!(sigma_n2 > 0.0) || !std::isfinite(sigma_n2)) fail("sigma_n2 must be positive");
  if (std::isnan(cnr_db) || cnr_db == std::numeric_limits<double>::infinity()) fail("cnr_db must be finite or -inf");
  if (!std::isfinite(fd) || !std::isfinite(nu_d) || !std::isfinite(phase)) fail("fd, nu_d and phase must be finite");
  if (sweeps < 0) fail("sweeps must be >= 0");

  const bool detecting = command == "calibrate" || command == "pd" || command == "cfar";
  if (detecting) {
    if (detectors.empty()) fail("no detectors selected");
    for (DetectorKind d : detectors) {
      const std::string why = secondary_rule_violation(d, n, k);
      if (!why.empty()) fail(why);
    }
    if (!(pfa > 0.0 && pfa < 1.0)) fail("pfa must lie in (0,1)");
    if (calibration.empty() && static_cast<double>(calibration_trials) * pfa < 10.0 - 1e-9)
      fail("calibration needs trials*pfa >= 10 (trials=" + std::to_string(calibration_trials) + ")");
  }
  if (command == "pd" || (command == "cfar" && cfar_pd)) {
    if (pd_trials == 0 && command == "pd") fail("pd_trials must be positive");
    if (!std::isfinite(sinr_min) || !std::isfinite(sinr_max) || !(sinr_step > 0.0) || sinr_max < sinr_min)
      fail("SINR grid needs finite sinr_min <= sinr_max and sinr_step > 0");
  }
  if (command == "cfar") {
    if (k % 2 != 0) fail("cfar needs an even k, got " + std::to_string(k));
    if (cube.empty() && !self_test) fail("cfar needs --cube <path> or --self-test");
    if (self_test && (cube_nt < n || cube_ns < k + 2 * guard + 1)) fail("synthetic cube too small for the window");
  }
  if (command == "estimate-demo") {
    if (2 * k < n) fail("estimate-demo needs 2K >= N");
    if (estimate_trials == 0) fail("estimate_trials must be positive");
    if (!std::isfinite(estimate_sinr)) fail("estimate_sinr must be finite");
  }
}

}  // namespace ssdet
