// ssdet command-line front end: calibrate, pd, cfar, estimate-demo.
//
// Exit codes: 0 success, 1 self-test failed, 2 configuration/input error,
// 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ssdet/cfar.hpp"
#include "ssdet/estimator.hpp"
#include "ssdet/montecarlo.hpp"
#include "ssdet/run_config.hpp"

using namespace ssdet;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Cli {
  KeyValues flags;
  std::string config_path;
  bool dump_config = false;
};

void add_common(CLI::App* app, Cli& cli) {
  const auto opt = [&](const std::string& name, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(name, [&cli, key](const std::string& v) { cli.flags[key] = v; }, help);
  };
  app->add_option("--config", cli.config_path, "key = value config file (flags override it)");
  app->add_flag("--dump-config", cli.dump_config, "print the effective configuration and exit");
  opt("--preset", "preset", "figure parameter set: fig4-desk, fig5-desk, fig6-desk, fig7-desk");
  opt("--n", "n", "vector length N");
  opt("--k", "k", "secondary vectors K");
  opt("--rho-c", "rho_c", "clutter one-lag correlation");
  opt("--cnr-db", "cnr_db", "clutter-to-noise ratio [dB]");
  opt("--fd", "fd", "clutter Doppler (complex competitors only)");
  opt("--sigma-n2", "sigma_n2", "thermal noise power");
  opt("--nu-d", "nu_d", "target normalized Doppler");
  opt("--phase", "phase", "target phase [rad]");
  opt("--sweeps", "sweeps", "Algorithm 1 sweeps used by I-GLRT / I-WALD");
  opt("--detectors", "detectors", "comma list: ss-amf,i-glrt,ss-rao,i-wald,benchmark,kelly,amf,rao");
  opt("--pfa", "pfa", "target false-alarm probability");
  opt("--calibration-trials", "calibration_trials", "H0 trials for threshold setting");
  opt("--pd-trials", "pd_trials", "trials per SINR point");
  opt("--sinr-min", "sinr_min", "first SINR point [dB]");
  opt("--sinr-max", "sinr_max", "last SINR point [dB]");
  opt("--sinr-step", "sinr_step", "SINR step [dB]");
  opt("--seed", "seed", "master seed");
  opt("--threads", "threads", "worker threads (0: SSDET_THREADS or all cores)");
  opt("-o,--output", "output", "output file (default stdout)");
}

void write_output(const RunConfig& c, const std::string& text) {
  if (c.output.empty()) {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(c.output, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + c.output + "'");
  out << text;
}

json scenario_json(const RunConfig& c) {
  return json{{"n", c.n},           {"k", c.k},         {"rho_c", c.rho_c}, {"cnr_db", c.cnr_db},
              {"fd", c.fd},         {"sigma_n2", c.sigma_n2}, {"nu_d", c.nu_d}, {"sweeps", c.sweeps}};
}

json calibration_json(const RunConfig& c, const std::vector<CalibrationResult>& cal, const std::string& noise) {
  json j;
  j["kind"] = "ssdet-calibration";
  if (!c.preset.empty()) {
    j["preset"] = c.preset;
    j["note"] = "desk scale: Pfa rescaled from 1e-4 to 1e-3";
  }
  j["noise"] = noise;
  j["scenario"] = scenario_json(c);
  j["pfa"] = c.pfa;
  j["trials"] = c.calibration_trials;
  j["seed"] = c.seed;
  json arr = json::array();
  for (const auto& r : cal) {
    arr.push_back({{"detector", std::string(detector_name(r.detector))},
                   {"threshold", r.threshold},
                   {"log_domain", r.log_threshold()},
                   {"exceedances", r.exceedances},
                   {"pfa_ci", {r.pfa_ci.lo, r.pfa_ci.hi}}});
  }
  j["thresholds"] = arr;
  return j;
}

// Thresholds for the configured detectors, from a calibration file after
// checking it was produced for the same window/scenario.
std::vector<double> thresholds_from_file(const RunConfig& c, bool white_expected) {
  std::ifstream in(c.calibration);
  if (!in) throw ConfigError("cannot open calibration file '" + c.calibration + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("calibration file '" + c.calibration + "' is not valid JSON: " + e.what());
  }
  if (j.value("kind", "") != "ssdet-calibration") throw ConfigError("'" + c.calibration + "' is not a calibration file");
  const json& s = j["scenario"];
  const auto mismatch = [&](const char* key, auto mine) {
    if (s.at(key) != json(mine))
      throw ConfigError(std::string("calibration file was made with a different ") + key + " (" + s.at(key).dump() +
                        " vs " + json(mine).dump() + ")");
  };
  mismatch("n", c.n);
  mismatch("k", c.k);
  mismatch("sweeps", c.sweeps);
  mismatch("nu_d", c.nu_d);
  if (white_expected) {
    if (j.value("noise", "") != "white") throw ConfigError("cfar thresholds must be calibrated on white noise");
  } else {
    mismatch("rho_c", c.rho_c);
    mismatch("cnr_db", c.cnr_db);
    mismatch("fd", c.fd);
    mismatch("sigma_n2", c.sigma_n2);
  }
  std::vector<double> th;
  for (DetectorKind d : c.detectors) {
    bool found = false;
    for (const auto& e : j["thresholds"]) {
      if (e.at("detector").get<std::string>() == detector_name(d)) {
        th.push_back(e.at("threshold").get<double>());
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("calibration file has no threshold for " + std::string(detector_name(d)));
  }
  return th;
}

std::vector<double> thresholds_of(const std::vector<CalibrationResult>& cal) {
  std::vector<double> th;
  for (const auto& r : cal) th.push_back(r.threshold);
  return th;
}

void warn_trials(const RunConfig& c) {
  if (static_cast<double>(c.calibration_trials) * c.pfa < 100.0)
    std::cerr << "warning: fewer than 100/pfa calibration trials; thresholds will be noisy\n";
}

int cmd_calibrate(const RunConfig& c) {
  warn_trials(c);
  const auto cal = calibrate(c.detectors, c.scenario(), c.pfa, c.calibration_trials, c.seed, c.threads);
  write_output(c, calibration_json(c, cal, "model").dump(2) + "\n");
  return kExitOk;
}

int cmd_pd(const RunConfig& c) {
  std::vector<double> th;
  if (!c.calibration.empty()) {
    th = thresholds_from_file(c, false);
  } else {
    warn_trials(c);
    th = thresholds_of(calibrate(c.detectors, c.scenario(), c.pfa, c.calibration_trials, c.seed, c.threads));
  }
  if (!c.preset.empty()) std::cerr << "preset " << c.preset << " (desk scale: Pfa rescaled from 1e-4 to 1e-3)\n";
  const auto pts = pd_sweep(c.detectors, th, c.scenario(), c.grid(), c.pd_trials, c.seed, c.threads);
  std::ostringstream os;
  write_pd_csv(os, pts);
  write_output(c, os.str());
  return kExitOk;
}

Scenario white_scenario(const RunConfig& c) {
  Scenario sc = c.scenario();
  sc.clutter = ClutterModel::white(c.n, c.sigma_n2);
  sc.nu_d = c.nu_d;
  return sc;
}

int cmd_cfar(const RunConfig& c) {
  const WindowConfig wc{c.n, c.k, c.guard};
  CfarOptions opt;
  opt.nu_d = c.nu_d;
  opt.sweeps = c.sweeps;
  opt.threads = c.threads;

  RangeTimeCube cube;
  if (c.self_test) {
    cube = synthetic_cube(c.cube_nt, c.cube_ns, ClutterModel::white(c.cube_nt, c.sigma_n2), c.seed);
    Matrix m0 = Matrix::identity(c.n);
    m0 *= c.sigma_n2;
    opt.known_m0 = m0;
  } else {
    try {
      cube = load_cube(c.cube);
    } catch (const CubeFormatError& e) {
      throw ConfigError(e.what());
    }
    for (DetectorKind d : c.detectors)
      if (d == DetectorKind::BENCH_GLRT)
        throw ConfigError("the benchmark detector needs the true covariance, unknown for a recorded cube");
  }
  try {
    wc.validate(cube);
  } catch (const InvalidModel& e) {
    throw ConfigError(e.what());
  }

  std::vector<double> th;
  if (!c.calibration.empty()) {
    th = thresholds_from_file(c, true);
  } else {
    warn_trials(c);
    th = thresholds_of(calibrate(c.detectors, white_scenario(c), c.pfa, c.calibration_trials, c.seed, c.threads));
  }

  if (c.cfar_pd) {
    InjectionOptions inj;
    inj.use_known_m0 = c.self_test;
    const auto pts = measure_pd_injected(cube, wc, c.detectors, th, c.grid(), c.seed, opt, inj);
    std::ostringstream os;
    write_pd_csv(os, pts);
    write_output(c, os.str());
    return kExitOk;
  }

  std::vector<CfarRow> rows;
  const CfarPfaReport rep = measure_pfa(cube, wc, c.detectors, th, c.pfa, opt, c.verbose ? &rows : nullptr);
  if (rep.insufficient_windows)
    std::cerr << "warning: " << rep.windows << " windows is fewer than 10/pfa; the estimate is coarse\n";
  if (c.verbose) {
    std::ostringstream os;
    write_cfar_rows_csv(os, rows);
    write_output(c, os.str());
    return kExitOk;
  }
  const Interval nominal = nominal_interval(c.pfa, rep.windows);
  bool all_inside = true;
  json j;
  j["kind"] = "ssdet-cfar-pfa";
  j["cube"] = c.self_test ? std::string("synthetic-white") : c.cube;
  j["nt"] = cube.nt;
  j["ns"] = cube.ns;
  j["windows"] = rep.windows;
  j["pfa_target"] = c.pfa;
  j["nominal_ci"] = {nominal.lo, nominal.hi};
  json arr = json::array();
  for (const auto& e : rep.entries) {
    const bool inside = nominal.contains(e.pfa);
    all_inside = all_inside && inside;
    arr.push_back({{"detector", std::string(detector_name(e.detector))},
                   {"threshold", e.threshold},
                   {"exceedances", e.exceedances},
                   {"pfa", e.pfa},
                   {"ratio_to_target", e.pfa / c.pfa},
                   {"ci", {e.ci.lo, e.ci.hi}},
                   {"inside_nominal_ci", inside}});
  }
  j["detectors"] = arr;
  if (c.self_test) j["self_test_pass"] = all_inside;
  write_output(c, j.dump(2) + "\n");
  if (c.self_test && !all_inside) {
    std::cerr << "self-test: at least one detector's Pfa falls outside the nominal 95% interval\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

int cmd_estimate_demo(const RunConfig& c) {
  const Scenario sc = c.scenario();
  ClutterModel model = sc.clutter;
  model.fd = 0.0;
  const SteeringPair v = steering(c.n, c.nu_d);
  const SpdMatrix m0 = clutter_covariance(model);
  const Amplitude truth = alpha_for_sinr(c.estimate_sinr, c.phase, v, m0);
  const Sampler sampler(model);
  std::ostringstream os;
  os << "trial,alpha1_ts,alpha2_ts,alpha1_alg1,alpha2_alg1,alpha1_true,alpha2_true\r\n";
  double mse_ts = 0.0, mse_alg1 = 0.0;
  for (std::size_t t = 0; t < c.estimate_trials; ++t) {
    TrialStream rng(c.seed, StreamDomain::Estimation, 0, t);
    const SplitObservation obs = split(sampler.draw(v, truth, c.k, rng));
    const HContext ctx(obs.z1, obs.z2, v, SpdMatrix(gram(obs.zs)));
    const Amplitude ts = two_step_estimate(ctx);
    const Amplitude a1 = algorithm1(ctx, ts, Algorithm1Options::sweeps(c.sweeps)).amplitude;
    mse_ts += (ts.a1 - truth.a1) * (ts.a1 - truth.a1) + (ts.a2 - truth.a2) * (ts.a2 - truth.a2);
    mse_alg1 += (a1.a1 - truth.a1) * (a1.a1 - truth.a1) + (a1.a2 - truth.a2) * (a1.a2 - truth.a2);
    os << t << ',' << format_double(ts.a1) << ',' << format_double(ts.a2) << ',' << format_double(a1.a1) << ','
       << format_double(a1.a2) << ',' << format_double(truth.a1) << ',' << format_double(truth.a2) << "\r\n";
  }
  write_output(c, os.str());
  const double nt = static_cast<double>(c.estimate_trials);
  std::cerr << "mse two-step " << mse_ts / nt << ", algorithm 1 " << mse_alg1 / nt << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetric-spectrum adaptive detectors: calibration, Pd curves, CFAR analysis"};
  app.require_subcommand(1);
  Cli cli;

  auto* cal = app.add_subcommand("calibrate", "set thresholds for a target Pfa by Monte Carlo");
  auto* pd = app.add_subcommand("pd", "Pd versus SINR curves (CSV)");
  auto* cfar = app.add_subcommand("cfar", "sliding-window Pfa / Pd on a range-time cube");
  auto* est = app.add_subcommand("estimate-demo", "two-step vs Algorithm 1 amplitude estimates (CSV)");
  for (auto* sub : {cal, pd, cfar, est}) add_common(sub, cli);
  for (auto* sub : {pd, cfar})
    sub->add_option_function<std::string>(
        "--calibration", [&cli](const std::string& v) { cli.flags["calibration"] = v; },
        "thresholds JSON from 'calibrate' (otherwise calibrated in place)");
  const auto cfar_opt = [&](const std::string& name, const std::string& key, const std::string& help) {
    cfar->add_option_function<std::string>(name, [&cli, key](const std::string& v) { cli.flags[key] = v; }, help);
  };
  cfar_opt("--cube", "cube", "cube file (.csv or binary)");
  cfar_opt("--guard", "guard", "guard cells on each side");
  cfar_opt("--cube-nt", "cube_nt", "synthetic cube temporal samples");
  cfar_opt("--cube-ns", "cube_ns", "synthetic cube range cells");
  cfar->add_flag_callback("--verbose", [&cli] { cli.flags["verbose"] = "true"; }, "per-window CSV rows");
  cfar->add_flag_callback("--self-test", [&cli] { cli.flags["self_test"] = "true"; },
                          "synthetic white cube null-calibration check");
  cfar->add_flag_callback("--pd", [&cli] { cli.flags["cfar_pd"] = "true"; }, "Pd with injected targets");
  est->add_option_function<std::string>(
      "--trials", [&cli](const std::string& v) { cli.flags["estimate_trials"] = v; }, "Monte Carlo trials");
  est->add_option_function<std::string>(
      "--sinr", [&cli](const std::string& v) { cli.flags["estimate_sinr"] = v; }, "target SINR [dB]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  std::string command;
  for (auto* sub : {cal, pd, cfar, est})
    if (sub->parsed()) command = sub->get_name();

  RunConfig c;
  try {
    const KeyValues file = cli.config_path.empty() ? KeyValues{} : load_key_values(cli.config_path);
    c = layered_config(file, cli.flags);
    if (cli.dump_config) {
      std::cout << c.serialize();
      return kExitOk;
    }
    c.validate(command);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (command == "calibrate") return cmd_calibrate(c);
    if (command == "pd") return cmd_pd(c);
    if (command == "cfar") return cmd_cfar(c);
    return cmd_estimate_demo(c);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidModel& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InsufficientTrials& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DimensionMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CubeFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}
