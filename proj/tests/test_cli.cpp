#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ssdet/cfar.hpp"
#include "ssdet/run_config.hpp"

using namespace ssdet;

#ifndef SSDET_CLI_PATH
#error "SSDET_CLI_PATH must point at the ssdet executable"
#endif

namespace {

std::string temp_path(const std::string& name) { return (std::filesystem::path(testing::TempDir()) / name).string(); }

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun run_cli(const std::string& args, const std::string& tag) {
  const std::string out = temp_path(tag + ".out"), err = temp_path(tag + ".err");
  const std::string cmd = std::string("SSDET_THREADS=2 '") + SSDET_CLI_PATH + "' " + args + " >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, slurp(out), slurp(err)};
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST(Config, RoundTripIdentity) {
  RunConfig a;
  EXPECT_EQ(parse_config(a.serialize()), a);
  a.n = 6;
  a.k = 5;
  a.rho_c = 0.95;
  a.cnr_db = -std::numeric_limits<double>::infinity();
  a.phase = 0.1 + 0.2;  // not exactly representable in short decimal
  a.detectors = {DetectorKind::KELLY, DetectorKind::I_GLRT};
  a.pfa = 1.0 / 3.0;
  a.seed = 18446744073709551615ull;
  a.output = "out file.csv";
  a.verbose = true;
  const RunConfig b = parse_config(a.serialize());
  EXPECT_EQ(b, a);
  EXPECT_EQ(b.serialize(), a.serialize());
}

TEST(Config, ParsingRules) {
  const KeyValues kv = parse_key_values("# comment\n\n  n = 6 \nk=7\r\n");
  EXPECT_EQ(kv.at("n"), "6");
  EXPECT_EQ(kv.at("k"), "7");
  EXPECT_THROW(parse_key_values("n 6\n"), ConfigError);
  EXPECT_THROW(parse_config("bogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("n = six\n"), ConfigError);
  EXPECT_THROW(parse_config("detectors = ss-amf,nope\n"), ConfigError);
  EXPECT_THROW(parse_config("verbose = maybe\n"), ConfigError);
  EXPECT_EQ(parse_config("detectors = kelly, i-glrt\n").detectors,
            (std::vector<DetectorKind>{DetectorKind::KELLY, DetectorKind::I_GLRT}));
}

TEST(Config, LayeringAndPresets) {
  const RunConfig p = layered_config({}, {{"preset", "fig4-desk"}});
  EXPECT_EQ(p.k, 6u);
  EXPECT_EQ(p.detectors.size(), 4u);
  EXPECT_EQ(p.pfa, 1e-3);
  EXPECT_EQ(p.sweeps, 3);
  const RunConfig q = layered_config({{"preset", "fig7-desk"}, {"k", "30"}}, {{"k", "32"}, {"pd_trials", "10"}});
  EXPECT_EQ(q.k, 32u);
  EXPECT_EQ(q.pd_trials, 10u);
  EXPECT_EQ(q.detectors.size(), 8u);
  EXPECT_EQ(layered_config({{"k", "30"}}, {{"preset", "fig5-desk"}}).k, 30u);  // file beats preset
  for (const auto& name : preset_names()) {
    RunConfig c;
    apply_preset(c, name);
    EXPECT_EQ(c.n, 8u);
    EXPECT_NO_THROW(c.validate("pd")) << name;
  }
  EXPECT_THROW(layered_config({}, {{"preset", "fig9"}}), ConfigError);
}

TEST(Config, Validation) {
  RunConfig c;
  c.detectors = {DetectorKind::KELLY};
  c.k = 3;
  try {
    c.validate("calibrate");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("K >= N"), std::string::npos);
  }
  c = RunConfig{};
  c.detectors.clear();
  EXPECT_THROW(c.validate("pd"), ConfigError);
  EXPECT_NO_THROW(c.validate("estimate-demo"));
  c = RunConfig{};
  EXPECT_THROW(c.validate("cfar"), ConfigError);  // no cube
  c.self_test = true;
  EXPECT_NO_THROW(c.validate("cfar"));
  c.k = 15;
  EXPECT_THROW(c.validate("cfar"), ConfigError);
  c = RunConfig{};
  c.calibration_trials = 100;
  EXPECT_THROW(c.validate("calibrate"), ConfigError);
}

TEST(Cli, CalibrateDeterministicJson) {
  const std::string args = "calibrate --n 8 --k 16 --pfa 1e-2 --calibration-trials 2000 --detectors ss-amf --seed 7";
  const CliRun a = run_cli(args, "cal_a"), b = run_cli(args + " --threads 1", "cal_b");
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j["kind"], "ssdet-calibration");
  EXPECT_EQ(j["thresholds"].size(), 1u);
  EXPECT_EQ(j["thresholds"][0]["detector"], "ss-amf");
  EXPECT_EQ(j["thresholds"][0]["exceedances"], 20);
  EXPECT_NE(a.err.find("warning"), std::string::npos);  // below 100/pfa trials
}

TEST(Cli, ConfigErrorsExitTwo) {
  const CliRun k3 = run_cli("calibrate --n 8 --k 3 --detectors kelly", "k3");
  EXPECT_EQ(k3.code, 2);
  EXPECT_NE(k3.err.find("K >= N"), std::string::npos);
  EXPECT_EQ(run_cli("pd --detectors ''", "empty").code, 2);
  EXPECT_EQ(run_cli("pd --bogus 1", "bogus").code, 2);
  EXPECT_EQ(run_cli("", "nosub").code, 2);
  EXPECT_EQ(run_cli("cfar --cube " + temp_path("does-not-exist.bin"), "missing").code, 2);
  EXPECT_EQ(run_cli("calibrate --config " + temp_path("nope.cfg"), "nocfg").code, 2);
  EXPECT_EQ(run_cli("calibrate --calibration-trials 100 --pfa 1e-2", "few").code, 2);
  const std::string trunc = temp_path("trunc_cli.bin");
  {
    std::ofstream out(trunc, std::ios::binary);
    out << encode_cube_binary(RangeTimeCube(12, 30)).substr(0, 100);
  }
  EXPECT_EQ(run_cli("cfar --k 8 --cube " + trunc, "trunc").code, 2);
}

TEST(Cli, DumpConfigAndConfigFile) {
  const std::string cfg = temp_path("run.cfg");
  {
    std::ofstream out(cfg);
    out << "# test\npreset = fig5-desk\nseed = 99\n";
  }
  const CliRun r = run_cli("pd --config " + cfg + " --seed 5 --dump-config", "dump");
  ASSERT_EQ(r.code, 0) << r.err;
  const RunConfig c = parse_config(r.out);
  EXPECT_EQ(c.k, 12u);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.preset, "fig5-desk");
}

TEST(Cli, PdPresetsWithCalibrationFile) {
  const std::string cal = temp_path("fig4.json");
  const CliRun c = run_cli("calibrate --preset fig4-desk --calibration-trials 4000 --pfa 1e-2 -o " + cal, "f4cal");
  ASSERT_EQ(c.code, 0) << c.err;
  const CliRun p = run_cli("pd --preset fig4-desk --pfa 1e-2 --pd-trials 40 --sinr-max 3 --calibration " + cal, "f4pd");
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(p.out.substr(0, 40), "detector,sinr_db,pd,ci_lo,ci_hi,trials\r\n");
  EXPECT_EQ(count_lines(p.out), 1u + 4 * 4);
  for (const char* d : {"ss-amf,", "i-glrt,", "ss-rao,", "i-wald,"}) EXPECT_NE(p.out.find(d), std::string::npos);
  // same file, different scenario: rejected
  EXPECT_EQ(run_cli("pd --preset fig5-desk --calibration " + cal, "f4bad").code, 2);

  const CliRun f7 = run_cli("pd --preset fig7-desk --pfa 0.05 --calibration-trials 400 --pd-trials 20 --sinr-min 10 "
                         "--sinr-max 10", "f7");
  ASSERT_EQ(f7.code, 0) << f7.err;
  EXPECT_EQ(count_lines(f7.out), 1u + 8);
  EXPECT_NE(f7.out.find("benchmark,"), std::string::npos);
  EXPECT_NE(f7.out.find("kelly,"), std::string::npos);
}

TEST(Cli, CfarVerboseAndSelfTest) {
  const std::string cube = temp_path("cli_cube.csv");
  save_cube(cube, synthetic_cube(10, 30, ClutterModel{}, 3));
  const CliRun v = run_cli("cfar --k 8 --detectors ss-amf,kelly --pfa 0.05 --calibration-trials 400 --verbose --cube " +
                            cube, "verbose");
  ASSERT_EQ(v.code, 0) << v.err;
  EXPECT_EQ(count_lines(v.out), 1u + window_count(10, 30, {8, 8, 0}) * 2);
  EXPECT_EQ(run_cli("cfar --k 8 --detectors benchmark --pfa 0.05 --calibration-trials 400 --cube " + cube, "nobench")
                .code,
            2);

  const CliRun s = run_cli("cfar --self-test --k 8 --cube-nt 12 --cube-ns 60 --pfa 0.05 --calibration-trials 2000 "
                        "--detectors ss-amf,i-glrt,kelly,benchmark", "selftest");
  ASSERT_TRUE(s.code == 0 || s.code == 1) << s.err;
  const auto j = nlohmann::json::parse(s.out);
  EXPECT_EQ(j["windows"], window_count(12, 60, {8, 8, 0}));
  EXPECT_EQ(j["self_test_pass"].get<bool>(), s.code == 0);
  EXPECT_EQ(j["detectors"].size(), 4u);

  const CliRun pd = run_cli("cfar --self-test --pd --k 8 --cube-nt 12 --cube-ns 60 --pfa 0.05 "
                         "--calibration-trials 400 --detectors ss-amf --sinr-min 30 --sinr-max 30", "cfarpd");
  ASSERT_EQ(pd.code, 0) << pd.err;
  EXPECT_NE(pd.out.find("ss-amf,30,1,"), std::string::npos);
}

TEST(Cli, EstimateDemo) {
  const std::string args = "estimate-demo --n 8 --k 6 --trials 1000 --seed 3 --nu-d 0.1";
  const CliRun a = run_cli(args, "est_a"), b = run_cli(args, "est_b");
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(a.out.substr(0, a.out.find('\r')),
            "trial,alpha1_ts,alpha2_ts,alpha1_alg1,alpha2_alg1,alpha1_true,alpha2_true");
  EXPECT_EQ(count_lines(a.out), 1001u);
  // stderr: "mse two-step X, algorithm 1 Y"
  double ts = 0, alg = 0;
  ASSERT_EQ(std::sscanf(a.err.c_str(), "mse two-step %lf, algorithm 1 %lf", &ts, &alg), 2) << a.err;
  EXPECT_LE(alg, ts);
  // At zero Doppler the two-step estimate is already a stationary point of h.
  const CliRun z = run_cli("estimate-demo --n 8 --k 6 --trials 20 --seed 3 --nu-d 0", "est_z");
  ASSERT_EQ(z.code, 0);
  std::istringstream rows(z.out);
  std::string line;
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    ASSERT_EQ(f.size(), 7u);
    EXPECT_NEAR(std::stod(f[1]), std::stod(f[3]), 1e-6 * std::max(1.0, std::abs(std::stod(f[1]))));
    EXPECT_NEAR(std::stod(f[2]), std::stod(f[4]), 1e-6 * std::max(1.0, std::abs(std::stod(f[2]))));
  }
}
