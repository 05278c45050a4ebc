#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ssdet/cfar.hpp"
#include "ssdet/montecarlo.hpp"

using namespace ssdet;

namespace {

RangeTimeCube small_cube() {
  RangeTimeCube c(2, 2);
  c(0, 0) = {1.0, -0.5};
  c(0, 1) = {0.1, 1e-300};
  c(1, 0) = {-3.25, 7.0 / 3.0};
  c(1, 1) = {std::nextafter(1.0, 2.0), -0.0};
  return c;
}

std::string temp_path(const std::string& name) { return (std::filesystem::path(testing::TempDir()) / name).string(); }

CubeFormatError::Kind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const CubeFormatError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no CubeFormatError thrown";
  return CubeFormatError::Kind::Io;
}

const std::vector<DetectorKind> kAdaptive{DetectorKind::SS_AMF, DetectorKind::I_GLRT, DetectorKind::SS_RAO,
                                          DetectorKind::I_WALD, DetectorKind::KELLY,  DetectorKind::AMF,
                                          DetectorKind::C_RAO};

std::vector<double> thresholds_of(const std::vector<CalibrationResult>& cal) {
  std::vector<double> t;
  for (const auto& c : cal) t.push_back(c.threshold);
  return t;
}

}  // namespace

TEST(CubeIo, BinaryRoundTripBitExact) {
  const RangeTimeCube c = small_cube();
  const std::string path = temp_path("cube.bin");
  save_cube(path, c);
  const RangeTimeCube back = load_cube(path);
  ASSERT_EQ(back.nt, 2u);
  ASSERT_EQ(back.ns, 2u);
  EXPECT_EQ(std::memcmp(back.data.data(), c.data.data(), c.data.size() * sizeof(cdouble)), 0);
  const std::string bytes = encode_cube_binary(c);
  EXPECT_EQ(bytes.size(), 16u + 4 * 16);
  EXPECT_EQ(bytes[0], 2);
  EXPECT_EQ(bytes[8], 2);
  double re = 0;
  std::memcpy(&re, bytes.data() + 16, 8);
  EXPECT_EQ(re, 1.0);
}

TEST(CubeIo, CsvMatchesBinary) {
  const RangeTimeCube c = synthetic_cube(5, 7, ClutterModel{}, 3);
  const std::string bpath = temp_path("cube2.bin"), cpath = temp_path("cube2.csv");
  save_cube(bpath, c);
  save_cube(cpath, c);
  const RangeTimeCube a = load_cube(bpath), b = load_cube(cpath);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  const std::string txt = encode_cube_csv(small_cube());
  EXPECT_EQ(txt.substr(0, 21), "nt,ns\r\n2,2\r\nt,s,re,im");
  // header lines are optional, row order is free
  EXPECT_EQ(decode_cube_csv("1,2\n0,1,3,4\n0,0,1,2\n"), ([] {
              RangeTimeCube x(1, 2);
              x(0, 0) = {1, 2};
              x(0, 1) = {3, 4};
              return x;
            }()));
}

TEST(CubeIo, Errors) {
  using K = CubeFormatError::Kind;
  const std::string good = encode_cube_binary(small_cube());
  EXPECT_EQ(error_kind([&] { decode_cube_binary(good.substr(0, good.size() - 3)); }), K::TruncatedPayload);
  EXPECT_EQ(error_kind([&] { decode_cube_binary(good.substr(0, 10)); }), K::MalformedHeader);
  EXPECT_EQ(error_kind([&] { decode_cube_binary(good + "x"); }), K::MalformedHeader);
  std::string bad = good;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::memcpy(bad.data() + 24, &nan, 8);
  EXPECT_EQ(error_kind([&] { decode_cube_binary(bad); }), K::NonFinitePayload);
  const std::string path = temp_path("trunc.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << good.substr(0, 40);
  }
  EXPECT_EQ(error_kind([&] { load_cube(path); }), K::TruncatedPayload);
  EXPECT_EQ(error_kind([&] { load_cube(temp_path("missing.bin")); }), K::Io);
  EXPECT_EQ(error_kind([] { decode_cube_csv("nt,ns\r\n"); }), K::MalformedHeader);
  EXPECT_EQ(error_kind([] { decode_cube_csv("x,2\n"); }), K::MalformedHeader);
  EXPECT_EQ(error_kind([] { decode_cube_csv("1,1\n0,0,1\n"); }), K::MalformedRecord);
  EXPECT_EQ(error_kind([] { decode_cube_csv("1,1\n0,5,1,1\n"); }), K::MalformedRecord);
  EXPECT_EQ(error_kind([] { decode_cube_csv("1,2\n0,0,1,1\n"); }), K::TruncatedPayload);
  EXPECT_EQ(error_kind([] { decode_cube_csv("1,1\n0,0,nan,1\n"); }), K::NonFinitePayload);
}

TEST(Windows, CountFormula) {
  EXPECT_EQ(window_count(8, 10, {8, 6, 0}), 4u);
  EXPECT_EQ(window_count(30, 76, {8, 12, 0}), 1472u);
  for (std::size_t nt : {8u, 9u, 20u})
    for (std::size_t ns : {13u, 17u, 40u})
      for (std::size_t k : {4u, 8u, 12u}) {
        const WindowConfig cfg{8, k, 0};
        const RangeTimeCube c(nt, ns);
        EXPECT_EQ(sliding_windows(c, cfg).size(), (nt - 8 + 1) * (ns - k)) << nt << " " << ns << " " << k;
        std::size_t seen = 0;
        for (const Window& w : sliding_windows(c, cfg)) {
          (void)w;
          ++seen;
        }
        EXPECT_EQ(seen, (nt - 8 + 1) * (ns - k));
      }
  EXPECT_THROW(sliding_windows(RangeTimeCube(8, 10), {8, 5, 0}), InvalidModel);
  EXPECT_THROW(sliding_windows(RangeTimeCube(7, 10), {8, 6, 0}), InvalidModel);
  EXPECT_THROW(sliding_windows(RangeTimeCube(8, 6), {8, 6, 0}), InvalidModel);
}

TEST(Windows, SecondaryLayout) {
  // Encode (t, s) in the samples so the window contents identify their origin.
  RangeTimeCube c(9, 15);
  for (std::size_t t = 0; t < 9; ++t)
    for (std::size_t s = 0; s < 15; ++s) c(t, s) = {static_cast<double>(t), static_cast<double>(s)};
  const WindowConfig cfg{8, 6, 0};
  const SlidingWindows ws(c, cfg);
  EXPECT_EQ(ws.first_pc(), 3u);
  for (const Window& w : ws) {
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(w.obs.r[i], cdouble(w.t + i, w.pc));
    std::vector<double> cols;
    for (std::size_t j = 0; j < 6; ++j) {
      cols.push_back(w.obs.rs(0, j).imag());
      EXPECT_EQ(w.obs.rs(5, j).real(), static_cast<double>(w.t + 5));
    }
    const double pc = static_cast<double>(w.pc);
    EXPECT_EQ(cols, (std::vector<double>{pc - 3, pc - 2, pc - 1, pc + 1, pc + 2, pc + 3}));
  }
  const WindowConfig guarded{8, 4, 1};
  EXPECT_EQ(secondary_cells(5, guarded), (std::vector<std::size_t>{2, 3, 7, 8}));
  EXPECT_EQ(window_count(8, 15, guarded), 9u);
}

TEST(CfarPfa, ScaleInvarianceAndVerbose) {
  const RangeTimeCube c = synthetic_cube(12, 60, ClutterModel{}, 5);
  const WindowConfig cfg{8, 10, 0};
  Scenario sc;
  sc.k = 10;
  sc.clutter = ClutterModel::white(8);
  const auto eta = thresholds_of(calibrate(kAdaptive, sc, 0.1, 2000, 6));
  std::vector<CfarRow> rows;
  const auto a = measure_pfa(c, cfg, kAdaptive, eta, 0.1, {}, &rows);
  const auto b = measure_pfa(c.scaled(10.0), cfg, kAdaptive, eta, 0.1);
  ASSERT_EQ(a.windows, 5u * 50u);
  for (std::size_t d = 0; d < kAdaptive.size(); ++d) {
    if (kAdaptive[d] == DetectorKind::I_WALD) continue;  // see detector tests
    EXPECT_EQ(a.entries[d].exceedances, b.entries[d].exceedances) << detector_name(kAdaptive[d]);
  }
  EXPECT_EQ(rows.size(), a.windows * kAdaptive.size());
  std::size_t ex = 0;
  for (const auto& r : rows) {
    EXPECT_EQ(r.decide, r.statistic > eta[static_cast<std::size_t>(&r - rows.data()) % kAdaptive.size()]);
    if (r.detector == DetectorKind::SS_AMF) ex += r.decide;
  }
  EXPECT_EQ(ex, a.entries[0].exceedances);
  EXPECT_EQ(rows[kAdaptive.size()].pc, 6u);
  EXPECT_EQ(rows.back().t, 4u);
  std::ostringstream os;
  write_cfar_rows_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, 31), "detector,pc,t,statistic,decide\r");
  EXPECT_FALSE(a.insufficient_windows);
  EXPECT_TRUE(measure_pfa(c, cfg, kAdaptive, eta, 1e-2).insufficient_windows);
  // deterministic
  EXPECT_EQ(measure_pfa(c, cfg, kAdaptive, eta, 0.1).entries[1].exceedances, a.entries[1].exceedances);
}

TEST(CfarPfa, BenchmarkNeedsKnownCovariance) {
  const RangeTimeCube c = synthetic_cube(8, 30, ClutterModel::white(8), 1);
  const WindowConfig cfg{8, 10, 0};
  EXPECT_THROW(measure_pfa(c, cfg, {DetectorKind::BENCH_GLRT}, {1.0}, 0.1), InvalidModel);
  CfarOptions opt;
  opt.known_m0 = Matrix::identity(8);
  EXPECT_NO_THROW(measure_pfa(c, cfg, {DetectorKind::BENCH_GLRT}, {1.0}, 0.1, opt));
  EXPECT_THROW(measure_pfa(c, {8, 6, 0}, {DetectorKind::KELLY}, {1.0}, 0.1), InvalidModel);
}

TEST(CfarPd, NullInjectionAndSaturation) {
  const RangeTimeCube c = synthetic_cube(10, 50, ClutterModel{}, 7);
  const WindowConfig cfg{8, 12, 0};
  Scenario sc;
  sc.k = 12;
  const auto eta = thresholds_of(calibrate(kAdaptive, sc, 0.1, 2000, 8));
  const auto pfa = measure_pfa(c, cfg, kAdaptive, eta, 0.1);
  const auto pd =
      measure_pd_injected(c, cfg, kAdaptive, eta, {-std::numeric_limits<double>::infinity(), 40.0, 60.0, 80.0}, 9);
  const std::size_t nd = kAdaptive.size();
  for (std::size_t d = 0; d < nd; ++d) {
    const DetectorKind k = kAdaptive[d];
    EXPECT_EQ(pd[d].detections, pfa.entries[d].exceedances) << detector_name(k);
    EXPECT_GE(pd[nd + d].pd, 0.95) << detector_name(k);
    if (k == DetectorKind::SS_RAO || k == DetectorKind::C_RAO) {
      // For large |a| the Rao statistics tend to 1 / (1 + d), d the whitened
      // energy of the noise orthogonal to v, so Pd levels off below 1.
      EXPECT_EQ(pd[2 * nd + d].detections, pd[3 * nd + d].detections) << detector_name(k);
    } else {
      EXPECT_EQ(pd[2 * nd + d].pd, 1.0) << detector_name(k);
    }
  }
  // seeded phases are reproducible, fixed phase is too
  const auto again = measure_pd_injected(c, cfg, kAdaptive, eta, {10.0}, 9);
  const auto other = measure_pd_injected(c, cfg, kAdaptive, eta, {10.0}, 9, {}, {.phase = 0.3, .use_known_m0 = false});
  EXPECT_EQ(again[1].detections, measure_pd_injected(c, cfg, kAdaptive, eta, {10.0}, 9)[1].detections);
  EXPECT_EQ(other[1].detections,
            measure_pd_injected(c, cfg, kAdaptive, eta, {10.0}, 123, {}, {.phase = 0.3, .use_known_m0 = false})[1].detections);
  EXPECT_THROW(measure_pd_injected(c, cfg, kAdaptive, eta, {10.0}, 9, {}, {.phase = {}, .use_known_m0 = true}), InvalidModel);
}

TEST(CfarPd, SyntheticCubeMatchesMonteCarlo) {
  // One N-sample window in time gives windows that each follow the scenario
  // model; with known M0 and a fixed phase the injected Pd estimates the same
  // quantity as pd_sweep.
  ClutterModel m;
  const std::size_t n = 8, k = 12;
  Scenario sc;
  sc.clutter = m;
  sc.k = k;
  const std::vector<DetectorKind> kinds{DetectorKind::SS_AMF, DetectorKind::I_GLRT, DetectorKind::KELLY};
  const auto eta = thresholds_of(calibrate(kinds, sc, 0.05, 4000, 10));
  const RangeTimeCube c = synthetic_cube(n, 2012, m, 11);
  CfarOptions opt;
  opt.known_m0 = clutter_covariance(m).entries();
  const std::vector<double> grid{6.0, 10.0};
  const auto cf = measure_pd_injected(c, {n, k, 0}, kinds, eta, grid, 12, opt, {.phase = sc.phase, .use_known_m0 = true});
  const auto mc = pd_sweep(kinds, eta, sc, grid, 4000, 13);
  ASSERT_EQ(cf.size(), mc.size());
  for (std::size_t i = 0; i < cf.size(); ++i) {
    ASSERT_EQ(cf[i].detector, mc[i].detector);
    // overlapping training sets make the cube estimates correlated, so
    // compare with the sum of the two half-widths
    const double tol = (cf[i].ci95.hi - cf[i].ci95.lo) / 2 + (mc[i].ci95.hi - mc[i].ci95.lo) / 2;
    EXPECT_NEAR(cf[i].pd, mc[i].pd, tol) << detector_name(cf[i].detector) << " at " << cf[i].sinr_db;
  }
}

TEST(Synthetic, WhiteCubeStatistics) {
  const RangeTimeCube c = synthetic_cube(4, 20000, ClutterModel::white(4, 2.0), 14);
  double p = 0, re_im = 0;
  for (const auto& x : c.data) {
    p += std::norm(x);
    re_im += x.real() * x.imag();
  }
  p /= static_cast<double>(c.data.size());
  re_im /= static_cast<double>(c.data.size());
  EXPECT_NEAR(p, 2.0, 0.03);
  EXPECT_NEAR(re_im, 0.0, 0.02);
  EXPECT_EQ(synthetic_cube(4, 5, ClutterModel{}, 1), synthetic_cube(4, 5, ClutterModel{}, 1));
}
