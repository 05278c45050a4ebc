// Sliding-window CFAR on a synthetic clutter cube: false-alarm rate on the
// raw cube, then Pd with injected targets.

#include <cstdio>
#include <iostream>

#include "ssdet/cfar.hpp"

using namespace ssdet;

int main() {
  const std::size_t n = 8, k = 16;
  ClutterModel clutter;  // rho_c 0.9, CNR 20 dB
  clutter.n = 40;
  const RangeTimeCube cube = synthetic_cube(40, 400, clutter, 7);
  const WindowConfig wc{n, k, 1};
  const std::vector<DetectorKind> kinds{DetectorKind::SS_AMF, DetectorKind::I_GLRT, DetectorKind::KELLY,
                                        DetectorKind::AMF};

  Scenario sc;
  sc.clutter = ClutterModel::white(n);
  sc.k = k;
  std::vector<double> th;
  for (const auto& c : calibrate(kinds, sc, 1e-2, 20000, 7)) th.push_back(c.threshold);

  const CfarPfaReport rep = measure_pfa(cube, wc, kinds, th, 1e-2);
  std::printf("%zu windows\n", rep.windows);
  for (const auto& e : rep.entries)
    std::printf("%-8s pfa %.4f  ci [%.4f, %.4f]\n", std::string(detector_name(e.detector)).c_str(), e.pfa,
                e.ci.lo, e.ci.hi);

  const auto pts = measure_pd_injected(cube, wc, kinds, th, {5.0, 10.0, 15.0, 20.0}, 7);
  write_pd_csv(std::cout, pts);
}
