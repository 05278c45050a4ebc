#pragma once

#include <cstdint>
#include <random>

namespace ssdet {

// SplitMix64 finalizer; used only to derive independent engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream domains keep calibration, Pd and injection draws disjoint even when
// they reuse the same master seed.
enum class StreamDomain : std::uint64_t {
  Calibration = 1,
  Detection = 2,
  Injection = 3,
  Estimation = 4,
  Cube = 5,
  Test = 6,
};

// One reproducible random stream per (master seed, domain, block, trial).
// A trial's draws depend only on these four numbers, never on which worker
// runs it or in what order.
class TrialStream {
 public:
  TrialStream(std::uint64_t master, StreamDomain domain, std::uint64_t block, std::uint64_t trial)
      : engine_(derive(master, domain, block, trial)) {}

  TrialStream(std::uint64_t master, std::uint64_t trial)
      : TrialStream(master, StreamDomain::Test, 0, trial) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  std::mt19937_64& engine() noexcept { return engine_; }

  static std::uint64_t derive(std::uint64_t master, StreamDomain domain, std::uint64_t block,
                              std::uint64_t trial) noexcept {
    std::uint64_t h = mix64(master);
    h = mix64(h ^ static_cast<std::uint64_t>(domain));
    h = mix64(h ^ block);
    return mix64(h ^ trial);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace ssdet
