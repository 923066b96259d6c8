#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace decaf {

// Purpose tags for deriving independent streams from one run seed. Streams
// never depend on algorithm name or thread count, only on (seed, tag, index),
// which is what makes replay and cross-algorithm trajectory comparisons work.
enum class StreamTag : std::uint64_t {
  data = 1,       // task / dataset generation
  init = 2,       // per-agent adapter initialization
  batch = 3,      // per-agent mini-batch sampling
  shared_a0 = 4,  // the one A0 shared by frozen-A variants
  probe = 5,      // constants estimation probes
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, StreamTag tag, std::uint64_t index = 0);

// Deterministic random stream. Gaussian draws use Box-Muller on raw 64-bit
// output so the draw sequence is fully pinned by this code, not by the
// standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t base, StreamTag tag, std::uint64_t index = 0)
      : engine_(derive_seed(base, tag, index)) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform();

  // unbiased uniform integer in [0, bound)
  std::uint64_t uniform_below(std::uint64_t bound);

  double gaussian();  // standard normal
  double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

  // ascending uniform without-replacement sample of `count` indices from [0, n)
  std::vector<int> sample_without_replacement(int n, int count);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace decaf
