#pragma once

#include <array>
#include <cstdint>

namespace pocr {

// xoshiro256** with splitmix64 seeding. The stdlib engines are avoided here
// because checkpoints must carry the generator state as a fixed-width blob
// and std::normal_distribution keeps hidden state that does not round-trip.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent stream derived from (seed, stream); used for per-sample and
  // per-tensor determinism regardless of evaluation order.
  static Rng for_stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal via the polar method (no cached spare, so the state
  // below is the complete generator state).
  double normal();
  double normal(double mean, double stddev);

  std::array<std::uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<std::uint64_t, 4>& s) { s_ = s; }

 private:
  std::array<std::uint64_t, 4> s_{};
};

std::uint64_t splitmix64(std::uint64_t& x);

// FNV-1a over a byte string; used to derive per-name parameter seeds.
std::uint64_t fnv1a64(const void* data, std::size_t len);

}  // namespace pocr
