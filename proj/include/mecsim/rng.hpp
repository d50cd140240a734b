#pragma once

#include <cmath>
#include <cstdint>

namespace mecsim {

// Purpose tags for deriving independent substreams from one master seed.
// A stream id is a pure function of (master, kind, index), so regenerating
// any one stream never disturbs the others.
enum class StreamKind : std::uint64_t {
  wd_arrivals = 1,
  wd_channel = 2,
  wd_shadow = 3,
  wd_placement = 4,
  wd_policy = 5,
  wd_bank = 6,
  server_bank = 7,
  sweep_cell = 8,
  misc = 9,
};

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Stream id = three splitmix64 rounds over (master, kind, index).
inline std::uint64_t derive_stream_id(std::uint64_t master, StreamKind kind,
                                      std::uint64_t index = 0) {
  std::uint64_t s = master;
  splitmix64_next(s);
  s ^= static_cast<std::uint64_t>(kind) * 0xD1342543DE82EF95ull;
  splitmix64_next(s);
  s ^= index * 0x2545F4914F6CDD1Dull;
  return splitmix64_next(s);
}

/// splitmix64 stream with inversion-method samplers.
///
/// Bernoulli draws compare one uniform against p, so realizations are
/// monotone-coupled across p for a fixed stream state.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Unit-mean exponential via inversion; never returns inf.
  double exponential() { return -std::log1p(-uniform01()); }

  /// Standard normal (Box-Muller, no cached spare).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_ = 0x853C49E6748FEA9Bull;
};

}  // namespace mecsim
