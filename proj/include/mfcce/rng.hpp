#pragma once

// Counter-based random streams.
//
// Every random quantity in the library is a pure function of
// (master seed, replication, player, purpose, counter). A stream key is
// derived by chaining the SplitMix64 step over the first four values; the
// n-th uniform of a stream is the SplitMix64 finalizer applied to
// key + (n + 1) * 0x9E3779B97F4A7C15. Results therefore do not depend on
// the order in which replications are scheduled or on the worker count.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace mfcce {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 output function.
constexpr std::uint64_t splitmix_finalize(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// One SplitMix64 step: advance by the golden gamma, then finalize.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  return splitmix_finalize(z + kGoldenGamma);
}

/// What a stream is used for. Distinct purposes never share draws.
enum class StreamPurpose : std::uint64_t {
  noise = 1,
  initial_state = 2,
  scenario = 3,
  recommendation = 4,
  probe = 5,
  pilot = 6,
};

constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t replication,
                                   std::uint64_t player, StreamPurpose purpose) noexcept {
  std::uint64_t k = mix64(seed ^ (static_cast<std::uint64_t>(purpose) * 0xD1B54A32D192ED03ULL));
  k = mix64(k ^ replication);
  k = mix64(k ^ (player * 0xA0761D6478BD642FULL));
  return k;
}

/// Random-access uniform/normal stream. Copyable, no hidden global state.
class CounterStream {
 public:
  constexpr CounterStream() = default;
  constexpr explicit CounterStream(std::uint64_t key) : key_(key) {}
  CounterStream(std::uint64_t seed, std::uint64_t replication, std::uint64_t player,
                StreamPurpose purpose)
      : key_(stream_key(seed, replication, player, purpose)) {}

  constexpr std::uint64_t key() const noexcept { return key_; }

  constexpr std::uint64_t bits_at(std::uint64_t counter) const noexcept {
    return splitmix_finalize(key_ + (counter + 1) * kGoldenGamma);
  }

  /// Uniform in the open interval (0, 1).
  double uniform_at(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits_at(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal; index i uses uniforms 2*(i/2) and 2*(i/2)+1 (Box-Muller pair).
  double normal_at(std::uint64_t index) const noexcept {
    const std::uint64_t pair = index / 2;
    const double r = std::sqrt(-2.0 * std::log(uniform_at(2 * pair)));
    const double angle = 2.0 * std::numbers::pi * uniform_at(2 * pair + 1);
    return (index % 2 == 0) ? r * std::cos(angle) : r * std::sin(angle);
  }

  // Sequential interface.
  double next_uniform() noexcept { return uniform_at(counter_++); }

  double next_normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_at(counter_)));
    const double angle = 2.0 * std::numbers::pi * uniform_at(counter_ + 1);
    counter_ += 2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Brownian motion on a time grid, sampled terminal value first.
///
/// W_T uses normals 0..dim-1 of the stream; each later grid point is drawn
/// from the Brownian bridge towards W_T. W_T is thus independent of the
/// number of steps, and refining the grid leaves terminal values unchanged.
class BrownianBridgeSampler {
 public:
  BrownianBridgeSampler(CounterStream stream, std::size_t dim, double horizon)
      : stream_(stream), dim_(dim), horizon_(horizon) {}

  /// Fills `w` (size (steps+1)*dim, step-major) with the path at `times`.
  void fill(std::span<const double> times, std::span<double> w) const {
    const std::size_t n = times.size();
    for (std::size_t c = 0; c < dim_; ++c) {
      const double w_end = std::sqrt(horizon_) * stream_.normal_at(c);
      w[c] = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        const double prev = w[k * dim_ + c];
        if (k + 2 == n) {
          w[(k + 1) * dim_ + c] = w_end;
          break;
        }
        const double remaining = horizon_ - times[k];
        const double step = times[k + 1] - times[k];
        const double mean = prev + (step / remaining) * (w_end - prev);
        const double var = step * (horizon_ - times[k + 1]) / remaining;
        w[(k + 1) * dim_ + c] = mean + std::sqrt(var) * stream_.normal_at((k + 1) * dim_ + c);
      }
    }
  }

 private:
  CounterStream stream_;
  std::size_t dim_;
  double horizon_;
};

}  // namespace mfcce
