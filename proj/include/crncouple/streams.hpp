#pragma once

// Reproducible randomness for coupled path simulation.
//
// Every stream is addressed by a StreamKey and generated by Philox4x32-10 in
// counter mode: the master seed is the Philox key and the remaining key fields
// plus a block index form the 128-bit counter.  Distinct keys therefore never
// share a counter, and any draw can be produced without touching the others.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace crncouple {

namespace detail {

inline constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
inline constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
inline constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

}  // namespace detail

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds (Salmon et al., SC'11).
constexpr PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) noexcept {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{detail::kPhiloxM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{detail::kPhiloxM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += detail::kPhiloxW0;
    key[1] += detail::kPhiloxW1;
  }
  return ctr;
}

enum class StreamRole : std::uint8_t {
  single = 0,
  single_z,
  crn_holding,
  crn_uniform,
  crp_channel,
  split_shared,
  split_x_only,
  split_z_only,
  init,
};

struct StreamKey {
  std::uint64_t master_seed = 0;
  std::uint32_t path_index = 0;
  StreamRole role = StreamRole::single;
  std::uint32_t channel = 0;  // < 2^24
  std::uint32_t partition_index = 0;

  friend bool operator==(const StreamKey&, const StreamKey&) = default;
};

inline constexpr std::uint32_t kMaxStreamChannel = (1u << 24) - 1;

// Index-addressable U[0,1) draws.  Draw i is stable regardless of the order
// in which draws are requested; the cache only avoids recomputing blocks.
class UniformStream {
 public:
  explicit UniformStream(const StreamKey& key) : key_(key) {
    if (key.channel > kMaxStreamChannel) {
      throw std::out_of_range("stream channel index exceeds 24 bits");
    }
  }

  const StreamKey& key() const noexcept { return key_; }

  double uniform_at(std::size_t index) {
    extend_to(index + 1);
    return draws_[index];
  }

  // Open-interval variant (0,1): used where a logarithm follows.
  static double to_open_unit(double u) noexcept {
    return u + 0x1.0p-54;
  }

  std::size_t cached() const noexcept { return draws_.size(); }

 private:
  static double bits_to_unit(std::uint32_t hi, std::uint32_t lo) noexcept {
    const std::uint64_t bits = (std::uint64_t{hi} << 32) | lo;
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  void extend_to(std::size_t n) {
    while (draws_.size() < n) {
      const std::size_t block = draws_.size() / 2;
      if (block > std::numeric_limits<std::uint32_t>::max()) {
        throw std::length_error("uniform stream exhausted");
      }
      const PhiloxKey k{static_cast<std::uint32_t>(key_.master_seed),
                        static_cast<std::uint32_t>(key_.master_seed >> 32)};
      const PhiloxCounter c{
          key_.path_index,
          (static_cast<std::uint32_t>(key_.role) << 24) | key_.channel,
          key_.partition_index, static_cast<std::uint32_t>(block)};
      const PhiloxCounter out = philox4x32(c, k);
      draws_.push_back(bits_to_unit(out[0], out[1]));
      draws_.push_back(bits_to_unit(out[2], out[3]));
    }
  }

  StreamKey key_;
  std::vector<double> draws_;
};

// Unit-rate Poisson process realization.  Epochs are cumulative sums of
// Exp(1) gaps drawn from a UniformStream with the same key.  The epoch cache
// is append-only, so readers at different internal times observe one
// realization.
class PoissonStream {
 public:
  explicit PoissonStream(const StreamKey& key) : uniforms_(key) {}

  const StreamKey& key() const noexcept { return uniforms_.key(); }

  // i-th epoch, zero-based.
  double epoch(std::size_t i) {
    while (epochs_.size() <= i) {
      const double u = UniformStream::to_open_unit(uniforms_.uniform_at(epochs_.size()));
      const double gap = -std::log(u);
      const double prev = epochs_.empty() ? 0.0 : epochs_.back();
      double next = prev + gap;
      if (!(next > prev)) next = std::nextafter(prev, std::numeric_limits<double>::infinity());
      epochs_.push_back(next);
    }
    return epochs_[i];
  }

  // Smallest epoch strictly greater than t_internal.
  double next_epoch_after(double t_internal) {
    if (t_internal < 0.0) {
      throw std::invalid_argument("internal time must be nonnegative");
    }
    while (epochs_.empty() || epochs_.back() <= t_internal) {
      epoch(epochs_.size());
    }
    return *std::upper_bound(epochs_.begin(), epochs_.end(), t_internal);
  }

  // Number of epochs <= t_internal.
  std::size_t count_through(double t_internal) {
    next_epoch_after(std::max(t_internal, 0.0));
    return static_cast<std::size_t>(
        std::upper_bound(epochs_.begin(), epochs_.end(), t_internal) - epochs_.begin());
  }

  std::size_t cached() const noexcept { return epochs_.size(); }

 private:
  UniformStream uniforms_;
  std::vector<double> epochs_;
};

inline PoissonStream derive_poisson_stream(const StreamKey& key) { return PoissonStream(key); }
inline UniformStream derive_uniform_stream(const StreamKey& key) { return UniformStream(key); }

}  // namespace crncouple
