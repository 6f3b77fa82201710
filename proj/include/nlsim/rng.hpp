// Copyright 2026 The nlsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NLSIM_RNG_HPP
#define NLSIM_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace nlsim {

/// Deterministic random stream with hierarchically derived substreams.
///
/// The core generator is xoshiro256++. A stream's identity is a 64-bit key
/// obtained by hashing the master seed and the chain of substream labels, so
/// the same (master seed, label path) always replays the same sequence and
/// distinct labels start from unrelated states. Substream derivation uses
/// only the identity key, never consumed generator state.
///
/// All floating-point draws are produced from raw 64-bit words with fixed
/// algorithms (no std::*_distribution), which keeps sequences identical
/// across standard library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed) {
    std::uint64_t x = master_seed ^ kDomainTag;
    init(splitmix_next(x));
  }

  /// Independent stream addressed by (this stream's identity, label).
  RngStream substream(std::uint64_t label) const {
    std::uint64_t x = label ^ kLabelTag;
    std::uint64_t y = key_ ^ splitmix_next(x);
    RngStream child{no_init{}};
    child.init(splitmix_next(y));
    return child;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 significant bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Single fair bit.
  int coin_bit() { return static_cast<int>(next_u64() >> 63); }

  /// Standard normal deviate via the Marsaglia polar method. Values are
  /// produced in pairs; the spare is cached on the stream.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform01() - 1.0;
      v = 2.0 * uniform01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  std::uint64_t key() const { return key_; }

 private:
  struct no_init {};
  explicit RngStream(no_init) {}

  static constexpr std::uint64_t kDomainTag = 0x6e6c73696d2d7631ULL;
  static constexpr std::uint64_t kLabelTag = 0xa0761d6478bd642fULL;

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  // splitmix64: advances x and returns the finalized output.
  static std::uint64_t splitmix_next(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  void init(std::uint64_t key) {
    key_ = key;
    std::uint64_t x = key;
    for (auto& s : state_) s = splitmix_next(x);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    has_spare_ = false;
    spare_ = 0.0;
  }

  std::uint64_t key_ = 0;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nlsim

#endif  // NLSIM_RNG_HPP
