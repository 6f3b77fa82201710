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

#ifndef NLSIM_RESOURCES_HPP
#define NLSIM_RESOURCES_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "nlsim/geom.hpp"
#include "nlsim/rng.hpp"

namespace nlsim::resources {

struct BitPair {
  int a;
  int b;
};

/// PR box: binary inputs x, y and binary outputs with a XOR b = x AND y.
/// The shared coin makes each output individually uniform and independent
/// of both inputs, so neither side can signal.
inline BitPair pr_box(int x, int y, int coin) {
  if ((x != 0 && x != 1) || (y != 0 && y != 1))
    throw std::invalid_argument("pr_box: inputs must be bits");
  if (coin != 0 && coin != 1)
    throw std::invalid_argument("pr_box: coin must be a bit");
  return {coin, coin ^ (x & y)};
}

/// Orientation of the M box comparison predicate. `corrected` encodes
/// [x > y] in m XOR n, so the two outputs agree exactly when x <= y;
/// `literal` encodes [x <= y]. Ties use "<= true / > false" under both,
/// which makes the tie case orientation independent downstream.
enum class MboxConvention { corrected, literal };

/// M box (millionaire box): two real inputs in [0, 1], binary outputs whose
/// XOR encodes the configured comparison predicate. Outputs are
/// symmetrized by the shared coin, so marginals are uniform.
inline BitPair m_box(double x, double y, int coin,
                     MboxConvention convention = MboxConvention::corrected) {
  if (!(x >= 0.0 && x <= 1.0) || !(y >= 0.0 && y <= 1.0))
    throw std::domain_error("m_box: inputs must lie in [0, 1]");
  if (coin != 0 && coin != 1)
    throw std::invalid_argument("m_box: coin must be a bit");
  const int predicate =
      (convention == MboxConvention::corrected) ? (x > y ? 1 : 0) : (x <= y ? 1 : 0);
  return {coin, coin ^ predicate};
}

/// The randomness both parties hold before a run: five sphere vectors for
/// the carrier sign bits, two candidate sphere vectors for the sign step,
/// the fixed reference vector c_hat, one flip threshold coordinate, and one
/// coin per box.
struct SharedBundle {
  std::array<geom::Carrier4, 5> mu;
  geom::Carrier4 lambda0;
  geom::Carrier4 lambda1;
  geom::Carrier4 c_hat;
  double r_flip;
  int coin_m;
  int coin_pr;
};

/// Draws a fresh bundle. The draw order is fixed (mu1..mu5, lambda0,
/// lambda1, r_flip, coin_m, coin_pr) so a seeded stream reproduces the
/// identical bundle. c_hat is configuration, not a per-run draw; it is
/// copied through unchanged.
inline SharedBundle draw_bundle(RngStream& rng, const geom::Carrier4& c_hat) {
  if (std::abs(c_hat.euclidean_norm - 1.0) > geom::kUnitNormTol)
    throw std::invalid_argument("draw_bundle: c_hat must be a unit vector");
  std::array<geom::Carrier4, 5> mu{
      geom::sample_uniform_carrier(rng), geom::sample_uniform_carrier(rng),
      geom::sample_uniform_carrier(rng), geom::sample_uniform_carrier(rng),
      geom::sample_uniform_carrier(rng)};
  geom::Carrier4 lambda0 = geom::sample_uniform_carrier(rng);
  geom::Carrier4 lambda1 = geom::sample_uniform_carrier(rng);
  const double r_flip = rng.uniform01();
  const int coin_m = rng.coin_bit();
  const int coin_pr = rng.coin_bit();
  return {mu, lambda0, lambda1, c_hat, r_flip, coin_m, coin_pr};
}

enum class RunMode { strict, ideal, resample, baseline };

inline const char* run_mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::strict: return "strict";
    case RunMode::ideal: return "ideal";
    case RunMode::resample: return "resample";
    case RunMode::baseline: return "baseline";
  }
  return "unknown";
}

enum class ResourceLabel : std::uint8_t {
  pr_box = 0,
  m_box = 1,
  mu_vector = 2,
  lambda_shared = 3,
  flip_coordinate = 4,
  box_coin = 5,
  cbit = 6,
};

inline constexpr std::size_t kResourceLabelCount = 7;

inline const char* resource_label_name(ResourceLabel label) {
  switch (label) {
    case ResourceLabel::pr_box: return "pr_box";
    case ResourceLabel::m_box: return "m_box";
    case ResourceLabel::mu_vector: return "mu_vector";
    case ResourceLabel::lambda_shared: return "lambda_shared";
    case ResourceLabel::flip_coordinate: return "flip_coordinate";
    case ResourceLabel::box_coin: return "box_coin";
    case ResourceLabel::cbit: return "cbit";
  }
  return "unknown";
}

/// Convention flags a transcript can carry.
enum class TranscriptNote : std::uint8_t {
  literal_ab_convention = 0,
  literal_mbox_convention = 1,
  // The sign step consumed a locally produced biased sample as if it were
  // shared; such a run is diagnostic, not resource honest.
  shared_bias_sample = 2,
  // The selected candidate index was broadcast (counted in cbits).
  index_broadcast = 3,
};

class TranscriptError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Per-run record of resource consumption. Counters accumulate while the
/// run is open; close() checks the mode's resource contract and rejects
/// any further recording.
class RunTranscript {
 public:
  explicit RunTranscript(RunMode mode) : mode_(mode) {}

  void record_use(ResourceLabel label, std::uint32_t count = 1) {
    if (closed_) throw TranscriptError("record_use: transcript already closed");
    counts_[static_cast<std::size_t>(label)] += count;
  }

  void add_note(TranscriptNote note) {
    if (closed_) throw TranscriptError("add_note: transcript already closed");
    notes_ |= static_cast<std::uint16_t>(1u << static_cast<unsigned>(note));
  }

  bool has_note(TranscriptNote note) const {
    return (notes_ & (1u << static_cast<unsigned>(note))) != 0;
  }

  std::uint32_t uses(ResourceLabel label) const {
    return counts_[static_cast<std::size_t>(label)];
  }

  std::uint32_t pr_box_uses() const { return uses(ResourceLabel::pr_box); }
  std::uint32_t m_box_uses() const { return uses(ResourceLabel::m_box); }
  std::uint32_t cbits() const { return uses(ResourceLabel::cbit); }

  std::uint32_t shared_sphere_draws() const {
    return uses(ResourceLabel::mu_vector) + uses(ResourceLabel::lambda_shared);
  }

  RunMode mode() const { return mode_; }
  bool closed() const { return closed_; }

  /// Validates the mode's resource contract and seals the transcript.
  void close() {
    if (closed_) throw TranscriptError("close: transcript already closed");
    closed_ = true;
    switch (mode_) {
      case RunMode::strict:
        require(pr_box_uses() == 1 && m_box_uses() == 1,
                "strict run must use exactly one PR box and one M box");
        break;
      case RunMode::ideal:
        require(pr_box_uses() == 0 && m_box_uses() == 1,
                "ideal run must use one M box and no PR box");
        break;
      case RunMode::resample:
        require(pr_box_uses() == 0 && m_box_uses() == 1 && cbits() >= 1,
                "resample run must use one M box, no PR box, and broadcast an index");
        break;
      case RunMode::baseline:
        require(pr_box_uses() == 1 && m_box_uses() == 0,
                "baseline run must use exactly one PR box and no M box");
        break;
    }
  }

 private:
  void require(bool ok, const char* what) const {
    if (!ok)
      throw TranscriptError(std::string("transcript contract violated: ") + what);
  }

  RunMode mode_;
  std::array<std::uint32_t, kResourceLabelCount> counts_{};
  std::uint16_t notes_ = 0;
  bool closed_ = false;
};

}  // namespace nlsim::resources

#endif  // NLSIM_RESOURCES_HPP
