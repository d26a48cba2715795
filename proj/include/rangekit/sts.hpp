#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rangekit/ranging.hpp"
#include "rangekit/rng.hpp"

namespace rangekit {

// Scrambled timestamp sequences: each frame carries a keyed pseudo-random
// pulse sequence derived from a shared secret and a per-frame counter, so a
// receiver can discard any frame whose sequence it did not expect.

inline constexpr std::size_t kDefaultStsBits = 4096;

namespace detail {

// ChaCha20 block function, 128-bit key variant ("expand 16-byte k").
// Used purely as a deterministic keyed PRF: block index and frame counter
// select the output block.
inline void chacha20_block(const std::array<std::uint8_t, 16>& key,
                           std::uint64_t block_counter, std::uint64_t nonce,
                           std::uint8_t out[64]) {
  const auto load32 = [](const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
  };
  std::uint32_t state[16];
  state[0] = 0x61707865u;  // "expa"
  state[1] = 0x3120646eu;  // "nd 1"
  state[2] = 0x79622d36u;  // "6-by"
  state[3] = 0x6b206574u;  // "te k"
  for (int i = 0; i < 4; ++i) {
    state[4 + i] = load32(key.data() + 4 * i);
    state[8 + i] = load32(key.data() + 4 * i);  // key repeated
  }
  state[12] = static_cast<std::uint32_t>(block_counter);
  state[13] = static_cast<std::uint32_t>(block_counter >> 32);
  state[14] = static_cast<std::uint32_t>(nonce);
  state[15] = static_cast<std::uint32_t>(nonce >> 32);

  std::uint32_t x[16];
  std::memcpy(x, state, sizeof(x));
  const auto rotl = [](std::uint32_t v, int n) {
    return (v << n) | (v >> (32 - n));
  };
  const auto quarter = [&](int a, int b, int c, int d) {
    x[a] += x[b]; x[d] ^= x[a]; x[d] = rotl(x[d], 16);
    x[c] += x[d]; x[b] ^= x[c]; x[b] = rotl(x[b], 12);
    x[a] += x[b]; x[d] ^= x[a]; x[d] = rotl(x[d], 8);
    x[c] += x[d]; x[b] ^= x[c]; x[b] = rotl(x[b], 7);
  };
  for (int round = 0; round < 10; ++round) {
    quarter(0, 4, 8, 12);
    quarter(1, 5, 9, 13);
    quarter(2, 6, 10, 14);
    quarter(3, 7, 11, 15);
    quarter(0, 5, 10, 15);
    quarter(1, 6, 11, 12);
    quarter(2, 7, 8, 13);
    quarter(3, 4, 9, 14);
  }
  for (int i = 0; i < 16; ++i) {
    const std::uint32_t word = x[i] + state[i];
    out[4 * i + 0] = static_cast<std::uint8_t>(word);
    out[4 * i + 1] = static_cast<std::uint8_t>(word >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(word >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(word >> 24);
  }
}

}  // namespace detail

struct StsKey {
  std::array<std::uint8_t, 16> key{};
  std::uint64_t counter = 0;
};

using StsBits = std::vector<std::uint8_t>;  // packed, LSB-first within bytes

// Deterministic expansion of (key, counter) into the pulse sequence.
inline StsBits generate_sts(const StsKey& key,
                            std::size_t bits = kDefaultStsBits) {
  if (bits == 0 || bits % 8 != 0)
    throw std::invalid_argument("generate_sts: bit length must be a positive multiple of 8");
  StsBits out(bits / 8);
  std::uint8_t block[64];
  for (std::size_t offset = 0; offset < out.size(); offset += 64) {
    detail::chacha20_block(key.key, offset / 64, key.counter, block);
    const std::size_t n = std::min<std::size_t>(64, out.size() - offset);
    std::memcpy(out.data() + offset, block, n);
  }
  return out;
}

inline std::size_t hamming_distance_bits(const StsBits& a, const StsBits& b) {
  std::size_t bits = 0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i)
    bits += static_cast<std::size_t>(__builtin_popcount(a[i] ^ b[i]));
  return bits;
}

enum class FrameOrigin { Legitimate, Attacker };
enum class FrameKind { Poll, Response, Final, Report };

// Payload fields a ranging message may carry alongside its sequence.
struct FramePayload {
  std::optional<std::uint64_t> round_ticks;
  std::optional<std::uint64_t> reply_ticks;
  std::optional<double> distance_m;
};

struct Frame {
  FrameKind kind = FrameKind::Poll;
  int preamble_code = 11;
  StsBits sts;
  FramePayload payload;
  FrameOrigin origin = FrameOrigin::Legitimate;
};

enum class RejectReason { None, StsLengthMismatch, StsMismatch };

struct ValidationResult {
  bool accepted = false;
  RejectReason reason = RejectReason::None;
};

// Accept iff the frame's sequence equals the expansion of (key, counter).
// A mismatching frame is simply discarded; the preamble is spoofable and
// plays no part in the decision.
inline ValidationResult validate_frame(const Frame& frame, const StsKey& expected,
                                       std::size_t bits = kDefaultStsBits) {
  const StsBits want = generate_sts(expected, bits);
  if (frame.sts.size() != want.size())
    return {false, RejectReason::StsLengthMismatch};
  if (frame.sts != want) return {false, RejectReason::StsMismatch};
  return {true, RejectReason::None};
}

// Receiver-side session: the counter advances only on accepted frames, so a
// replayed frame fails against the advanced expectation.
class StsSession {
 public:
  explicit StsSession(StsKey key, std::size_t bits = kDefaultStsBits)
      : key_(key), bits_(bits) {}

  const StsKey& expected() const { return key_; }

  Frame make_frame(FrameKind kind, FramePayload payload = {},
                   int preamble_code = 11) const {
    Frame f;
    f.kind = kind;
    f.preamble_code = preamble_code;
    f.sts = generate_sts(key_, bits_);
    f.payload = payload;
    f.origin = FrameOrigin::Legitimate;
    return f;
  }

  ValidationResult validate(const Frame& frame) {
    const ValidationResult result = validate_frame(frame, key_, bits_);
    if (result.accepted) ++key_.counter;
    return result;
  }

 private:
  StsKey key_;
  std::size_t bits_;
};

enum class AttackKind { PreambleInjection, GhostPeak, Cicada };

struct AttackerModel {
  AttackKind kind = AttackKind::GhostPeak;
  double ghost_success_prob = 0.05;   // per-exchange Bernoulli
  double reduction_meters = 3.0;      // max distance reduction per success
  bool reduction_fixed = false;       // true: cut exactly reduction_meters
  double distance_floor_m = -3.0;     // attacked result never drops below
  double pulse_interval_s = 1e-3;     // Cicada pulse spacing (metadata)
  double cicada_fail_prob = 0.2;      // extra exchange-failure probability
  double cicada_sigma_m = 0.5;        // symmetric error inflation

  void validate() const {
    if (!(ghost_success_prob >= 0.0 && ghost_success_prob <= 1.0))
      throw std::invalid_argument("AttackerModel: ghost_success_prob must be in [0,1]");
    if (!(cicada_fail_prob >= 0.0 && cicada_fail_prob <= 1.0))
      throw std::invalid_argument("AttackerModel: cicada_fail_prob must be in [0,1]");
    if (!(reduction_meters > 0.0))
      throw std::invalid_argument("AttackerModel: reduction_meters must be > 0");
  }
};

// Frame with a spoofed preamble but a sequence produced without the key.
inline Frame make_injected_frame(Rng& rng, int preamble_code = 11,
                                 std::size_t bits = kDefaultStsBits) {
  Frame f;
  f.kind = FrameKind::Poll;
  f.preamble_code = preamble_code;
  f.sts.resize(bits / 8);
  for (auto& byte : f.sts)
    byte = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  f.origin = FrameOrigin::Attacker;
  return f;
}

// Early-path injection on an otherwise successful exchange: with the model's
// success probability the reported distance shrinks by a uniform draw in
// (0, reduction_meters], clamped at the configured floor.
inline RangingOutcome apply_ghost_peak(Rng& rng, const AttackerModel& model,
                                       const RangingOutcome& honest) {
  model.validate();
  if (!honest.ok())
    throw std::invalid_argument("apply_ghost_peak: outcome must carry a distance");
  const bool hit = rng.bernoulli(model.ghost_success_prob);
  if (!hit) return honest;
  const double cut = model.reduction_fixed ? model.reduction_meters
                                           : rng.uniform(0.0, model.reduction_meters);
  const double reduced =
      std::max(*honest.distance_m - cut, model.distance_floor_m);
  RangingOutcome out = honest;
  out.distance_m = reduced;
  out.tof_seconds = reduced / kSpeedOfLight;
  return out;
}

// Fixed-interval pulse jamming, modeled as extra exchange failures plus
// symmetric error inflation on surviving exchanges.
inline RangingOutcome apply_cicada(Rng& rng, const AttackerModel& model,
                                   const RangingOutcome& honest) {
  model.validate();
  if (!honest.ok()) return honest;
  if (rng.bernoulli(model.cicada_fail_prob))
    return RangingOutcome::failed(FailReason::ChannelFail, honest.raw);
  RangingOutcome out = honest;
  const double d = *honest.distance_m + rng.normal(0.0, model.cicada_sigma_m);
  out.distance_m = d;
  out.tof_seconds = d / kSpeedOfLight;
  return out;
}

}  // namespace rangekit
