#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

namespace rangekit {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Default counter resolution of DW3000-class UWB transceivers.
inline constexpr double kDefaultTickSeconds = 15.65e-12;

// Device timestamp counters are 40-bit and wrap; durations are recovered
// by modular differencing, valid for spans below 2^40 ticks (~17 s at the
// default tick).
inline constexpr int kTickBits = 40;
inline constexpr std::uint64_t kTickModulus = 1ull << kTickBits;
inline constexpr std::uint64_t kTickMask = kTickModulus - 1;

inline std::uint64_t wrap_ticks(std::uint64_t raw) { return raw & kTickMask; }

// (a - b) mod 2^40; correct when the true span is below the modulus.
inline std::uint64_t tick_diff(std::uint64_t a, std::uint64_t b) {
  return (a - b) & kTickMask;
}

// Free-running device clock: frequency error in ppm against true time,
// an arbitrary counter offset, and the counter resolution.
struct ClockModel {
  std::int64_t offset_ticks = 0;
  double skew_ppm = 0.0;
  double tick_seconds = kDefaultTickSeconds;

  static constexpr double kMaxSkewPpm = 100.0;

  double rate() const { return 1.0 + skew_ppm * 1e-6; }

  void validate() const {
    if (!(tick_seconds > 0.0))
      throw std::invalid_argument("ClockModel: tick_seconds must be > 0");
    if (!(std::abs(skew_ppm) <= kMaxSkewPpm))
      throw std::invalid_argument("ClockModel: |skew_ppm| must be <= 100");
  }

  // Counter reading for a true time, before wrapping. Exact integer
  // arithmetic in double holds up to 2^53 ticks (~39 h at default tick).
  double ticks_real(double true_time_s) const {
    return true_time_s * rate() / tick_seconds;
  }

  std::uint64_t stamp(double true_time_s) const {
    // llround to a signed count first: negative epochs wrap modularly.
    const std::int64_t count = std::llround(ticks_real(true_time_s));
    return wrap_ticks(static_cast<std::uint64_t>(count) +
                      static_cast<std::uint64_t>(offset_ticks));
  }

  // True duration of a delay programmed in device ticks.
  double true_seconds_for_ticks(std::uint64_t ticks) const {
    return static_cast<double>(ticks) * tick_seconds / rate();
  }
};

// The six DS-TWR timestamps. Ownership is fixed by the protocol roles:
// the initiator records tx_poll, rx_resp, tx_final; the responder records
// rx_poll, tx_resp, rx_final. Each value lives in its owner's clock domain.
struct TimestampSet {
  std::uint64_t tx_poll = 0;   // initiator
  std::uint64_t rx_poll = 0;   // responder
  std::uint64_t tx_resp = 0;   // responder
  std::uint64_t rx_resp = 0;   // initiator
  std::uint64_t tx_final = 0;  // initiator
  std::uint64_t rx_final = 0;  // responder
  bool has_final = true;       // false for single-sided exchanges

  std::uint64_t round1_ticks() const { return tick_diff(rx_resp, tx_poll); }
  std::uint64_t reply1_ticks() const { return tick_diff(tx_resp, rx_poll); }
  std::uint64_t round2_ticks() const { return tick_diff(rx_final, tx_resp); }
  std::uint64_t reply2_ticks() const { return tick_diff(tx_final, rx_resp); }
};

enum class FailReason {
  None,
  Overflow,
  DegenerateExchange,
  StsMismatch,
  ChannelFail,
};

inline const char* to_string(FailReason reason) {
  switch (reason) {
    case FailReason::None: return "none";
    case FailReason::Overflow: return "overflow";
    case FailReason::DegenerateExchange: return "degenerate-exchange";
    case FailReason::StsMismatch: return "sts-mismatch";
    case FailReason::ChannelFail: return "channel-fail";
  }
  return "unknown";
}

// Distance on success (meters = tof_seconds * c), failure reason otherwise.
struct RangingOutcome {
  std::optional<double> distance_m;
  std::optional<double> tof_seconds;
  std::optional<TimestampSet> raw;
  FailReason fail = FailReason::None;

  bool ok() const { return distance_m.has_value(); }

  static RangingOutcome from_tof(double tof_s,
                                 std::optional<TimestampSet> ts = {}) {
    RangingOutcome out;
    out.tof_seconds = tof_s;
    out.distance_m = tof_s * kSpeedOfLight;
    out.raw = std::move(ts);
    return out;
  }

  static RangingOutcome failed(FailReason reason,
                               std::optional<TimestampSet> ts = {}) {
    RangingOutcome out;
    out.fail = reason;
    out.raw = std::move(ts);
    return out;
  }
};

enum class RangingMode { DsTwr, SsTwr };

struct ExchangeConfig {
  RangingMode mode = RangingMode::DsTwr;
  std::uint64_t responder_reply_ticks = 1000;
  std::uint64_t initiator_reply_ticks = 1000;
  std::optional<int> channel;        // metadata
  std::optional<int> preamble_code;  // metadata
  double start_time_s = 0.0;

  void validate() const {
    if (responder_reply_ticks == 0 || initiator_reply_ticks == 0)
      throw std::invalid_argument("ExchangeConfig: reply delays must be > 0");
    if (channel && *channel != 5 && *channel != 6 && *channel != 8 &&
        *channel != 9)
      throw std::invalid_argument("ExchangeConfig: channel must be 5, 6, 8 or 9");
  }
};

// Extra one-way path delay per message, on top of the true time of flight.
struct MessageDelays {
  double poll_s = 0.0;
  double response_s = 0.0;
  double final_s = 0.0;
};

struct ExchangeResult {
  std::optional<TimestampSet> timestamps;
  FailReason fail = FailReason::None;

  bool ok() const { return timestamps.has_value(); }
};

namespace detail {

// Ticks are exact integers in double only below 2^53.
inline constexpr double kMaxRepresentableTicks = 9007199254740992.0;  // 2^53

inline bool stampable(const ClockModel& clock, double t) {
  return std::abs(clock.ticks_real(t)) < kMaxRepresentableTicks;
}

inline bool duration_fits(const ClockModel& clock, double dur_s) {
  return dur_s * clock.rate() / clock.tick_seconds <
         static_cast<double>(kTickModulus);
}

}  // namespace detail

// Advance both device clocks through a poll/response/final exchange and
// record the six timestamps each side would capture. Reply delays are
// scheduled on the owning device's tick grid; every timestamp is the true
// event time read through the owning clock (offset, skew, quantization).
inline ExchangeResult run_exchange(const ClockModel& initiator,
                                   const ClockModel& responder,
                                   double true_tof_seconds,
                                   const ExchangeConfig& cfg = {},
                                   const MessageDelays& delays = {}) {
  initiator.validate();
  responder.validate();
  cfg.validate();
  if (!(true_tof_seconds >= 0.0))
    throw std::invalid_argument("run_exchange: time of flight must be >= 0");

  const auto overflow = [] {
    return ExchangeResult{std::nullopt, FailReason::Overflow};
  };
  if (cfg.responder_reply_ticks >= kTickModulus ||
      cfg.initiator_reply_ticks >= kTickModulus)
    return overflow();

  const double t_tx_poll = cfg.start_time_s;
  const double t_rx_poll = t_tx_poll + true_tof_seconds + delays.poll_s;
  const double t_tx_resp =
      t_rx_poll + responder.true_seconds_for_ticks(cfg.responder_reply_ticks);
  const double t_rx_resp = t_tx_resp + true_tof_seconds + delays.response_s;
  const double t_tx_final =
      t_rx_resp + initiator.true_seconds_for_ticks(cfg.initiator_reply_ticks);
  const double t_rx_final = t_tx_final + true_tof_seconds + delays.final_s;

  for (double t : {t_tx_poll, t_rx_poll, t_tx_resp, t_rx_resp, t_tx_final,
                   t_rx_final}) {
    if (!detail::stampable(initiator, t) || !detail::stampable(responder, t))
      return overflow();
  }
  // The four differenced durations must stay below the counter modulus.
  if (!detail::duration_fits(initiator, t_rx_resp - t_tx_poll) ||
      !detail::duration_fits(responder, t_tx_resp - t_rx_poll) ||
      !detail::duration_fits(responder, t_rx_final - t_tx_resp) ||
      !detail::duration_fits(initiator, t_tx_final - t_rx_resp))
    return overflow();

  TimestampSet ts;
  ts.tx_poll = initiator.stamp(t_tx_poll);
  ts.rx_poll = responder.stamp(t_rx_poll);
  ts.tx_resp = responder.stamp(t_tx_resp);
  ts.rx_resp = initiator.stamp(t_rx_resp);
  if (cfg.mode == RangingMode::DsTwr) {
    ts.tx_final = initiator.stamp(t_tx_final);
    ts.rx_final = responder.stamp(t_rx_final);
  } else {
    ts.has_final = false;
  }
  return ExchangeResult{ts, FailReason::None};
}

struct TickRates {
  double initiator = kDefaultTickSeconds;
  double responder = kDefaultTickSeconds;
};

// Double-sided estimator:
//
//   tof = (Tround1 * Tround2 - Treply1 * Treply2)
//         / (Tround1 + Tround2 + Treply1 + Treply2)
//
// with every duration converted to seconds in its owner's clock domain
// first. The reply-sum denominator is the form whose symmetric-cancellation
// identity ((2T+R)^2 - R^2 = 4T(T+R)) recovers the time of flight and
// cancels clock drift to second order; a round-only denominator sometimes
// seen in print fails even the zero-reply case.
inline RangingOutcome ds_twr_distance(const TimestampSet& ts,
                                      const TickRates& ticks = {}) {
  if (!ts.has_final)
    return RangingOutcome::failed(FailReason::DegenerateExchange, ts);
  const double round1 = static_cast<double>(ts.round1_ticks()) * ticks.initiator;
  const double reply1 = static_cast<double>(ts.reply1_ticks()) * ticks.responder;
  const double round2 = static_cast<double>(ts.round2_ticks()) * ticks.responder;
  const double reply2 = static_cast<double>(ts.reply2_ticks()) * ticks.initiator;

  const double denom = round1 + round2 + reply1 + reply2;
  if (!(denom > 0.0))
    return RangingOutcome::failed(FailReason::DegenerateExchange, ts);
  const double tof = (round1 * round2 - reply1 * reply2) / denom;
  return RangingOutcome::from_tof(tof, ts);
}

// Single-sided estimator: tof = (Tround1 - Treply1) / 2. Kept as the
// drift-sensitive baseline; its first-order error is
// skew_delta * Treply / 2 * c.
inline RangingOutcome ss_twr_distance(const TimestampSet& ts,
                                      const TickRates& ticks = {}) {
  const double round1 = static_cast<double>(ts.round1_ticks()) * ticks.initiator;
  const double reply1 = static_cast<double>(ts.reply1_ticks()) * ticks.responder;
  if (round1 < reply1)
    return RangingOutcome::failed(FailReason::DegenerateExchange, ts);
  return RangingOutcome::from_tof((round1 - reply1) / 2.0, ts);
}

}  // namespace rangekit
