#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rangekit/ranging.hpp"
#include "rangekit/rng.hpp"
#include "rangekit/sts.hpp"

namespace rangekit {

// Unlock policy: act only on the mean of a full sliding window of valid
// measurements, never on a single reading. Negative readings are dropped
// from the window but still feed the attack detector, which suspends the
// session when several strongly negative values show up close together or
// the window mean jumps implausibly between cycles.
struct PkePolicy {
  int window = 10;
  int min_cycles = 10;  // valid ranging cycles required before any unlock
  double unlock_threshold_m = 0.50;
  double negative_floor_m = 0.0;   // below this a reading is discarded
  double attack_negative_m = -1.0;  // at or below this a reading is suspicious
  int attack_count_k = 3;
  int attack_lookback = 30;
  double fluctuation_bound_m = 1.0;  // max window-mean jump per cycle

  void validate() const {
    if (window < 1) throw std::invalid_argument("PkePolicy: window must be >= 1");
    if (min_cycles < 1)
      throw std::invalid_argument("PkePolicy: min_cycles must be >= 1");
    if (attack_count_k < 1)
      throw std::invalid_argument("PkePolicy: attack_count_k must be >= 1");
    if (attack_lookback < 1)
      throw std::invalid_argument("PkePolicy: attack_lookback must be >= 1");
    if (!(attack_negative_m < negative_floor_m &&
          negative_floor_m < unlock_threshold_m))
      throw std::invalid_argument(
          "PkePolicy: thresholds must satisfy attack_negative < negative_floor < unlock_threshold");
    if (!(fluctuation_bound_m > 0.0))
      throw std::invalid_argument("PkePolicy: fluctuation_bound_m must be > 0");
  }
};

enum class PkePhase { Collecting, Ready, Unlocked, Suspended };

inline const char* to_string(PkePhase phase) {
  switch (phase) {
    case PkePhase::Collecting: return "collecting";
    case PkePhase::Ready: return "ready";
    case PkePhase::Unlocked: return "unlocked";
    case PkePhase::Suspended: return "suspended";
  }
  return "unknown";
}

enum class PkeAction { NoAction, Unlock, Suspend };

enum class PkeReason {
  None,
  WindowNotFull,
  MeanAboveThreshold,
  NegativeDropped,
  MeasurementFailed,
  AttackSuspected,
  Fluctuation,
  AlreadySuspended,
  AlreadyUnlocked,
};

inline const char* to_string(PkeReason reason) {
  switch (reason) {
    case PkeReason::None: return "none";
    case PkeReason::WindowNotFull: return "window-not-full";
    case PkeReason::MeanAboveThreshold: return "mean-above-threshold";
    case PkeReason::NegativeDropped: return "negative-dropped";
    case PkeReason::MeasurementFailed: return "measurement-failed";
    case PkeReason::AttackSuspected: return "attack-suspected";
    case PkeReason::Fluctuation: return "fluctuation";
    case PkeReason::AlreadySuspended: return "already-suspended";
    case PkeReason::AlreadyUnlocked: return "already-unlocked";
  }
  return "unknown";
}

struct PkeDecision {
  PkeAction action = PkeAction::NoAction;
  PkeReason reason = PkeReason::None;
};

// Per-session state. Suspension is absorbing until reset().
class PkeSessionState {
 public:
  PkePhase phase() const { return phase_; }
  const std::deque<double>& valid_window() const { return window_; }
  std::size_t valid_count() const { return valid_count_; }

  std::optional<double> window_mean(const PkePolicy& policy) const {
    if (static_cast<int>(window_.size()) < policy.window) return std::nullopt;
    return std::accumulate(window_.begin(), window_.end(), 0.0) /
           static_cast<double>(window_.size());
  }

  void reset() { *this = PkeSessionState(); }

 private:
  friend PkeDecision ingest(PkeSessionState&, const PkePolicy&,
                            const RangingOutcome&);

  PkePhase phase_ = PkePhase::Collecting;
  std::deque<double> window_;
  std::deque<std::optional<double>> raw_history_;
  std::size_t valid_count_ = 0;
  std::optional<double> prev_full_mean_;
};

inline PkeDecision ingest(PkeSessionState& state, const PkePolicy& policy,
                          const RangingOutcome& outcome) {
  policy.validate();
  if (state.phase_ == PkePhase::Suspended)
    return {PkeAction::NoAction, PkeReason::AlreadySuspended};

  state.raw_history_.push_back(outcome.ok() ? outcome.distance_m : std::nullopt);
  while (static_cast<int>(state.raw_history_.size()) > policy.attack_lookback)
    state.raw_history_.pop_front();

  // Negative values are dropped from the window below, but they still count
  // here: several strongly negative readings close together look like an
  // early-path attack.
  const auto suspicious =
      std::count_if(state.raw_history_.begin(), state.raw_history_.end(),
                    [&](const std::optional<double>& d) {
                      return d.has_value() && *d <= policy.attack_negative_m;
                    });
  if (suspicious >= policy.attack_count_k) {
    state.phase_ = PkePhase::Suspended;
    return {PkeAction::Suspend, PkeReason::AttackSuspected};
  }

  if (!outcome.ok()) return {PkeAction::NoAction, PkeReason::MeasurementFailed};
  const double distance = *outcome.distance_m;
  if (distance < policy.negative_floor_m)
    return {PkeAction::NoAction, PkeReason::NegativeDropped};

  state.window_.push_back(distance);
  while (static_cast<int>(state.window_.size()) > policy.window)
    state.window_.pop_front();
  ++state.valid_count_;

  if (static_cast<int>(state.window_.size()) < policy.window)
    return {PkeAction::NoAction, PkeReason::WindowNotFull};

  const double mean = *state.window_mean(policy);
  const std::optional<double> prev = state.prev_full_mean_;
  state.prev_full_mean_ = mean;
  if (prev && std::abs(mean - *prev) > policy.fluctuation_bound_m) {
    state.phase_ = PkePhase::Suspended;
    return {PkeAction::Suspend, PkeReason::Fluctuation};
  }

  if (state.phase_ == PkePhase::Collecting) state.phase_ = PkePhase::Ready;
  if (state.phase_ == PkePhase::Unlocked)
    return {PkeAction::NoAction, PkeReason::AlreadyUnlocked};

  if (state.valid_count_ >= static_cast<std::size_t>(policy.min_cycles) &&
      mean < policy.unlock_threshold_m) {
    state.phase_ = PkePhase::Unlocked;
    return {PkeAction::Unlock, PkeReason::None};
  }
  return {PkeAction::NoAction, PkeReason::MeanAboveThreshold};
}

// One simulated ranging cycle of an entry scenario.
struct TranscriptEvent {
  int cycle = 0;
  std::optional<double> raw_m;  // absent on a failed measurement
  PkePhase phase = PkePhase::Collecting;
  PkeAction action = PkeAction::NoAction;
  PkeReason reason = PkeReason::None;
};

struct Transcript {
  PkePolicy policy;
  std::uint64_t seed = 0;
  std::vector<TranscriptEvent> events;
  int unlock_count = 0;
  int suspend_count = 0;
  std::optional<int> first_unlock_cycle;
  int rejected_frames = 0;  // injected frames discarded by sequence check
};

// Distance-over-time walk with a simple noise model; the attacker, when
// present, acts the way the corresponding channel-level model does.
struct EntryScenario {
  std::vector<double> walk_m;  // true distance per ranging cycle
  double bias_m = 0.0;
  double sigma_m = 0.0;
  double p_fail = 0.0;
  std::optional<AttackerModel> attacker;
  PkePolicy policy;
  std::uint64_t seed = 0;
};

inline Transcript simulate_entry_scenario(const EntryScenario& scenario) {
  scenario.policy.validate();
  if (scenario.walk_m.empty())
    throw std::invalid_argument("simulate_entry_scenario: walk must not be empty");

  Transcript transcript;
  transcript.policy = scenario.policy;
  transcript.seed = scenario.seed;

  Rng rng(scenario.seed);
  StsKey key;
  for (auto& byte : key.key) byte = static_cast<std::uint8_t>(rng.next_u64() & 0xff);
  StsSession session(key);
  PkeSessionState state;

  for (std::size_t i = 0; i < scenario.walk_m.size(); ++i) {
    const double true_d = scenario.walk_m[i];

    if (scenario.attacker &&
        scenario.attacker->kind == AttackKind::PreambleInjection) {
      Frame forged = make_injected_frame(rng);
      if (!session.validate(forged).accepted) ++transcript.rejected_frames;
    }
    Frame frame = session.make_frame(FrameKind::Poll);
    const bool frame_ok = session.validate(frame).accepted;

    RangingOutcome outcome;
    if (!frame_ok || rng.bernoulli(scenario.p_fail)) {
      outcome = RangingOutcome::failed(FailReason::ChannelFail);
    } else {
      const double measured =
          true_d + scenario.bias_m + rng.normal(0.0, scenario.sigma_m);
      outcome = RangingOutcome::from_tof(measured / kSpeedOfLight);
      if (scenario.attacker) {
        if (scenario.attacker->kind == AttackKind::GhostPeak)
          outcome = apply_ghost_peak(rng, *scenario.attacker, outcome);
        else if (scenario.attacker->kind == AttackKind::Cicada)
          outcome = apply_cicada(rng, *scenario.attacker, outcome);
      }
    }

    const PkeDecision decision = ingest(state, scenario.policy, outcome);
    TranscriptEvent event;
    event.cycle = static_cast<int>(i);
    event.raw_m = outcome.ok() ? outcome.distance_m : std::nullopt;
    event.phase = state.phase();
    event.action = decision.action;
    event.reason = decision.reason;
    if (decision.action == PkeAction::Unlock) {
      ++transcript.unlock_count;
      if (!transcript.first_unlock_cycle) transcript.first_unlock_cycle = event.cycle;
    }
    if (decision.action == PkeAction::Suspend) ++transcript.suspend_count;
    transcript.events.push_back(event);
  }
  return transcript;
}

// JSON-lines export: a header object with the policy, then one line per
// cycle: {t, raw, state, decision}.
inline std::string transcript_to_jsonl(const Transcript& transcript) {
  nlohmann::json header{
      {"policy",
       {{"window", transcript.policy.window},
        {"min_cycles", transcript.policy.min_cycles},
        {"unlock_threshold_m", transcript.policy.unlock_threshold_m},
        {"negative_floor_m", transcript.policy.negative_floor_m},
        {"attack_negative_m", transcript.policy.attack_negative_m},
        {"attack_count_k", transcript.policy.attack_count_k},
        {"attack_lookback", transcript.policy.attack_lookback},
        {"fluctuation_bound_m", transcript.policy.fluctuation_bound_m}}},
      {"seed", transcript.seed},
      {"unlocks", transcript.unlock_count},
      {"suspends", transcript.suspend_count},
      {"rejected_frames", transcript.rejected_frames},
  };
  std::string out = header.dump() + "\n";
  for (const auto& event : transcript.events) {
    nlohmann::json line{
        {"t", event.cycle},
        {"raw", event.raw_m ? nlohmann::json(*event.raw_m) : nlohmann::json(nullptr)},
        {"state", to_string(event.phase)},
        {"decision", event.action == PkeAction::Unlock     ? "unlock"
                     : event.action == PkeAction::Suspend  ? "suspend"
                                                           : "no-action"},
        {"reason", to_string(event.reason)},
    };
    out += line.dump() + "\n";
  }
  return out;
}

}  // namespace rangekit
