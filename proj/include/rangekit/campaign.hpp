#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rangekit/channel.hpp"
#include "rangekit/ranging.hpp"
#include "rangekit/rng.hpp"
#include "rangekit/sts.hpp"
#include "rangekit/zip.hpp"

namespace rangekit {

class SourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RecordingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepPlan {
  double theta_start_deg = 0.0;
  double theta_end_deg = 350.0;
  double theta_step_deg = 10.0;
  double phi_start_deg = 0.0;
  double phi_end_deg = 180.0;
  double phi_step_deg = 10.0;
  int samples_per_position = 10;
  double position_timeout_s = 30.0;
  // Simulated duration of one ranging attempt; ten attempts stay under 2 s.
  double exchange_duration_s = 0.15;

  void validate() const {
    const auto check_axis = [](double start, double end, double step,
                               const char* axis) {
      if (!(step > 0.0))
        throw std::invalid_argument(std::string("SweepPlan: ") + axis +
                                    " step must be > 0");
      if (end < start)
        throw std::invalid_argument(std::string("SweepPlan: ") + axis +
                                    " range is inverted");
      const double k = (end - start) / step;
      if (std::abs(k - std::round(k)) > 1e-9)
        throw std::invalid_argument(std::string("SweepPlan: ") + axis +
                                    " step must divide the range");
    };
    check_axis(theta_start_deg, theta_end_deg, theta_step_deg, "theta");
    check_axis(phi_start_deg, phi_end_deg, phi_step_deg, "phi");
    if (samples_per_position < 1)
      throw std::invalid_argument("SweepPlan: samples_per_position must be >= 1");
    if (!(position_timeout_s > 0.0))
      throw std::invalid_argument("SweepPlan: position_timeout_s must be > 0");
    if (!(exchange_duration_s > 0.0))
      throw std::invalid_argument("SweepPlan: exchange_duration_s must be > 0");
    Position{theta_start_deg, phi_start_deg}.validate();
    Position{theta_end_deg, phi_end_deg}.validate();
  }

  int theta_count() const {
    return 1 + static_cast<int>(std::llround((theta_end_deg - theta_start_deg) /
                                             theta_step_deg));
  }
  int phi_count() const {
    return 1 + static_cast<int>(std::llround((phi_end_deg - phi_start_deg) /
                                             phi_step_deg));
  }

  friend bool operator==(const SweepPlan&, const SweepPlan&) = default;
};

// Serpentine sweep: the arm runs 0 -> 180, the base advances one step, the
// arm runs back 180 -> 0, and so on until the base has covered its range.
// Every grid point appears exactly once and consecutive positions differ by
// one step on exactly one axis.
inline std::vector<Position> generate_sweep(const SweepPlan& plan) {
  plan.validate();
  std::vector<Position> sweep;
  const int thetas = plan.theta_count();
  const int phis = plan.phi_count();
  sweep.reserve(static_cast<std::size_t>(thetas) * phis);
  for (int ti = 0; ti < thetas; ++ti) {
    const double theta = plan.theta_start_deg + ti * plan.theta_step_deg;
    for (int pj = 0; pj < phis; ++pj) {
      const int j = (ti % 2 == 0) ? pj : phis - 1 - pj;
      sweep.push_back(Position{theta, plan.phi_start_deg + j * plan.phi_step_deg});
    }
  }
  return sweep;
}

struct Sample {
  double distance_m = 0.0;
  double t_s = 0.0;  // seconds since the position's collection started

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct PositionSamples {
  Position position;
  std::vector<Sample> samples;

  friend bool operator==(const PositionSamples&, const PositionSamples&) = default;
};

struct RecordingSettings {
  SweepPlan plan;
  std::string device;
  std::string remote;
  std::string environment;
  double true_distance_m = 0.0;
  std::string source_name;
  std::uint64_t seed = 0;
  bool complete = true;

  friend bool operator==(const RecordingSettings&, const RecordingSettings&) = default;
};

// Campaign output: the settings that produced it plus every sample keyed by
// position, in sweep order. Positions that produced nothing keep an empty
// list so failure statistics have their denominator.
struct Recording {
  RecordingSettings settings;
  std::vector<PositionSamples> data;
  std::optional<std::string> log;

  friend bool operator==(const Recording&, const Recording&) = default;

  const PositionSamples* find(const Position& pos) const {
    for (const auto& entry : data)
      if (entry.position == pos) return &entry;
    return nullptr;
  }
};

inline constexpr int kRecordingSchemaVersion = 1;

inline nlohmann::json recording_to_json(const Recording& rec) {
  nlohmann::json plan{
      {"theta_start_deg", rec.settings.plan.theta_start_deg},
      {"theta_end_deg", rec.settings.plan.theta_end_deg},
      {"theta_step_deg", rec.settings.plan.theta_step_deg},
      {"phi_start_deg", rec.settings.plan.phi_start_deg},
      {"phi_end_deg", rec.settings.plan.phi_end_deg},
      {"phi_step_deg", rec.settings.plan.phi_step_deg},
      {"samples_per_position", rec.settings.plan.samples_per_position},
      {"position_timeout_s", rec.settings.plan.position_timeout_s},
      {"exchange_duration_s", rec.settings.plan.exchange_duration_s},
  };
  nlohmann::json data = nlohmann::json::array();
  for (const auto& entry : rec.data) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : entry.samples)
      samples.push_back({{"d_m", s.distance_m}, {"t_s", s.t_s}});
    data.push_back({{"theta", entry.position.theta_deg},
                    {"phi", entry.position.phi_deg},
                    {"samples", std::move(samples)}});
  }
  return nlohmann::json{
      {"schema", kRecordingSchemaVersion},
      {"settings",
       {{"plan", std::move(plan)},
        {"device", rec.settings.device},
        {"remote", rec.settings.remote},
        {"environment", rec.settings.environment},
        {"true_distance_m", rec.settings.true_distance_m},
        {"source", rec.settings.source_name},
        {"seed", rec.settings.seed},
        {"complete", rec.settings.complete}}},
      {"data", std::move(data)},
  };
}

inline Recording recording_from_json(const nlohmann::json& doc) {
  try {
    if (doc.value("schema", 0) != kRecordingSchemaVersion)
      throw RecordingError("unsupported recording schema version");
    Recording rec;
    const auto& settings = doc.at("settings");
    const auto& plan = settings.at("plan");
    rec.settings.plan.theta_start_deg = plan.at("theta_start_deg").get<double>();
    rec.settings.plan.theta_end_deg = plan.at("theta_end_deg").get<double>();
    rec.settings.plan.theta_step_deg = plan.at("theta_step_deg").get<double>();
    rec.settings.plan.phi_start_deg = plan.at("phi_start_deg").get<double>();
    rec.settings.plan.phi_end_deg = plan.at("phi_end_deg").get<double>();
    rec.settings.plan.phi_step_deg = plan.at("phi_step_deg").get<double>();
    rec.settings.plan.samples_per_position =
        plan.at("samples_per_position").get<int>();
    rec.settings.plan.position_timeout_s =
        plan.at("position_timeout_s").get<double>();
    rec.settings.plan.exchange_duration_s =
        plan.at("exchange_duration_s").get<double>();
    rec.settings.device = settings.at("device").get<std::string>();
    rec.settings.remote = settings.at("remote").get<std::string>();
    rec.settings.environment = settings.at("environment").get<std::string>();
    rec.settings.true_distance_m = settings.at("true_distance_m").get<double>();
    rec.settings.source_name = settings.at("source").get<std::string>();
    rec.settings.seed = settings.at("seed").get<std::uint64_t>();
    rec.settings.complete = settings.at("complete").get<bool>();
    for (const auto& entry : doc.at("data")) {
      PositionSamples ps;
      ps.position =
          Position{entry.at("theta").get<double>(), entry.at("phi").get<double>()};
      for (const auto& s : entry.at("samples"))
        ps.samples.push_back(
            Sample{s.at("d_m").get<double>(), s.at("t_s").get<double>()});
      rec.data.push_back(std::move(ps));
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw RecordingError(std::string("malformed recording.json: ") + e.what());
  }
}

inline void save_recording(const Recording& rec, const std::filesystem::path& path) {
  ArchiveEntries entries;
  entries.emplace_back("recording.json", recording_to_json(rec).dump(2) + "\n");
  if (rec.log) entries.emplace_back("log.txt", *rec.log);
  write_zip_file(path, entries);
}

inline Recording load_recording(const std::filesystem::path& path) {
  ArchiveEntries entries;
  try {
    entries = read_zip_file(path);
  } catch (const ArchiveError& e) {
    throw RecordingError(std::string("unreadable recording archive: ") + e.what());
  }
  const std::string* json_text = nullptr;
  const std::string* log_text = nullptr;
  for (const auto& [name, data] : entries) {
    if (name == "recording.json") json_text = &data;
    if (name == "log.txt") log_text = &data;
  }
  if (json_text == nullptr) throw RecordingError("recording.json absent from archive");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(*json_text);
  } catch (const nlohmann::json::exception& e) {
    throw RecordingError(std::string("recording.json is not valid JSON: ") + e.what());
  }
  Recording rec = recording_from_json(doc);
  if (log_text) rec.log = *log_text;
  return rec;
}

struct SessionConfig {
  std::string device;
  std::string remote;
  std::string environment;
  double true_distance_m = 0.0;
  std::uint64_t seed = 0;
  double exchange_duration_s = 0.15;
};

// A measurement source pluggable into the campaign loop. Implementations
// must never return more than max_samples and must respect the timeout in
// their own notion of time.
class Source {
 public:
  virtual ~Source() = default;
  virtual std::string name() const = 0;
  virtual void start_session(const SessionConfig& config) = 0;
  virtual std::vector<Sample> collect(const Position& pos, int max_samples,
                                      double timeout_s) = 0;
};

// Full software device: the channel profile decides whether an attempt
// succeeds and what path distance it sees, then a tick-level two-way-ranging
// exchange with sequence-validated frames produces the reported distance.
class SimulatedDevice : public Source {
 public:
  explicit SimulatedDevice(const DeviceProfileSet& profiles,
                           std::optional<AttackerModel> attacker = {})
      : profiles_(&profiles), attacker_(std::move(attacker)) {
    // Mild, fixed clock imperfections; double-sided ranging cancels them.
    initiator_clock_.skew_ppm = 3.1;
    initiator_clock_.offset_ticks = 120450;
    responder_clock_.skew_ppm = -4.7;
    responder_clock_.offset_ticks = -98321;
  }

  std::string name() const override { return "simulated"; }

  void start_session(const SessionConfig& config) override {
    profile_ = profiles_->find(config.device, config.environment,
                               config.true_distance_m);
    if (profile_ == nullptr)
      throw ProfileError("no profile cell for device '" + config.device +
                         "', environment '" + config.environment + "', distance " +
                         std::to_string(config.true_distance_m) + " m");
    config_ = config;
    StsKey key;
    Rng key_rng(config.seed ^ 0x5753u);
    for (auto& byte : key.key)
      byte = static_cast<std::uint8_t>(key_rng.next_u64() & 0xff);
    session_ = StsSession(key);
  }

  std::vector<Sample> collect(const Position& pos, int max_samples,
                              double timeout_s) override {
    if (profile_ == nullptr) throw SourceError("collect before start_session");
    Rng rng = Rng(config_.seed).derive(static_cast<std::uint64_t>(pos.key()));
    std::vector<Sample> out;
    double now = 0.0;
    while (static_cast<int>(out.size()) < max_samples &&
           now + config_.exchange_duration_s <= timeout_s) {
      now += config_.exchange_duration_s;
      const std::optional<double> channel_d = sample_measurement(*profile_, pos, rng);
      if (!channel_d) continue;
      const std::optional<double> reported = run_ranging_cycle(*channel_d, rng);
      if (!reported) continue;
      out.push_back(Sample{*reported, now});
    }
    return out;
  }

 private:
  std::optional<double> run_ranging_cycle(double channel_distance_m, Rng& rng) {
    // Frames flow with the session key; an injection attacker contributes
    // frames that fail validation and are dropped without effect.
    if (attacker_ && attacker_->kind == AttackKind::PreambleInjection) {
      Frame forged = make_injected_frame(rng);
      if (session_->validate(forged).accepted) return std::nullopt;  // unreachable
    }
    for (FrameKind kind : {FrameKind::Poll, FrameKind::Response, FrameKind::Final}) {
      Frame frame = session_->make_frame(kind);
      if (!session_->validate(frame).accepted) return std::nullopt;
    }

    const double tof = std::max(channel_distance_m, 0.0) / kSpeedOfLight;
    ExchangeConfig cfg;
    cfg.responder_reply_ticks = 32000000;  // ~0.5 ms
    cfg.initiator_reply_ticks = 44800000;  // ~0.7 ms
    const ExchangeResult exchange =
        run_exchange(initiator_clock_, responder_clock_, tof, cfg);
    if (!exchange.ok()) return std::nullopt;
    RangingOutcome outcome = ds_twr_distance(
        *exchange.timestamps,
        TickRates{initiator_clock_.tick_seconds, responder_clock_.tick_seconds});
    if (!outcome.ok()) return std::nullopt;
    // Early-path reductions live below zero flight time; reattach them.
    const double negative_part = std::min(channel_distance_m, 0.0);
    outcome.distance_m = *outcome.distance_m + negative_part;

    if (attacker_) {
      if (attacker_->kind == AttackKind::GhostPeak)
        outcome = apply_ghost_peak(rng, *attacker_, outcome);
      else if (attacker_->kind == AttackKind::Cicada)
        outcome = apply_cicada(rng, *attacker_, outcome);
      if (!outcome.ok()) return std::nullopt;
    }
    return outcome.distance_m;
  }

  const DeviceProfileSet* profiles_;
  const EnvironmentProfile* profile_ = nullptr;
  std::optional<AttackerModel> attacker_;
  std::optional<StsSession> session_;
  SessionConfig config_;
  ClockModel initiator_clock_;
  ClockModel responder_clock_;
};

// Byte-stream transport for external line-protocol devices. Tests use an
// in-memory fake; hardware uses a file-descriptor implementation.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void write_line(const std::string& line) = 0;
  // Blocks up to timeout_s; nullopt on timeout or closed stream.
  virtual std::optional<std::string> read_line(double timeout_s) = 0;
};

// Controller side of the serial protocol:
//   controller:  RNG <n>\n
//   device:      n lines of "D <meters>\n" or "F <reason>\n", then "OK\n"
class SerialDevice : public Source {
 public:
  explicit SerialDevice(LineTransport& transport) : transport_(&transport) {}

  std::string name() const override { return "serial"; }

  void start_session(const SessionConfig& config) override { config_ = config; }

  std::vector<Sample> collect(const Position&, int max_samples,
                              double timeout_s) override {
    transport_->write_line("RNG " + std::to_string(max_samples));
    std::vector<Sample> out;
    int attempts = 0;
    while (true) {
      const std::optional<std::string> line = transport_->read_line(timeout_s);
      if (!line) break;  // timeout: keep what we have
      if (*line == "OK") break;
      ++attempts;
      std::istringstream fields(*line);
      std::string tag;
      fields >> tag;
      if (tag == "D") {
        double meters = 0.0;
        if (!(fields >> meters))
          throw SourceError("serial protocol: malformed distance line '" + *line + "'");
        if (static_cast<int>(out.size()) < max_samples)
          out.push_back(Sample{meters, attempts * config_.exchange_duration_s});
      } else if (tag == "F") {
        continue;  // failed attempt, nothing stored
      } else {
        throw SourceError("serial protocol: unexpected line '" + *line + "'");
      }
    }
    return out;
  }

 private:
  LineTransport* transport_;
  SessionConfig config_;
};

// Replays an existing recording position by position.
class Replay : public Source {
 public:
  explicit Replay(Recording rec) : rec_(std::move(rec)) {}

  std::string name() const override { return "replay"; }

  void start_session(const SessionConfig&) override {}

  std::vector<Sample> collect(const Position& pos, int max_samples,
                              double) override {
    const PositionSamples* entry = rec_.find(pos);
    if (entry == nullptr) return {};
    std::vector<Sample> out = entry->samples;
    if (static_cast<int>(out.size()) > max_samples)
      out.resize(static_cast<std::size_t>(max_samples));
    return out;
  }

 private:
  Recording rec_;
};

struct CampaignSpec {
  SweepPlan plan;
  std::string device;
  std::string remote;
  std::string environment;
  double true_distance_m = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::filesystem::path partial_path(const std::filesystem::path& out) {
  std::filesystem::path p = out;
  p += ".partial";
  return p;
}

// Checkpoints are written to a sibling temp file and renamed into place, so
// a crash mid-write can never leave a truncated checkpoint behind.
inline void save_checkpoint(const Recording& rec,
                            const std::filesystem::path& checkpoint) {
  std::filesystem::path tmp = checkpoint;
  tmp += ".tmp";
  save_recording(rec, tmp);
  std::filesystem::rename(tmp, checkpoint);
}

}  // namespace detail

// Drive the source through the sweep and persist the recording. Progress is
// checkpointed to <output>.partial as the sweep advances (and always on a
// source error), so an interrupted run resumes from the last checkpointed
// position; because every position draws from its own derived random stream,
// the resumed recording is byte-identical to an uninterrupted one. On a
// source error the partial recording is kept, marked incomplete, and the
// error is rethrown.
inline Recording run_campaign(const CampaignSpec& spec, Source& source,
                              const std::filesystem::path& output_path,
                              int checkpoint_every = 16) {
  spec.plan.validate();
  const std::vector<Position> sweep = generate_sweep(spec.plan);

  Recording rec;
  rec.settings.plan = spec.plan;
  rec.settings.device = spec.device;
  rec.settings.remote = spec.remote.empty() ? spec.device : spec.remote;
  rec.settings.environment = spec.environment;
  rec.settings.true_distance_m = spec.true_distance_m;
  rec.settings.source_name = source.name();
  rec.settings.seed = spec.seed;
  rec.settings.complete = false;

  const std::filesystem::path checkpoint = detail::partial_path(output_path);
  std::size_t done = 0;
  if (std::filesystem::exists(checkpoint)) {
    // An unreadable or mismatched checkpoint is discarded, not fatal.
    try {
      Recording partial = load_recording(checkpoint);
      if (partial.settings == rec.settings && partial.data.size() <= sweep.size()) {
        bool aligned = true;
        for (std::size_t i = 0; i < partial.data.size(); ++i)
          aligned = aligned && partial.data[i].position == sweep[i];
        if (aligned) {
          rec = std::move(partial);
          done = rec.data.size();
        }
      }
    } catch (const RecordingError&) {
    }
  }

  SessionConfig session;
  session.device = spec.device;
  session.remote = rec.settings.remote;
  session.environment = spec.environment;
  session.true_distance_m = spec.true_distance_m;
  session.seed = spec.seed;
  session.exchange_duration_s = spec.plan.exchange_duration_s;
  source.start_session(session);

  if (checkpoint_every < 1) checkpoint_every = 1;
  for (std::size_t i = done; i < sweep.size(); ++i) {
    PositionSamples entry;
    entry.position = sweep[i];
    try {
      entry.samples = source.collect(sweep[i], spec.plan.samples_per_position,
                                     spec.plan.position_timeout_s);
    } catch (...) {
      detail::save_checkpoint(rec, checkpoint);
      throw;
    }
    rec.data.push_back(std::move(entry));
    if (rec.data.size() % static_cast<std::size_t>(checkpoint_every) == 0)
      detail::save_checkpoint(rec, checkpoint);
  }

  rec.settings.complete = true;
  save_recording(rec, output_path);
  std::error_code ignored;
  std::filesystem::remove(checkpoint, ignored);
  return rec;
}

}  // namespace rangekit
