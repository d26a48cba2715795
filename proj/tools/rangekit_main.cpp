// uwb-rangekit: ranging simulation campaigns, recording analysis, and
// passive-entry scenario runs from one binary.
//
// Exit codes: 0 success, 2 usage/configuration error, 3 data error,
// 4 policy-triggered stop (--fail-on-suspend).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rangekit/rangekit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitPolicy = 4;

[[noreturn]] void die_config(const std::string& message) {
  std::cerr << "error: " << message << "\n";
  std::exit(kExitConfig);
}

std::string default_profiles_path() {
  if (const char* env = std::getenv("UWB_RANGEKIT_PROFILES"); env && *env)
    return env;
  return "profiles/default.json";
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double parsed = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return parsed;
  } catch (const std::exception&) {
    die_config("invalid number for " + key + ": '" + value + "'");
  }
}

std::pair<std::string, std::string> split_override(const std::string& token) {
  const auto eq = token.find('=');
  if (eq == std::string::npos || eq == 0)
    die_config("override must look like key=value, got '" + token + "'");
  return {token.substr(0, eq), token.substr(eq + 1)};
}

rangekit::SweepPlan plan_from_overrides(const std::vector<std::string>& tokens) {
  rangekit::SweepPlan plan;
  bool theta_end_set = false;
  for (const auto& token : tokens) {
    const auto [key, value] = split_override(token);
    if (key == "theta-start") plan.theta_start_deg = parse_double(key, value);
    else if (key == "theta-end") { plan.theta_end_deg = parse_double(key, value); theta_end_set = true; }
    else if (key == "theta-step") plan.theta_step_deg = parse_double(key, value);
    else if (key == "phi-start") plan.phi_start_deg = parse_double(key, value);
    else if (key == "phi-end") plan.phi_end_deg = parse_double(key, value);
    else if (key == "phi-step") plan.phi_step_deg = parse_double(key, value);
    else if (key == "samples") plan.samples_per_position = static_cast<int>(parse_double(key, value));
    else if (key == "timeout") plan.position_timeout_s = parse_double(key, value);
    else if (key == "exchange-duration") plan.exchange_duration_s = parse_double(key, value);
    else die_config("unknown plan override '" + key + "'");
  }
  // A custom base step keeps full-circle coverage unless the end is pinned.
  if (!theta_end_set && plan.theta_step_deg != 10.0)
    plan.theta_end_deg = 360.0 - plan.theta_step_deg;
  return plan;
}

rangekit::PkePolicy policy_from_overrides(rangekit::PkePolicy policy,
                                          const std::vector<std::string>& tokens) {
  for (const auto& token : tokens) {
    const auto [key, value] = split_override(token);
    if (key == "window") policy.window = static_cast<int>(parse_double(key, value));
    else if (key == "min-cycles") policy.min_cycles = static_cast<int>(parse_double(key, value));
    else if (key == "unlock-threshold") policy.unlock_threshold_m = parse_double(key, value);
    else if (key == "negative-floor") policy.negative_floor_m = parse_double(key, value);
    else if (key == "attack-negative") policy.attack_negative_m = parse_double(key, value);
    else if (key == "attack-count") policy.attack_count_k = static_cast<int>(parse_double(key, value));
    else if (key == "attack-lookback") policy.attack_lookback = static_cast<int>(parse_double(key, value));
    else if (key == "fluctuation-bound") policy.fluctuation_bound_m = parse_double(key, value);
    else die_config("unknown policy override '" + key + "'");
  }
  return policy;
}

int cmd_campaign(const std::string& profiles_path, const std::string& device,
                 const std::string& environment, double distance,
                 const std::vector<std::string>& plan_overrides,
                 std::uint64_t seed, std::string out, bool quiet) {
  rangekit::DeviceProfileSet profiles;
  try {
    profiles = rangekit::load_profiles(profiles_path);
  } catch (const rangekit::ProfileError& e) {
    die_config(e.what());
  }

  if (profiles.find(device, environment, distance) == nullptr) {
    const rangekit::DeviceInfo* info = profiles.device_info(device);
    if (info == nullptr) die_config("unknown device '" + device + "'");
    if (info->max_distance_cap_m && distance > *info->max_distance_cap_m)
      die_config("distance " + std::to_string(distance) +
                 " m is beyond max distance cap (" +
                 std::to_string(*info->max_distance_cap_m) + " m) for " + device);
    die_config("no profile cell for " + device + "/" + environment + "/" +
               std::to_string(distance) + " m");
  }

  rangekit::CampaignSpec spec;
  spec.plan = plan_from_overrides(plan_overrides);
  spec.device = device;
  spec.environment = environment;
  spec.true_distance_m = distance;
  spec.seed = seed;

  if (out.empty()) {
    std::ostringstream name;
    name << device << "_" << environment << "_" << distance << "m_seed" << seed
         << ".zip";
    out = name.str();
  }

  rangekit::SimulatedDevice source(profiles);
  rangekit::Recording rec;
  try {
    rec = rangekit::run_campaign(spec, source, out);
  } catch (const rangekit::SourceError& e) {
    std::cerr << "error: " << e.what() << " (partial recording kept)\n";
    return kExitData;
  }

  std::size_t samples = 0;
  int failed = 0;
  for (const auto& entry : rec.data) {
    samples += entry.samples.size();
    if (static_cast<int>(entry.samples.size()) < spec.plan.samples_per_position)
      ++failed;
  }
  if (!quiet)
    std::cout << "recorded " << rec.data.size() << " positions, " << samples
              << " samples, " << failed << " failed positions -> " << out << "\n";
  return kExitOk;
}

int cmd_analyze(const std::string& recording_path,
                std::optional<double> true_distance, double band,
                std::optional<double> slice_phi, int min_samples,
                std::string out, bool quiet) {
  rangekit::Recording rec;
  try {
    rec = rangekit::load_recording(recording_path);
  } catch (const rangekit::RecordingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }

  const double reference = true_distance.value_or(rec.settings.true_distance_m);
  rangekit::MetricsReport report;
  try {
    report = rangekit::compute_metrics(rec, reference, band, min_samples);
  } catch (const std::invalid_argument& e) {
    die_config(e.what());
  }

  if (out.empty()) out = fs::path(recording_path).stem().string() + "_report";
  rangekit::export_report(report, rangekit::ReportFormat::Csv, out + ".csv");
  rangekit::export_report(report, rangekit::ReportFormat::Json, out + ".json");
  if (slice_phi) {
    rangekit::MetricsReport only_slice = report;
    only_slice.polar_slices.clear();
    try {
      rangekit::polar_slice(rec, *slice_phi, min_samples);
    } catch (const std::invalid_argument& e) {
      die_config(e.what());
    }
    for (const auto& slice : report.polar_slices)
      if (std::llround(slice.phi_deg * 100) == std::llround(*slice_phi * 100))
        only_slice.polar_slices.push_back(slice);
    rangekit::export_report(only_slice, rangekit::ReportFormat::SvgPolar,
                            out + ".svg");
  }

  if (!quiet) {
    const auto show = [](const std::optional<double>& v) {
      return v ? std::to_string(*v) : std::string("undefined");
    };
    std::cout << "mae_m=" << show(report.mae_m) << " sd_m=" << show(report.sd_m)
              << " rmse_m=" << show(report.rmse_m)
              << " accuracy=" << show(report.accuracy_frac)
              << " failure=" << report.failure_frac << " -> " << out
              << ".{csv,json" << (slice_phi ? ",svg" : "") << "}\n";
  }
  return kExitOk;
}

rangekit::EntryScenario scenario_from_json(const json& doc) {
  rangekit::EntryScenario scenario;
  if (doc.contains("walk") && doc.at("walk").is_array()) {
    for (const auto& v : doc.at("walk")) scenario.walk_m.push_back(v.get<double>());
  } else if (doc.contains("walk") && doc.at("walk").is_object()) {
    const auto& walk = doc.at("walk");
    const double from = walk.at("from").get<double>();
    const double to = walk.at("to").get<double>();
    const int cycles = walk.at("cycles").get<int>();
    if (cycles < 1) throw std::invalid_argument("walk.cycles must be >= 1");
    for (int i = 0; i < cycles; ++i)
      scenario.walk_m.push_back(
          cycles == 1 ? to : from + (to - from) * i / (cycles - 1));
    for (int i = 0; i < walk.value("hold", 0); ++i) scenario.walk_m.push_back(to);
  } else {
    throw std::invalid_argument("scenario needs a 'walk' array or generator");
  }
  scenario.bias_m = doc.value("bias_m", 0.0);
  scenario.sigma_m = doc.value("sigma_m", 0.0);
  scenario.p_fail = doc.value("p_fail", 0.0);
  if (doc.contains("attacker")) {
    const auto& a = doc.at("attacker");
    rangekit::AttackerModel model;
    const std::string kind = a.value("kind", "ghost-peak");
    if (kind == "ghost-peak") model.kind = rangekit::AttackKind::GhostPeak;
    else if (kind == "preamble-injection") model.kind = rangekit::AttackKind::PreambleInjection;
    else if (kind == "cicada") model.kind = rangekit::AttackKind::Cicada;
    else throw std::invalid_argument("unknown attacker kind '" + kind + "'");
    model.ghost_success_prob = a.value("ghost_success_prob", 0.05);
    model.reduction_meters = a.value("reduction_meters", 3.0);
    model.reduction_fixed = a.value("reduction_fixed", false);
    model.distance_floor_m = a.value("distance_floor_m", -3.0);
    model.pulse_interval_s = a.value("pulse_interval_s", 1e-3);
    model.cicada_fail_prob = a.value("cicada_fail_prob", 0.2);
    model.cicada_sigma_m = a.value("cicada_sigma_m", 0.5);
    scenario.attacker = model;
  }
  if (doc.contains("policy")) {
    const auto& p = doc.at("policy");
    scenario.policy.window = p.value("window", scenario.policy.window);
    scenario.policy.min_cycles = p.value("min_cycles", scenario.policy.min_cycles);
    scenario.policy.unlock_threshold_m =
        p.value("unlock_threshold_m", scenario.policy.unlock_threshold_m);
    scenario.policy.negative_floor_m =
        p.value("negative_floor_m", scenario.policy.negative_floor_m);
    scenario.policy.attack_negative_m =
        p.value("attack_negative_m", scenario.policy.attack_negative_m);
    scenario.policy.attack_count_k =
        p.value("attack_count_k", scenario.policy.attack_count_k);
    scenario.policy.attack_lookback =
        p.value("attack_lookback", scenario.policy.attack_lookback);
    scenario.policy.fluctuation_bound_m =
        p.value("fluctuation_bound_m", scenario.policy.fluctuation_bound_m);
  }
  return scenario;
}

int cmd_pke(const std::string& scenario_path,
            const std::vector<std::string>& policy_overrides, std::uint64_t seed,
            bool fail_on_suspend, std::string out, bool quiet) {
  std::ifstream in(scenario_path);
  if (!in) die_config("cannot open scenario file: " + scenario_path);
  rangekit::EntryScenario scenario;
  try {
    json doc;
    in >> doc;
    scenario = scenario_from_json(doc);
  } catch (const std::exception& e) {
    die_config(std::string("malformed scenario: ") + e.what());
  }
  scenario.policy = policy_from_overrides(scenario.policy, policy_overrides);
  scenario.seed = seed;

  rangekit::Transcript transcript;
  try {
    transcript = rangekit::simulate_entry_scenario(scenario);
  } catch (const std::invalid_argument& e) {
    die_config(e.what());
  }

  if (out.empty()) out = "transcript.jsonl";
  std::ofstream sink(out, std::ios::binary | std::ios::trunc);
  if (!sink) die_config("cannot write transcript: " + out);
  sink << rangekit::transcript_to_jsonl(transcript);

  if (!quiet) {
    std::cout << "cycles=" << transcript.events.size()
              << " unlocks=" << transcript.unlock_count
              << " suspends=" << transcript.suspend_count;
    if (transcript.first_unlock_cycle)
      std::cout << " first_unlock=" << *transcript.first_unlock_cycle;
    std::cout << " -> " << out << "\n";
  }
  if (fail_on_suspend && transcript.suspend_count > 0) return kExitPolicy;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UWB two-way-ranging simulation and evaluation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string profiles_path = default_profiles_path();
  std::string out;
  bool quiet = false;
  app.add_option("--profiles", profiles_path,
                 "profile file (UWB_RANGEKIT_PROFILES overrides the default)");
  app.add_option("--out", out, "output path (subcommand-specific default)");
  app.add_flag("--quiet", quiet, "suppress the summary line");

  auto* campaign = app.add_subcommand("campaign", "run a sweep campaign");
  std::string device, environment;
  double distance = 0.0;
  std::vector<std::string> plan_overrides;
  std::uint64_t campaign_seed = 0;
  campaign->add_option("--device", device, "device profile name")->required();
  campaign->add_option("--environment", environment, "environment name")->required();
  campaign->add_option("--distance", distance, "true distance in meters")->required();
  campaign->add_option("--plan", plan_overrides,
                       "plan overrides, e.g. theta-step=90 phi-step=90");
  campaign->add_option("--seed", campaign_seed, "random seed")->required();

  auto* analyze = app.add_subcommand("analyze", "compute metrics for a recording");
  std::string recording_path;
  double band = 0.10;
  int min_samples = 10;
  std::optional<double> true_distance;
  std::optional<double> slice_phi;
  analyze->add_option("recording", recording_path, "recording archive")->required();
  analyze->add_option("--true-distance", true_distance,
                      "reference distance (default: recording settings)");
  analyze->add_option("--band", band, "accuracy band in meters");
  analyze->add_option("--min-samples", min_samples, "failed-position threshold");
  analyze->add_option("--slice-phi", slice_phi, "also export an SVG polar slice");

  auto* pke = app.add_subcommand("pke", "run an entry-decision scenario");
  std::string scenario_path;
  std::vector<std::string> policy_overrides;
  std::uint64_t pke_seed = 0;
  bool fail_on_suspend = false;
  pke->add_option("--scenario", scenario_path, "scenario JSON file")->required();
  pke->add_option("--policy", policy_overrides,
                  "policy overrides, e.g. window=15");
  pke->add_option("--seed", pke_seed, "random seed")->required();
  pke->add_flag("--fail-on-suspend", fail_on_suspend,
                "exit 4 if the session suspends");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (campaign->parsed())
      return cmd_campaign(profiles_path, device, environment, distance,
                          plan_overrides, campaign_seed, out, quiet);
    if (analyze->parsed())
      return cmd_analyze(recording_path, true_distance, band, slice_phi,
                         min_samples, out, quiet);
    if (pke->parsed())
      return cmd_pke(scenario_path, policy_overrides, pke_seed, fail_on_suspend,
                     out, quiet);
  } catch (const rangekit::RecordingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
