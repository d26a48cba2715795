#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rangekit/rng.hpp"

namespace rangekit {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

// Gimbal orientation: theta is the base rotation, phi the arm rotation.
// Mechanical resolution is 0.01 degrees; position keys are quantized to it.
struct Position {
  double theta_deg = 0.0;
  double phi_deg = 0.0;

  void validate() const {
    if (!(theta_deg >= 0.0 && theta_deg < 360.0))
      throw std::invalid_argument("Position: theta must be in [0, 360)");
    if (!(phi_deg >= 0.0 && phi_deg <= 180.0))
      throw std::invalid_argument("Position: phi must be in [0, 180]");
  }

  // Stable integer key at 0.01 degree resolution.
  std::int64_t key() const {
    return static_cast<std::int64_t>(std::llround(theta_deg * 100.0)) * 100000 +
           static_cast<std::int64_t>(std::llround(phi_deg * 100.0));
  }

  friend bool operator==(const Position& a, const Position& b) {
    return a.key() == b.key();
  }
  friend bool operator<(const Position& a, const Position& b) {
    return a.key() < b.key();
  }
};

// Attenuation factor in [0, 1] from the device body shielding its antenna:
// 1 when the antenna faces the remote (theta = 0), minimal (g_min) when the
// body is fully interposed with the arm flat (theta = 180, phi = 90).
inline double shielding_gain(const Position& pos, double g_min = 0.0) {
  pos.validate();
  const double w = 0.5 * (1.0 - std::cos(deg_to_rad(pos.theta_deg)));
  const double v = std::sin(deg_to_rad(pos.phi_deg));
  return 1.0 - (1.0 - g_min) * w * std::clamp(v, 0.0, 1.0);
}

// Orientation-dependent profile curves are stored as named parametric forms
// so they can live in the profile file.
struct AngularFunction {
  enum class Form {
    Constant,           // params: [value]
    Shielding,          // params: [base, scale, g_min] -> base + scale*(1-gain)
    LogisticShielding,  // params: [lo, hi, steepness, midpoint]
    CosineTheta,        // params: [offset, amplitude, phase_deg]
  };

  Form form = Form::Constant;
  std::vector<double> params{0.0};

  static AngularFunction constant(double value) {
    return {Form::Constant, {value}};
  }

  double operator()(const Position& pos) const {
    switch (form) {
      case Form::Constant:
        return params.at(0);
      case Form::Shielding:
        return params.at(0) +
               params.at(1) * (1.0 - shielding_gain(pos, params.at(2)));
      case Form::LogisticShielding: {
        const double lo = params.at(0), hi = params.at(1);
        const double k = params.at(2), x0 = params.at(3);
        const double x = 1.0 - shielding_gain(pos, 0.0);
        return lo + (hi - lo) / (1.0 + std::exp(-k * (x - x0)));
      }
      case Form::CosineTheta:
        return params.at(0) +
               params.at(1) *
                   std::cos(deg_to_rad(pos.theta_deg - params.at(2)));
    }
    throw std::logic_error("AngularFunction: unknown form");
  }

  // Conservative bounds over the full orientation range, used for schema
  // validation (sigma >= 0 everywhere, probabilities within [0, 1]).
  std::pair<double, double> range() const {
    switch (form) {
      case Form::Constant:
        return {params.at(0), params.at(0)};
      case Form::Shielding: {
        const double lo = std::min(params.at(0),
                                   params.at(0) + params.at(1) * (1.0 - params.at(2)));
        const double hi = std::max(params.at(0),
                                   params.at(0) + params.at(1) * (1.0 - params.at(2)));
        return {lo, hi};
      }
      case Form::LogisticShielding:
        return {std::min(params.at(0), params.at(1)),
                std::max(params.at(0), params.at(1))};
      case Form::CosineTheta:
        return {params.at(0) - std::abs(params.at(1)),
                params.at(0) + std::abs(params.at(1))};
    }
    throw std::logic_error("AngularFunction: unknown form");
  }
};

struct OutlierModel {
  double p_enlarge = 0.0;
  double enlarge_tail_m = 0.5;  // exponential tail mean, draws are > 0
  double p_reduce = 0.0;
  double reduce_floor_m = -3.0;  // error floor for reduction draws
};

struct TowerObstruction {
  bool enabled = false;
  double bias_add_m = 0.01;
  double sigma_add_m = 0.004;
};

// Measurement model for one (device, environment, distance) cell.
struct EnvironmentProfile {
  std::string name = "custom";  // outside | lab | garage | custom
  double true_distance_m = 0.0;
  AngularFunction bias_m = AngularFunction::constant(0.0);
  AngularFunction sigma_m = AngularFunction::constant(0.0);
  AngularFunction p_fail = AngularFunction::constant(0.0);
  OutlierModel outlier;
  std::optional<double> max_distance_cap_m;
  bool cap_hard = true;        // hard: always fail beyond the cap
  double cap_soft_width_m = 3.0;  // soft: failure ramps up over this span
  TowerObstruction tower;

  double effective_fail_prob(const Position& pos) const {
    double p = std::clamp(p_fail(pos), 0.0, 1.0);
    if (max_distance_cap_m) {
      if (true_distance_m > *max_distance_cap_m) return 1.0;
      if (!cap_hard) {
        const double margin = *max_distance_cap_m - true_distance_m;
        const double reach = std::clamp(margin / cap_soft_width_m, 0.0, 1.0);
        p = 1.0 - (1.0 - p) * reach;
      }
    }
    return p;
  }
};

// One draw from the cell's measurement mixture: orientation-dependent
// failure, Gaussian core around true + bias, and rare enlargement/reduction
// outliers. Enlargements are strictly positive (reflected paths are longer);
// reductions replace the value with true + uniform[reduce_floor, 0).
inline std::optional<double> sample_measurement(const EnvironmentProfile& profile,
                                                const Position& pos, Rng& rng) {
  pos.validate();
  const double p_fail = profile.effective_fail_prob(pos);
  if (rng.bernoulli(p_fail)) return std::nullopt;

  double bias = profile.bias_m(pos);
  double sigma = std::max(0.0, profile.sigma_m(pos));
  if (profile.tower.enabled) {
    bias += profile.tower.bias_add_m;
    sigma += profile.tower.sigma_add_m;
  }
  double d = profile.true_distance_m + bias + rng.normal(0.0, sigma);

  const double u = rng.uniform();
  if (u < profile.outlier.p_enlarge) {
    d += rng.exponential(profile.outlier.enlarge_tail_m);
  } else if (u < profile.outlier.p_enlarge + profile.outlier.p_reduce) {
    d = profile.true_distance_m +
        rng.uniform(profile.outlier.reduce_floor_m, 0.0);
  }
  return d;
}

struct DeviceInfo {
  std::string chipset;
  std::optional<double> max_distance_cap_m;
  bool cap_hard = true;
  std::vector<int> channels;
};

class ProfileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// All calibrated cells for the supported devices, loaded from the profile
// file. Cells are keyed by (device, environment, true distance).
class DeviceProfileSet {
 public:
  const EnvironmentProfile* find(const std::string& device,
                                 const std::string& environment,
                                 double distance_m) const {
    const auto dev = cells_.find(device);
    if (dev == cells_.end()) return nullptr;
    const auto env = dev->second.find(environment);
    if (env == dev->second.end()) return nullptr;
    for (const auto& profile : env->second) {
      if (std::abs(profile.true_distance_m - distance_m) < 1e-9) return &profile;
    }
    return nullptr;
  }

  const DeviceInfo* device_info(const std::string& device) const {
    const auto it = devices_.find(device);
    return it == devices_.end() ? nullptr : &it->second;
  }

  std::vector<std::string> device_names() const {
    std::vector<std::string> names;
    for (const auto& [name, info] : devices_) names.push_back(name);
    return names;
  }

  const std::map<std::string, std::map<std::string, std::vector<EnvironmentProfile>>>&
  cells() const {
    return cells_;
  }

  void add_device(const std::string& name, DeviceInfo info) {
    devices_[name] = std::move(info);
  }

  void add_cell(const std::string& device, const std::string& environment,
                EnvironmentProfile profile) {
    cells_[device][environment].push_back(std::move(profile));
  }

 private:
  std::map<std::string, DeviceInfo> devices_;
  std::map<std::string, std::map<std::string, std::vector<EnvironmentProfile>>>
      cells_;
};

namespace detail {

[[noreturn]] inline void profile_fail(const std::string& path,
                                      const std::string& message) {
  throw ProfileError(path + ": " + message);
}

inline double require_number(const nlohmann::json& node, const std::string& path) {
  if (!node.is_number()) profile_fail(path, "expected a number");
  return node.get<double>();
}

inline AngularFunction parse_angular(const nlohmann::json& node,
                                     const std::string& path) {
  if (node.is_number()) return AngularFunction::constant(node.get<double>());
  if (!node.is_object() || !node.contains("form") || !node.contains("params"))
    profile_fail(path, "expected a number or {form, params}");
  const std::string form = node.at("form").get<std::string>();
  AngularFunction fn;
  const auto& raw = node.at("params");
  if (!raw.is_array()) profile_fail(path + "/params", "expected an array");
  fn.params.clear();
  for (std::size_t i = 0; i < raw.size(); ++i)
    fn.params.push_back(require_number(raw[i], path + "/params/" + std::to_string(i)));
  std::size_t want = 0;
  if (form == "constant") {
    fn.form = AngularFunction::Form::Constant;
    want = 1;
  } else if (form == "shielding") {
    fn.form = AngularFunction::Form::Shielding;
    want = 3;
  } else if (form == "logistic_shielding") {
    fn.form = AngularFunction::Form::LogisticShielding;
    want = 4;
  } else if (form == "cosine_theta") {
    fn.form = AngularFunction::Form::CosineTheta;
    want = 3;
  } else {
    profile_fail(path + "/form", "unknown form '" + form + "'");
  }
  if (fn.params.size() != want)
    profile_fail(path + "/params", "expected " + std::to_string(want) + " parameters");
  return fn;
}

}  // namespace detail

inline DeviceProfileSet parse_profiles(const nlohmann::json& doc) try {
  using detail::profile_fail;
  DeviceProfileSet set;
  if (!doc.is_object()) profile_fail("", "profile document must be an object");
  if (doc.value("schema", 0) != 1) profile_fail("/schema", "expected schema 1");

  if (!doc.contains("devices") || !doc.at("devices").is_object())
    profile_fail("/devices", "missing device table");
  for (const auto& [name, node] : doc.at("devices").items()) {
    const std::string path = "/devices/" + name;
    DeviceInfo info;
    info.chipset = node.value("chipset", "");
    if (node.contains("max_distance_cap_m")) {
      info.max_distance_cap_m =
          detail::require_number(node.at("max_distance_cap_m"), path + "/max_distance_cap_m");
      info.cap_hard = node.value("cap_hard", true);
    }
    if (node.contains("channels"))
      info.channels = node.at("channels").get<std::vector<int>>();
    set.add_device(name, std::move(info));
  }

  if (!doc.contains("profiles") || !doc.at("profiles").is_object())
    profile_fail("/profiles", "missing profile table");
  for (const auto& [device, envs] : doc.at("profiles").items()) {
    if (!set.device_info(device))
      profile_fail("/profiles/" + device, "device not declared in /devices");
    for (const auto& [environment, cells] : envs.items()) {
      const std::string env_path = "/profiles/" + device + "/" + environment;
      if (!cells.is_array()) profile_fail(env_path, "expected an array of cells");
      for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string path = env_path + "/" + std::to_string(i);
        const auto& node = cells[i];
        EnvironmentProfile profile;
        profile.name = environment;
        if (!node.contains("true_distance_m"))
          profile_fail(path, "missing true_distance_m");
        profile.true_distance_m =
            detail::require_number(node.at("true_distance_m"), path + "/true_distance_m");
        if (node.contains("bias"))
          profile.bias_m = detail::parse_angular(node.at("bias"), path + "/bias");
        if (node.contains("sigma"))
          profile.sigma_m = detail::parse_angular(node.at("sigma"), path + "/sigma");
        if (node.contains("p_fail"))
          profile.p_fail = detail::parse_angular(node.at("p_fail"), path + "/p_fail");
        if (node.contains("outlier")) {
          const auto& o = node.at("outlier");
          profile.outlier.p_enlarge = o.value("p_enlarge", 0.0);
          profile.outlier.enlarge_tail_m = o.value("enlarge_tail_m", 0.5);
          profile.outlier.p_reduce = o.value("p_reduce", 0.0);
          profile.outlier.reduce_floor_m = o.value("reduce_floor_m", -3.0);
        }
        if (node.contains("max_distance_cap_m")) {
          profile.max_distance_cap_m =
              detail::require_number(node.at("max_distance_cap_m"), path + "/max_distance_cap_m");
          profile.cap_hard = node.value("cap_hard", true);
          profile.cap_soft_width_m = node.value("cap_soft_width_m", 3.0);
        } else if (const DeviceInfo* info = set.device_info(device);
                   info && info->max_distance_cap_m) {
          profile.max_distance_cap_m = info->max_distance_cap_m;
          profile.cap_hard = info->cap_hard;
          profile.cap_soft_width_m = node.value("cap_soft_width_m", 3.0);
        }
        profile.tower.enabled = node.value("tower_obstruction", false);
        if (node.contains("tower_bias_add_m"))
          profile.tower.bias_add_m =
              detail::require_number(node.at("tower_bias_add_m"), path + "/tower_bias_add_m");
        if (node.contains("tower_sigma_add_m"))
          profile.tower.sigma_add_m =
              detail::require_number(node.at("tower_sigma_add_m"), path + "/tower_sigma_add_m");

        // Range checks.
        if (profile.sigma_m.range().first < 0.0)
          profile_fail(path + "/sigma", "sigma must be >= 0 at every orientation");
        const auto [p_lo, p_hi] = profile.p_fail.range();
        if (p_lo < 0.0 || p_hi > 1.0)
          profile_fail(path + "/p_fail", "failure probability must stay in [0, 1]");
        if (profile.outlier.p_enlarge < 0.0 || profile.outlier.p_enlarge > 1.0)
          profile_fail(path + "/outlier/p_enlarge", "probability must be in [0, 1]");
        if (profile.outlier.p_reduce < 0.0 || profile.outlier.p_reduce > 1.0)
          profile_fail(path + "/outlier/p_reduce", "probability must be in [0, 1]");
        if (profile.outlier.p_enlarge + profile.outlier.p_reduce > 1.0)
          profile_fail(path + "/outlier", "outlier probabilities must sum to <= 1");
        if (!(profile.outlier.enlarge_tail_m > 0.0))
          profile_fail(path + "/outlier/enlarge_tail_m", "tail mean must be > 0");
        if (profile.outlier.reduce_floor_m >= 0.0)
          profile_fail(path + "/outlier/reduce_floor_m", "reduction floor must be < 0");
        if (!(profile.true_distance_m > 0.0))
          profile_fail(path + "/true_distance_m", "true distance must be > 0");
        set.add_cell(device, environment, std::move(profile));
      }
    }
  }
  return set;
} catch (const nlohmann::json::exception& e) {
  throw ProfileError(std::string("malformed profile document: ") + e.what());
}

inline DeviceProfileSet load_profiles(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProfileError("cannot open profile file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ProfileError("invalid JSON in " + path + ": " + e.what());
  }
  return parse_profiles(doc);
}

}  // namespace rangekit
