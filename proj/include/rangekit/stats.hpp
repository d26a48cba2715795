#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rangekit/campaign.hpp"
#include "rangekit/channel.hpp"

namespace rangekit {

struct PositionStats {
  Position position;
  int n = 0;
  std::optional<double> mean_m;
  std::optional<double> sd_m;  // population
};

struct PolarSlice {
  double phi_deg = 0.0;
  std::vector<std::pair<double, double>> theta_mean;  // ordered by theta
};

// The metric suite over one recording. Sample metrics are absent (not zero)
// when no position produced enough samples. A position counts as failed when
// it holds fewer than min_samples samples; failed positions feed only the
// failure fraction, never the error metrics.
struct MetricsReport {
  double true_distance_m = 0.0;
  double accuracy_band_m = 0.10;
  int min_samples = 10;

  std::optional<double> mae_m;
  std::optional<double> sd_m;       // population SD of measured distances, pooled
  std::optional<double> mean_sd_m;  // mean of per-position SDs
  std::optional<double> rmse_m;
  std::optional<double> mean_error_m;
  std::optional<double> accuracy_frac;
  double failure_frac = 0.0;

  std::size_t sample_count = 0;
  int total_positions = 0;
  int failed_positions = 0;

  std::vector<PositionStats> per_position;
  std::vector<PolarSlice> polar_slices;
};

namespace detail {

inline std::vector<double> plan_phi_values(const SweepPlan& plan) {
  std::vector<double> values;
  for (int j = 0; j < plan.phi_count(); ++j)
    values.push_back(plan.phi_start_deg + j * plan.phi_step_deg);
  return values;
}

}  // namespace detail

inline MetricsReport compute_metrics(const Recording& rec, double true_distance_m,
                                     double accuracy_band_m = 0.10,
                                     int min_samples = 10) {
  if (!(accuracy_band_m >= 0.0))
    throw std::invalid_argument("compute_metrics: accuracy band must be >= 0");
  if (min_samples < 1)
    throw std::invalid_argument("compute_metrics: min_samples must be >= 1");

  MetricsReport report;
  report.true_distance_m = true_distance_m;
  report.accuracy_band_m = accuracy_band_m;
  report.min_samples = min_samples;
  report.total_positions = static_cast<int>(rec.data.size());

  long double sum_abs = 0.0L, sum_err = 0.0L, sum_sq_err = 0.0L;
  long double sum_d = 0.0L, sum_sq_d = 0.0L;
  long double sum_pos_sd = 0.0L;
  std::size_t n = 0, accurate = 0, positions_with_sd = 0;

  for (const auto& entry : rec.data) {
    PositionStats stats;
    stats.position = entry.position;
    stats.n = static_cast<int>(entry.samples.size());
    if (stats.n > 0) {
      long double pos_sum = 0.0L, pos_sq = 0.0L;
      for (const auto& s : entry.samples) {
        pos_sum += s.distance_m;
        pos_sq += static_cast<long double>(s.distance_m) * s.distance_m;
      }
      const long double pos_mean = pos_sum / stats.n;
      stats.mean_m = static_cast<double>(pos_mean);
      const long double pos_var =
          std::max(0.0L, pos_sq / stats.n - pos_mean * pos_mean);
      stats.sd_m = static_cast<double>(std::sqrt(pos_var));
    }
    const bool failed = stats.n < min_samples;
    if (failed) {
      ++report.failed_positions;
    } else {
      for (const auto& s : entry.samples) {
        const long double err = static_cast<long double>(s.distance_m) - true_distance_m;
        sum_abs += err < 0 ? -err : err;
        sum_err += err;
        sum_sq_err += err * err;
        sum_d += s.distance_m;
        sum_sq_d += static_cast<long double>(s.distance_m) * s.distance_m;
        if (std::abs(static_cast<double>(err)) <= accuracy_band_m) ++accurate;
        ++n;
      }
      sum_pos_sd += *stats.sd_m;
      ++positions_with_sd;
    }
    report.per_position.push_back(std::move(stats));
  }

  report.sample_count = n;
  if (report.total_positions > 0)
    report.failure_frac =
        static_cast<double>(report.failed_positions) / report.total_positions;
  if (n > 0) {
    report.mae_m = static_cast<double>(sum_abs / n);
    report.mean_error_m = static_cast<double>(sum_err / n);
    report.rmse_m = static_cast<double>(std::sqrt(sum_sq_err / n));
    const long double mean_d = sum_d / n;
    report.sd_m = static_cast<double>(
        std::sqrt(std::max(0.0L, sum_sq_d / n - mean_d * mean_d)));
    report.accuracy_frac = static_cast<double>(accurate) / static_cast<double>(n);
  }
  if (positions_with_sd > 0)
    report.mean_sd_m = static_cast<double>(sum_pos_sd / positions_with_sd);

  for (double phi : detail::plan_phi_values(rec.settings.plan)) {
    PolarSlice slice;
    slice.phi_deg = phi;
    for (const auto& stats : report.per_position) {
      if (std::llround(stats.position.phi_deg * 100) != std::llround(phi * 100))
        continue;
      if (stats.n < min_samples) continue;  // failed positions are not plotted
      slice.theta_mean.emplace_back(stats.position.theta_deg, *stats.mean_m);
    }
    std::sort(slice.theta_mean.begin(), slice.theta_mean.end());
    report.polar_slices.push_back(std::move(slice));
  }
  return report;
}

// Per-theta mean distances at a fixed arm angle; failed positions omitted.
inline std::vector<std::pair<double, double>> polar_slice(const Recording& rec,
                                                          double phi_deg,
                                                          int min_samples = 10) {
  const auto phis = detail::plan_phi_values(rec.settings.plan);
  const bool in_plan = std::any_of(phis.begin(), phis.end(), [&](double p) {
    return std::llround(p * 100) == std::llround(phi_deg * 100);
  });
  if (!in_plan)
    throw std::invalid_argument("polar_slice: phi is not part of the sweep plan");

  std::vector<std::pair<double, double>> slice;
  for (const auto& entry : rec.data) {
    if (std::llround(entry.position.phi_deg * 100) != std::llround(phi_deg * 100))
      continue;
    if (static_cast<int>(entry.samples.size()) < min_samples) continue;
    long double sum = 0.0L;
    for (const auto& s : entry.samples) sum += s.distance_m;
    slice.emplace_back(entry.position.theta_deg,
                       static_cast<double>(sum / entry.samples.size()));
  }
  std::sort(slice.begin(), slice.end());
  return slice;
}

struct PositionDelta {
  Position position;
  double delta_m = 0.0;  // mean(b) - mean(a)
};

struct ComparisonReport {
  double mean_delta_m = 0.0;
  double sd_delta_m = 0.0;  // population
  std::vector<PositionDelta> per_position;
};

// Position-by-position mean differences between two recordings of the same
// plan (reproducibility check). Positions empty in either recording are
// skipped.
inline ComparisonReport compare_recordings(const Recording& a, const Recording& b) {
  if (!(a.settings.plan == b.settings.plan))
    throw std::invalid_argument("compare_recordings: sweep plans differ");
  ComparisonReport report;
  long double sum = 0.0L, sum_sq = 0.0L;
  for (const auto& entry : a.data) {
    const PositionSamples* other = b.find(entry.position);
    if (other == nullptr || entry.samples.empty() || other->samples.empty())
      continue;
    const auto mean = [](const std::vector<Sample>& samples) {
      long double s = 0.0L;
      for (const auto& x : samples) s += x.distance_m;
      return s / samples.size();
    };
    const double delta = static_cast<double>(mean(other->samples) - mean(entry.samples));
    report.per_position.push_back({entry.position, delta});
    sum += delta;
    sum_sq += static_cast<long double>(delta) * delta;
  }
  if (!report.per_position.empty()) {
    const long double n = static_cast<long double>(report.per_position.size());
    const long double mean = sum / n;
    report.mean_delta_m = static_cast<double>(mean);
    report.sd_delta_m =
        static_cast<double>(std::sqrt(std::max(0.0L, sum_sq / n - mean * mean)));
  }
  return report;
}

enum class ReportFormat { Csv, Json, SvgPolar };

namespace detail {

// Shortest round-trip decimal representation, stable across runs.
inline std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

inline std::string optional_field(const std::optional<double>& value) {
  return value ? format_double(*value) : "nan";
}

inline nlohmann::json optional_json(const std::optional<double>& value) {
  return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

}  // namespace detail

inline std::string report_to_csv(const MetricsReport& report) {
  std::string out;
  out += "metric,value\n";
  out += "true_distance_m," + detail::format_double(report.true_distance_m) + "\n";
  out += "accuracy_band_m," + detail::format_double(report.accuracy_band_m) + "\n";
  out += "min_samples," + std::to_string(report.min_samples) + "\n";
  out += "mae_m," + detail::optional_field(report.mae_m) + "\n";
  out += "sd_m," + detail::optional_field(report.sd_m) + "\n";
  out += "mean_sd_m," + detail::optional_field(report.mean_sd_m) + "\n";
  out += "rmse_m," + detail::optional_field(report.rmse_m) + "\n";
  out += "mean_error_m," + detail::optional_field(report.mean_error_m) + "\n";
  out += "accuracy_frac," + detail::optional_field(report.accuracy_frac) + "\n";
  out += "failure_frac," + detail::format_double(report.failure_frac) + "\n";
  out += "sample_count," + std::to_string(report.sample_count) + "\n";
  out += "total_positions," + std::to_string(report.total_positions) + "\n";
  out += "failed_positions," + std::to_string(report.failed_positions) + "\n";
  out += "\ntheta_deg,phi_deg,n,mean_m,sd_m\n";
  for (const auto& stats : report.per_position) {
    out += detail::format_double(stats.position.theta_deg) + "," +
           detail::format_double(stats.position.phi_deg) + "," +
           std::to_string(stats.n) + "," + detail::optional_field(stats.mean_m) +
           "," + detail::optional_field(stats.sd_m) + "\n";
  }
  return out;
}

inline nlohmann::json report_to_json(const MetricsReport& report) {
  nlohmann::json per_position = nlohmann::json::array();
  for (const auto& stats : report.per_position) {
    per_position.push_back({{"theta", stats.position.theta_deg},
                            {"phi", stats.position.phi_deg},
                            {"n", stats.n},
                            {"mean_m", detail::optional_json(stats.mean_m)},
                            {"sd_m", detail::optional_json(stats.sd_m)}});
  }
  nlohmann::json slices = nlohmann::json::array();
  for (const auto& slice : report.polar_slices) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [theta, mean] : slice.theta_mean)
      points.push_back({{"theta", theta}, {"mean_m", mean}});
    slices.push_back({{"phi", slice.phi_deg}, {"points", std::move(points)}});
  }
  return nlohmann::json{
      {"true_distance_m", report.true_distance_m},
      {"accuracy_band_m", report.accuracy_band_m},
      {"min_samples", report.min_samples},
      {"mae_m", detail::optional_json(report.mae_m)},
      {"sd_m", detail::optional_json(report.sd_m)},
      {"mean_sd_m", detail::optional_json(report.mean_sd_m)},
      {"rmse_m", detail::optional_json(report.rmse_m)},
      {"mean_error_m", detail::optional_json(report.mean_error_m)},
      {"accuracy_frac", detail::optional_json(report.accuracy_frac)},
      {"failure_frac", report.failure_frac},
      {"sample_count", report.sample_count},
      {"total_positions", report.total_positions},
      {"failed_positions", report.failed_positions},
      {"per_position", std::move(per_position)},
      {"polar_slices", std::move(slices)},
  };
}

// Fixed-size polar chart, one path per slice. Deterministic for a given
// report: no timestamps, no external resources.
inline std::string report_to_svg(const MetricsReport& report) {
  constexpr double kSize = 600.0, kCenter = 300.0, kRadius = 260.0;
  double max_mean = 0.0;
  for (const auto& slice : report.polar_slices)
    for (const auto& [theta, mean] : slice.theta_mean)
      max_mean = std::max(max_mean, std::abs(mean));
  if (max_mean <= 0.0) max_mean = 1.0;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         detail::format_double(kSize) + "\" height=\"" +
         detail::format_double(kSize) + "\" viewBox=\"0 0 600 600\">\n";
  svg += "  <circle cx=\"300\" cy=\"300\" r=\"" + detail::format_double(kRadius) +
         "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
  int hue = 0;
  for (const auto& slice : report.polar_slices) {
    if (slice.theta_mean.empty()) continue;
    std::string path;
    bool first = true;
    for (const auto& [theta, mean] : slice.theta_mean) {
      const double r = kRadius * std::abs(mean) / max_mean;
      const double angle = deg_to_rad(theta - 90.0);
      const double x = kCenter + r * std::cos(angle);
      const double y = kCenter + r * std::sin(angle);
      path += (first ? "M " : "L ") + detail::format_double(x) + " " +
              detail::format_double(y) + " ";
      first = false;
    }
    path += "Z";
    svg += "  <path data-phi=\"" + detail::format_double(slice.phi_deg) +
           "\" d=\"" + path + "\" fill=\"none\" stroke=\"hsl(" +
           std::to_string(hue) + ",70%,45%)\"/>\n";
    hue = (hue + 47) % 360;
  }
  svg += "</svg>\n";
  return svg;
}

inline void export_report(const MetricsReport& report, ReportFormat format,
                          const std::filesystem::path& path) {
  std::string payload;
  switch (format) {
    case ReportFormat::Csv: payload = report_to_csv(report); break;
    case ReportFormat::Json: payload = report_to_json(report).dump(2) + "\n"; break;
    case ReportFormat::SvgPolar: payload = report_to_svg(report); break;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("short write on report: " + path.string());
}

}  // namespace rangekit
