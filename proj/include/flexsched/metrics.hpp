#pragma once

// Evaluation metrics: absolute peak power reduction, self-consumed power
// fraction and percentage of temperature-bound violations.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace flexsched {

/// max(p_b_agg) - max(p_agg). Negative when the actual peak is higher.
double peak_power_reduction(std::span<const double> p_b_agg,
                            std::span<const double> p_agg);

/// (g_sum - sum_t max(g_t - p_t, 0)) / g_sum. Throws when g_sum <= 0.
double self_consumed_fraction(std::span<const double> g_agg,
                              std::span<const double> p_agg);

/// 100 * share of samples outside the closed interval [lower, upper].
double temp_violation_pct(std::span<const double> temps, double lower,
                          double upper);

/// Equal weight per sample across all buildings.
double temp_violation_pct_pooled(std::span<const std::vector<double>> temps,
                                 double lower, double upper);

struct DayMetrics {
  std::size_t day = 0;
  double delta_p_a = 0.0;
  double delta_s_r = 0.0;
  double delta_t_r = 0.0;
  bool skipped = false;
};

struct MetricReport {
  std::string scenario;
  std::string method;
  double alpha = 0.0;
  double delta_p_a = 0.0;  // mean over evaluated days
  double delta_s_r = 0.0;  // over the whole period
  double delta_t_r = 0.0;  // pooled over buildings and period
  double tracking_rmse = 0.0;
  std::size_t days_skipped = 0;
  std::vector<DayMetrics> days;
};

/// One summary row per report: scenario, method, alpha, delta_p_a_kw,
/// delta_s_r, delta_t_r_pct, tracking_rmse_kw, days_skipped.
void write_metric_summary(std::span<const MetricReport> reports,
                          const std::filesystem::path& path);
/// One row per report and day.
void write_metric_days(std::span<const MetricReport> reports,
                       const std::filesystem::path& path);
/// Fixed-width table for terminals.
std::string format_metric_table(std::span<const MetricReport> reports);

}  // namespace flexsched
