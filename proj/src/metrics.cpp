#include "flexsched/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "flexsched/csv.hpp"
#include "flexsched/errors.hpp"

namespace flexsched {

double peak_power_reduction(std::span<const double> p_b_agg,
                            std::span<const double> p_agg) {
  if (p_b_agg.empty() || p_agg.empty()) {
    throw InvalidArgument("peak power reduction of an empty series");
  }
  if (p_b_agg.size() != p_agg.size()) {
    throw InvalidArgument("peak power reduction: series lengths differ");
  }
  return *std::max_element(p_b_agg.begin(), p_b_agg.end()) -
         *std::max_element(p_agg.begin(), p_agg.end());
}

double self_consumed_fraction(std::span<const double> g_agg,
                              std::span<const double> p_agg) {
  if (g_agg.size() != p_agg.size()) {
    throw InvalidArgument("self-consumed fraction: series lengths differ");
  }
  double g_sum = 0.0, surplus = 0.0;
  for (std::size_t t = 0; t < g_agg.size(); ++t) {
    g_sum += g_agg[t];
    surplus += std::max(g_agg[t] - p_agg[t], 0.0);
  }
  if (!(g_sum > 0.0)) {
    throw InvalidArgument("self-consumed fraction undefined without production");
  }
  return (g_sum - surplus) / g_sum;
}

double temp_violation_pct(std::span<const double> temps, double lower,
                          double upper) {
  if (temps.empty()) throw InvalidArgument("temperature violation of an empty series");
  std::size_t bad = 0;
  for (double T : temps) {
    if (!(T >= lower && T <= upper)) ++bad;
  }
  return 100.0 * static_cast<double>(bad) / static_cast<double>(temps.size());
}

double temp_violation_pct_pooled(std::span<const std::vector<double>> temps,
                                 double lower, double upper) {
  std::size_t bad = 0, total = 0;
  for (const auto& series : temps) {
    for (double T : series) {
      if (!(T >= lower && T <= upper)) ++bad;
    }
    total += series.size();
  }
  if (total == 0) throw InvalidArgument("temperature violation of an empty pool");
  return 100.0 * static_cast<double>(bad) / static_cast<double>(total);
}

void write_metric_summary(std::span<const MetricReport> reports,
                          const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"scenario", "method", "alpha", "delta_p_a_kw", "delta_s_r",
            "delta_t_r_pct", "tracking_rmse_kw", "days_skipped"});
  for (const auto& r : reports) {
    const std::vector<std::string> cells{
        r.scenario, r.method, csv::format(r.alpha), csv::format(r.delta_p_a),
        csv::format(r.delta_s_r), csv::format(r.delta_t_r),
        csv::format(r.tracking_rmse), std::to_string(r.days_skipped)};
    w.raw_row(cells);
  }
  w.close();
}

void write_metric_days(std::span<const MetricReport> reports,
                       const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"scenario", "method", "alpha", "day", "delta_p_a_kw", "delta_s_r",
            "delta_t_r_pct", "skipped"});
  for (const auto& r : reports) {
    for (const auto& d : r.days) {
      const std::vector<std::string> cells{
          r.scenario, r.method, csv::format(r.alpha), std::to_string(d.day),
          csv::format(d.delta_p_a), csv::format(d.delta_s_r),
          csv::format(d.delta_t_r), d.skipped ? "1" : "0"};
      w.raw_row(cells);
    }
  }
  w.close();
}

std::string format_metric_table(std::span<const MetricReport> reports) {
  std::ostringstream out;
  out << std::left << std::setw(18) << "scenario" << std::setw(20) << "method"
      << std::right << std::setw(8) << "alpha" << std::setw(12) << "dP_a[kW]"
      << std::setw(10) << "dS_r" << std::setw(10) << "dT_r[%]" << std::setw(12)
      << "rmse[kW]" << std::setw(8) << "skipped" << '\n';
  out << std::fixed;
  for (const auto& r : reports) {
    out << std::left << std::setw(18) << r.scenario << std::setw(20) << r.method
        << std::right << std::setprecision(3) << std::setw(8) << r.alpha
        << std::setw(12) << r.delta_p_a << std::setw(10) << r.delta_s_r
        << std::setw(10) << r.delta_t_r << std::setw(12) << r.tracking_rmse
        << std::setw(8) << r.days_skipped << '\n';
  }
  return out.str();
}

}  // namespace flexsched
