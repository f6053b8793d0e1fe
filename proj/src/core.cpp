#include "flexsched/core.hpp"

#include <cmath>
#include <sstream>

#include "flexsched/errors.hpp"

namespace flexsched {

const char* to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::Internal: return "internal";
    case ErrorCategory::InvalidInput: return "invalid-input";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Solver: return "solver";
  }
  return "unknown";
}

void TimeGrid::validate() const {
  if (dt_control <= 0 || dt_request <= 0) {
    throw InvalidArgument("time grid: timesteps must be positive");
  }
  if (dt_request % dt_control != 0) {
    std::ostringstream msg;
    msg << "time grid: dt_request (" << dt_request
        << " s) is not an integer multiple of dt_control (" << dt_control
        << " s)";
    throw InvalidArgument(msg.str());
  }
  if (horizon_steps < 1) {
    throw InvalidArgument("time grid: horizon must contain at least one step");
  }
}

void require_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream msg;
      msg << what << ": non-finite value at index " << i;
      throw InvalidArgument(msg.str());
    }
  }
}

TimeSeries::TimeSeries(Seconds start, Seconds dt, std::vector<double> values)
    : start_(start), dt_(dt), values_(std::move(values)) {
  if (dt_ <= 0) throw InvalidArgument("time series: dt must be positive");
  require_finite(values_, "time series");
}

TimeSeries TimeSeries::slice(std::size_t offset, std::size_t count) const {
  if (offset + count > values_.size()) {
    throw InvalidArgument("time series: slice out of range");
  }
  std::vector<double> out(values_.begin() + static_cast<std::ptrdiff_t>(offset),
                          values_.begin() +
                              static_cast<std::ptrdiff_t>(offset + count));
  return TimeSeries(time_at(offset), dt_, std::move(out));
}

ExternalConditions::ExternalConditions(TimeSeries temp, TimeSeries ghi)
    : outdoor_temp(std::move(temp)), irradiance(std::move(ghi)) {
  if (outdoor_temp.size() != irradiance.size() ||
      outdoor_temp.dt() != irradiance.dt() ||
      outdoor_temp.start() != irradiance.start()) {
    throw InvalidArgument(
        "external conditions: temperature and irradiance grids differ");
  }
  for (double g : irradiance.values()) {
    if (g < 0.0) throw InvalidArgument("external conditions: irradiance < 0");
  }
}

ExternalConditions ExternalConditions::slice(std::size_t offset,
                                             std::size_t count) const {
  return ExternalConditions(outdoor_temp.slice(offset, count),
                            irradiance.slice(offset, count));
}

std::vector<double> block_mean(std::span<const double> values,
                               std::size_t block) {
  if (block == 0) throw InvalidArgument("block_mean: block size must be > 0");
  const std::size_t n_out = values.size() / block;
  std::vector<double> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < block; ++j) sum += values[i * block + j];
    out[i] = sum / static_cast<double>(block);
  }
  return out;
}

TimeSeries resample_mean(const TimeSeries& series, Seconds target_dt) {
  if (target_dt <= 0 || target_dt % series.dt() != 0) {
    std::ostringstream msg;
    msg << "resample_mean: target dt " << target_dt
        << " s is not a positive integer multiple of the series dt "
        << series.dt() << " s";
    throw InvalidArgument(msg.str());
  }
  const auto block = static_cast<std::size_t>(target_dt / series.dt());
  return TimeSeries(series.start(), target_dt,
                    block_mean(series.values(), block));
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master),
                    static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace flexsched
