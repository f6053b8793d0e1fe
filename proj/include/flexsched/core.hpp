#pragma once

// Shared time-series types, time grid, resampling and seeded RNG plumbing.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace flexsched {

/// Integer seconds since the experiment epoch. No calendar logic.
using Seconds = std::int64_t;

struct TimeGrid {
  Seconds dt_control = 300;
  Seconds dt_request = 900;
  std::size_t horizon_steps = 96;

  /// Throws InvalidArgument unless dt_request is a positive multiple of
  /// dt_control and the horizon is non-empty.
  void validate() const;
  std::size_t substeps() const {
    return static_cast<std::size_t>(dt_request / dt_control);
  }
  Seconds day_seconds() const {
    return dt_request * static_cast<Seconds>(horizon_steps);
  }
};

/// Uniformly sampled series. Values are finite; dt is positive.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(Seconds start, Seconds dt, std::vector<double> values);

  Seconds start() const noexcept { return start_; }
  Seconds dt() const noexcept { return dt_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  Seconds time_at(std::size_t i) const {
    return start_ + dt_ * static_cast<Seconds>(i);
  }

  /// Sub-range [offset, offset + count) as a new series.
  TimeSeries slice(std::size_t offset, std::size_t count) const;

 private:
  Seconds start_ = 0;
  Seconds dt_ = 1;
  std::vector<double> values_;
};

/// Measured external conditions e_t: outdoor temperature [°C] and global
/// horizontal irradiance [W/m²] on a common grid.
struct ExternalConditions {
  TimeSeries outdoor_temp;
  TimeSeries irradiance;

  ExternalConditions() = default;
  ExternalConditions(TimeSeries outdoor_temp, TimeSeries irradiance);

  std::size_t size() const noexcept { return outdoor_temp.size(); }
  Seconds dt() const noexcept { return outdoor_temp.dt(); }
  Seconds start() const noexcept { return outdoor_temp.start(); }
  ExternalConditions slice(std::size_t offset, std::size_t count) const;
};

/// Block means over windows of target_dt. A trailing partial window is
/// dropped.
TimeSeries resample_mean(const TimeSeries& series, Seconds target_dt);

/// Same block-mean rule on a raw vector.
std::vector<double> block_mean(std::span<const double> values,
                               std::size_t block);

void require_finite(std::span<const double> values, const char* what);

using Rng = std::mt19937_64;

/// Independent stream seed for (master, stream) so per-building RNGs do not
/// depend on iteration order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(derive_seed(master, stream));
}

}  // namespace flexsched
