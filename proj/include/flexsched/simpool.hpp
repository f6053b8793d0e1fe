#pragma once

// Closed-loop pool of single-zone RC buildings heated by heat pumps under
// PID control, with request following, rebound limiting, a greedy
// comparison controller and identification-data collection.
//
// Zone model (dt in hours):
//   C dT/dt = COP * u * P_max - UA * (T - T_out) + g_s * GHI / 1000 + w

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "flexsched/core.hpp"
#include "flexsched/envelope.hpp"
#include "flexsched/storage_model.hpp"

namespace flexsched {

struct BuildingParams {
  double capacity = 5.0;        // kWh/°C
  double conductance = 0.3;     // kW/°C
  double max_power = 3.0;       // kW electrical; minimum power is 0
  double cop = 4.5;
  double solar_aperture = 3.0;  // m²

  void validate() const;
};

/// 2 + 3 (UA - 0.2) / 0.3, clamped to [2, 5] kW.
double scaled_max_power(double conductance);

/// Uniform draws: C in [2.77, 11.11], UA in [0.2, 0.5], COP in [4, 5];
/// P_max from scaled_max_power.
BuildingParams sample_building(Rng& rng, double solar_aperture = 3.0);

struct ComfortSpec {
  double setpoint = 21.0;
  double lower = 19.0;
  double upper = 24.0;

  void validate() const;
};

struct PidGains {
  double kp = 0.3;   // 1/°C
  double ki = 1e-4;  // 1/(°C s)
  double kd = 0.0;   // s/°C
};

enum class BuildingMode : std::uint8_t { Nominal, Following, Rebounding };

const char* to_string(BuildingMode mode) noexcept;

struct BuildingState {
  double temp = 21.0;        // °C
  double integrator = 0.0;   // °C s
  double prev_error = 0.0;   // °C
  BuildingMode mode = BuildingMode::Nominal;
};

struct WeatherSample {
  double t_out = 0.0;  // °C
  double ghi = 0.0;    // W/m²
};

/// Explicit Euler step of the zone temperature. heat_kw is an additive
/// thermal disturbance.
BuildingState step_building(const BuildingState& state,
                            const BuildingParams& params, double hp_fraction,
                            WeatherSample weather, double dt_s,
                            double heat_kw = 0.0);

/// Heat-pump fraction holding T constant under the given weather, in [0,1].
double steady_state_fraction(const BuildingParams& params, double temp,
                             WeatherSample weather);

/// Discrete PID on e = setpoint - T with output clamped to [lo, hi]. The
/// integrator only moves when the unclamped output is inside the limits or
/// the error drives it back inside.
double pid_control(BuildingState& state, const ComfortSpec& spec,
                   const PidGains& gains, double dt_s, double lo = 0.0,
                   double hi = 1.0);

/// T at the setpoint with the integrator preloaded to the steady-state
/// fraction.
BuildingState steady_initial_state(const BuildingParams& params,
                                   const ComfortSpec& spec,
                                   const PidGains& gains, WeatherSample weather);

// Weather and consumption data ---------------------------------------------

/// CSV columns time_s, t_out_c, ghi_wm2.
ExternalConditions read_weather_csv(const std::filesystem::path& path);
void write_weather_csv(const ExternalConditions& weather,
                       const std::filesystem::path& path);

struct SyntheticWeatherOptions {
  double mean_temp = 2.0;       // °C
  double daily_amplitude = 4.0; // °C
  double day_to_day_std = 2.5;  // °C
  double ghi_peak = 450.0;      // W/m² at solar noon under clear sky
  double min_temp = -10.0;
  double max_temp = 15.0;
};

/// Winter weather on a dt grid: diurnal temperature cycle around an AR(1)
/// daily mean and a clear-sky irradiance bell scaled by a daily cloud factor.
ExternalConditions synthetic_weather(std::size_t days, Seconds dt,
                                     std::uint64_t seed,
                                     const SyntheticWeatherOptions& options = {});

/// CSV columns time_s, p_kw.
TimeSeries read_consumption_csv(const std::filesystem::path& path);
void write_consumption_csv(const TimeSeries& series,
                           const std::filesystem::path& path);

/// Residential-style daily profile with morning and evening peaks.
TimeSeries synthetic_consumption(std::size_t days, Seconds dt,
                                 std::uint64_t seed);

/// Linear rescaling to the given mean. Rejects series with non-positive mean.
std::vector<double> rescale_to_mean(std::span<const double> values,
                                    double target_mean);

// Requests -------------------------------------------------------------------

/// max(g - p_b, 0) elementwise.
std::vector<double> gen_self_consumption_request(std::span<const double> p_b_agg,
                                                 std::span<const double> g_agg);

/// min(c - p, 0) elementwise. Requires c > 0.
std::vector<double> gen_peak_request(std::span<const double> p_agg, double c);

/// factor * mean(p).
double desired_peak(std::span<const double> p_agg, double factor);

/// capacity * GHI / 1000, clipped to [0, capacity].
std::vector<double> pv_production(std::span<const double> ghi_wm2,
                                  double capacity_kw);

// Pool simulation ------------------------------------------------------------

struct PoolSettings {
  TimeGrid grid;
  ComfortSpec comfort;
  PidGains gains;
  double rebound_fraction = 0.2;
  double rebound_exit = 0.1;           // °C
  double true_state_cap_hours = 48.0;
  double disturbance_std_kw = 0.0;     // white thermal noise per control step

  void validate() const;
};

/// Charge-like state s = D_lo / (D_lo + D_hi), where D_lo is the runtime at
/// zero power until T reaches the lower bound and D_hi the runtime at full
/// power until the upper bound. Crossing times are interpolated within a
/// control step. Both runtimes at the cap give 0.5.
double true_state(const BuildingState& state, const BuildingParams& params,
                  const ComfortSpec& spec, const ExternalConditions& weather,
                  std::size_t control_step, double cap_hours);

/// What one building does during one request slot.
struct SlotCommand {
  bool follow = false;
  double power_kw = 0.0;     // target electrical power when following
  double baseline_kw = 0.0;  // forecast baseline, used by the rebound clamp
};

struct NominalForecast {
  std::size_t slots = 0;
  std::vector<std::vector<double>> power;  // per building, kW per slot
  std::vector<std::vector<double>> state;  // per building, s at slot start (optional)
};

class BuildingPool {
 public:
  /// Buildings start at the setpoint in steady state for the first weather
  /// sample. The weather grid must equal the control step.
  BuildingPool(std::vector<BuildingParams> params, ExternalConditions weather,
               PoolSettings settings, std::uint64_t seed);

  std::size_t size() const noexcept { return params_.size(); }
  std::size_t slot() const noexcept { return slot_; }
  std::size_t control_step() const noexcept { return slot_ * settings_.grid.substeps(); }
  const PoolSettings& settings() const noexcept { return settings_; }
  const BuildingParams& params(std::size_t i) const { return params_[i]; }
  const std::vector<BuildingParams>& all_params() const noexcept { return params_; }
  const BuildingState& state(std::size_t i) const { return states_[i]; }
  const ExternalConditions& weather() const noexcept { return weather_; }
  /// Slots the weather still covers from the current slot.
  std::size_t slots_available() const;

  /// Nominal operation from the current states without disturbances.
  /// with_state also records the true state at every slot start.
  NominalForecast forecast(std::size_t slots, bool with_state = false) const;

  double true_state(std::size_t i) const;

  /// Condition features at an absolute slot: slot-mean t_out and GHI/100,
  /// then the same means over the next 24 slots (perfect forecast).
  std::vector<double> slot_features(std::size_t slot) const;

  struct SlotOutcome {
    std::vector<double> power_kw;                // slot mean per building
    std::vector<std::vector<double>> temp_c;     // per building, per substep
    std::vector<std::vector<double>> step_power; // per building, per substep
  };

  /// Advances every building by one request slot. Following overrides the
  /// PID; a building that stops following enters Rebounding, where the PID
  /// output is held within baseline * (1 +- rebound_fraction) until
  /// |T - setpoint| < rebound_exit.
  SlotOutcome step_slot(std::span<const SlotCommand> commands);

 private:
  std::vector<BuildingParams> params_;
  ExternalConditions weather_;
  PoolSettings settings_;
  std::vector<BuildingState> states_;
  std::vector<Rng> rngs_;
  std::size_t slot_ = 0;
};

/// Per-building trajectories over a run of slots.
struct Trace {
  std::size_t buildings = 0;
  std::size_t slots = 0;
  std::size_t substeps = 1;
  std::size_t first_slot = 0;
  std::vector<std::vector<double>> power;      // per building, per slot
  std::vector<std::vector<double>> request;    // commanded r per slot
  std::vector<std::vector<double>> temp;       // per building, per control step
  std::vector<std::vector<double>> step_power; // per building, per control step
  std::vector<std::vector<std::uint8_t>> mode; // per building, per slot

  void init(std::size_t n, std::size_t first, std::size_t substeps_per_slot);
  /// Appends one slot; modes are read from the pool after the step.
  void record(const BuildingPool::SlotOutcome& out,
              std::span<const SlotCommand> commands, const BuildingPool& pool);
  std::vector<double> aggregate_power() const;
  void append(const Trace& other);
};

/// CSV columns t_s, building, T_c, p_kw, r_kw, mode on the control grid.
void write_trace_csv(const Trace& trace, const TimeGrid& grid,
                     const std::filesystem::path& path);

/// Nominal operation for a number of slots.
Trace simulate_baseline(BuildingPool& pool, std::size_t slots);

/// Requests on the slot grid, one row per building. active marks the slots
/// in which a building follows p_b + r.
struct RequestPlan {
  std::vector<std::vector<std::uint8_t>> active;
  std::vector<std::vector<double>> request;
};

/// Follows the plan for plan length slots against the given baseline
/// forecast (per building, at least as many slots as the plan).
Trace follow_request(BuildingPool& pool, const RequestPlan& plan,
                     const NominalForecast& baseline);

/// Greedy comparison controller for one day. Assets are available, active
/// or inactive. When the active group cannot cover r_t, random available
/// assets are activated until it can or none are left. Active assets leave
/// after k slots or on a comfort violation and stay inactive for the day.
/// r_t is split among active assets in proportion to their envelope bound
/// in the direction of the request, taken at the activation slot.
Trace greedy_baseline(BuildingPool& pool,
                      std::span<const FlexibilityEnvelope> envelopes,
                      std::span<const double> request,
                      const NominalForecast& baseline, std::size_t k, Rng& rng);

// Identification data ------------------------------------------------------

struct ExcitationPolicy {
  bool enabled = true;
  std::size_t requests_per_day = 2;
  std::size_t length_slots = 12;
  double min_fraction = 0.2;
  double max_fraction = 0.8;

  void validate(std::size_t horizon) const;
};

struct IdentificationData {
  std::vector<OperationLog> excited;  // one per building
  std::vector<OperationLog> nominal;  // one per building
};

/// Runs two copies of the pool for the given number of days: one under
/// randomized constant requests, one under nominal operation. Each day is
/// split into requests_per_day equal sections holding one request of
/// length_slots at a random offset that leaves at least length_slots of
/// recovery before the next section. The sign is random and the magnitude a
/// uniform fraction of the smallest headroom toward that sign.
/// Logged r is the realized deviation from the forecast baseline while
/// following and 0 otherwise.
IdentificationData collect_identification_data(
    std::span<const BuildingParams> params, const ExternalConditions& weather,
    std::size_t days, const PoolSettings& settings,
    const ExcitationPolicy& excitation, std::uint64_t seed);

}  // namespace flexsched
