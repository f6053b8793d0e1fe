#include "flexsched/simpool.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>
#include <string>

#include "flexsched/csv.hpp"
#include "flexsched/errors.hpp"

namespace flexsched {

namespace {

constexpr double kSecondsPerHour = 3600.0;
constexpr std::size_t kFeatureLookahead = 24;  // slots

WeatherSample weather_at(const ExternalConditions& w, std::size_t step) {
  const std::size_t i = std::min(step, w.size() - 1);
  return {w.outdoor_temp[i], w.irradiance[i]};
}

double mean_of(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void BuildingParams::validate() const {
  if (!(capacity > 0.0) || !(conductance > 0.0) || !(max_power > 0.0) ||
      !(cop > 0.0) || !(solar_aperture >= 0.0)) {
    throw InvalidArgument("building parameters must be positive");
  }
}

double scaled_max_power(double conductance) {
  return std::clamp(2.0 + 3.0 * (conductance - 0.2) / 0.3, 2.0, 5.0);
}

BuildingParams sample_building(Rng& rng, double solar_aperture) {
  std::uniform_real_distribution<double> cap(2.77, 11.11);
  std::uniform_real_distribution<double> ua(0.2, 0.5);
  std::uniform_real_distribution<double> cop(4.0, 5.0);
  BuildingParams p;
  p.capacity = cap(rng);
  p.conductance = ua(rng);
  p.cop = cop(rng);
  p.max_power = scaled_max_power(p.conductance);
  p.solar_aperture = solar_aperture;
  return p;
}

void ComfortSpec::validate() const {
  if (!(lower < setpoint && setpoint < upper)) {
    throw InvalidArgument("comfort bounds must bracket the setpoint");
  }
}

const char* to_string(BuildingMode mode) noexcept {
  switch (mode) {
    case BuildingMode::Nominal: return "nominal";
    case BuildingMode::Following: return "following";
    case BuildingMode::Rebounding: return "rebounding";
  }
  return "unknown";
}

BuildingState step_building(const BuildingState& state,
                            const BuildingParams& params, double hp_fraction,
                            WeatherSample weather, double dt_s,
                            double heat_kw) {
  const double u = std::clamp(hp_fraction, 0.0, 1.0);
  const double q = params.cop * u * params.max_power -
                   params.conductance * (state.temp - weather.t_out) +
                   params.solar_aperture * weather.ghi / 1000.0 + heat_kw;
  BuildingState next = state;
  next.temp = state.temp + dt_s / kSecondsPerHour * q / params.capacity;
  return next;
}

double steady_state_fraction(const BuildingParams& params, double temp,
                             WeatherSample weather) {
  const double need = params.conductance * (temp - weather.t_out) -
                      params.solar_aperture * weather.ghi / 1000.0;
  return std::clamp(need / (params.cop * params.max_power), 0.0, 1.0);
}

double pid_control(BuildingState& state, const ComfortSpec& spec,
                   const PidGains& gains, double dt_s, double lo, double hi) {
  const double e = spec.setpoint - state.temp;
  const double deriv = gains.kd != 0.0 ? gains.kd * (e - state.prev_error) / dt_s : 0.0;
  const double trial_integrator = state.integrator + e * dt_s;
  const double trial = gains.kp * e + gains.ki * trial_integrator + deriv;
  const bool unwinds = (trial > hi && e < 0.0) || (trial < lo && e > 0.0);
  if ((trial >= lo && trial <= hi) || unwinds) state.integrator = trial_integrator;
  state.prev_error = e;
  const double out = gains.kp * e + gains.ki * state.integrator + deriv;
  return std::clamp(out, lo, hi);
}

BuildingState steady_initial_state(const BuildingParams& params,
                                   const ComfortSpec& spec,
                                   const PidGains& gains, WeatherSample weather) {
  BuildingState s;
  s.temp = spec.setpoint;
  s.prev_error = 0.0;
  if (gains.ki > 0.0) {
    s.integrator = steady_state_fraction(params, spec.setpoint, weather) / gains.ki;
  }
  return s;
}

// Weather and consumption ------------------------------------------------------

ExternalConditions read_weather_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto time = table.column("time_s");
  const auto temp = table.column("t_out_c");
  const auto ghi = table.column("ghi_wm2");
  if (time.size() < 2) throw InvalidArgument("weather file needs at least two rows");
  const auto dt = static_cast<Seconds>(std::llround(time[1] - time[0]));
  for (std::size_t i = 1; i < time.size(); ++i) {
    if (static_cast<Seconds>(std::llround(time[i] - time[i - 1])) != dt) {
      throw InvalidArgument("weather file '" + path.string() + "' is not uniformly sampled");
    }
  }
  for (double g : ghi) {
    if (g < 0.0) throw InvalidArgument("weather file holds negative irradiance");
  }
  const auto start = static_cast<Seconds>(std::llround(time[0]));
  return ExternalConditions(TimeSeries(start, dt, temp), TimeSeries(start, dt, ghi));
}

void write_weather_csv(const ExternalConditions& weather,
                       const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"time_s", "t_out_c", "ghi_wm2"});
  for (std::size_t i = 0; i < weather.size(); ++i) {
    const double row[3] = {static_cast<double>(weather.outdoor_temp.time_at(i)),
                           weather.outdoor_temp[i], weather.irradiance[i]};
    w.row(row);
  }
  w.close();
}

ExternalConditions synthetic_weather(std::size_t days, Seconds dt,
                                     std::uint64_t seed,
                                     const SyntheticWeatherOptions& o) {
  if (days == 0 || dt <= 0 || 86400 % dt != 0) {
    throw InvalidArgument("synthetic weather needs days > 0 and dt dividing a day");
  }
  Rng rng(derive_seed(seed, 0x5745));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> cloud(0.25, 1.0);
  // Daily means at noon, one extra so interpolation covers the last day.
  std::vector<double> day_mean(days + 2), day_cloud(days + 1);
  day_mean[0] = o.mean_temp + o.day_to_day_std * normal(rng);
  for (std::size_t d = 1; d < day_mean.size(); ++d) {
    day_mean[d] = o.mean_temp + 0.6 * (day_mean[d - 1] - o.mean_temp) +
                  0.8 * o.day_to_day_std * normal(rng);
  }
  for (auto& c : day_cloud) c = cloud(rng);

  const std::size_t per_day = static_cast<std::size_t>(86400 / dt);
  const std::size_t n = days * per_day;
  std::vector<double> temp(n), ghi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double hours = static_cast<double>(i) * static_cast<double>(dt) / kSecondsPerHour;
    const std::size_t d = i / per_day;
    const double h = hours - 24.0 * static_cast<double>(d);
    // Interpolate the daily mean between neighbouring noons.
    const double x = (hours - 12.0) / 24.0;
    const double xc = std::max(x, 0.0);
    const auto d0 = static_cast<std::size_t>(std::floor(xc));
    const double frac = xc - static_cast<double>(d0);
    const double m = day_mean[d0] + frac * (day_mean[d0 + 1] - day_mean[d0]);
    const double cycle = o.daily_amplitude *
                         std::cos(2.0 * std::numbers::pi * (h - 15.0) / 24.0);
    temp[i] = std::clamp(m + cycle + 0.2 * normal(rng), o.min_temp, o.max_temp);
    double g = 0.0;
    if (h > 8.0 && h < 16.0) {
      g = o.ghi_peak * day_cloud[d] * std::sin(std::numbers::pi * (h - 8.0) / 8.0) *
          (1.0 + 0.05 * normal(rng));
    }
    ghi[i] = std::max(g, 0.0);
  }
  return ExternalConditions(TimeSeries(0, dt, std::move(temp)),
                            TimeSeries(0, dt, std::move(ghi)));
}

TimeSeries read_consumption_csv(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto time = table.column("time_s");
  const auto p = table.column("p_kw");
  if (time.size() < 2) throw InvalidArgument("consumption file needs at least two rows");
  const auto dt = static_cast<Seconds>(std::llround(time[1] - time[0]));
  for (std::size_t i = 1; i < time.size(); ++i) {
    if (static_cast<Seconds>(std::llround(time[i] - time[i - 1])) != dt) {
      throw InvalidArgument("consumption file '" + path.string() +
                            "' is not uniformly sampled");
    }
  }
  return TimeSeries(static_cast<Seconds>(std::llround(time[0])), dt, p);
}

void write_consumption_csv(const TimeSeries& series,
                           const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"time_s", "p_kw"});
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double row[2] = {static_cast<double>(series.time_at(i)), series[i]};
    w.row(row);
  }
  w.close();
}

TimeSeries synthetic_consumption(std::size_t days, Seconds dt,
                                 std::uint64_t seed) {
  if (days == 0 || dt <= 0 || 86400 % dt != 0) {
    throw InvalidArgument("synthetic consumption needs days > 0 and dt dividing a day");
  }
  Rng rng(derive_seed(seed, 0x434f));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> level(0.9, 1.1);
  const std::size_t per_day = static_cast<std::size_t>(86400 / dt);
  std::vector<double> p(days * per_day);
  for (std::size_t d = 0; d < days; ++d) {
    const double day_level = level(rng);
    for (std::size_t s = 0; s < per_day; ++s) {
      const double h = static_cast<double>(s) * static_cast<double>(dt) / kSecondsPerHour;
      const double morning = 0.25 * std::exp(-0.5 * std::pow((h - 8.0) / 1.5, 2));
      const double evening = 0.45 * std::exp(-0.5 * std::pow((h - 19.0) / 2.0, 2));
      const double v = day_level * (0.55 + morning + evening) * (1.0 + 0.03 * normal(rng));
      p[d * per_day + s] = std::max(v, 0.05);
    }
  }
  return TimeSeries(0, dt, std::move(p));
}

std::vector<double> rescale_to_mean(std::span<const double> values,
                                    double target_mean) {
  const double m = mean_of(values);
  if (!(m > 0.0)) throw InvalidArgument("cannot rescale a series with non-positive mean");
  std::vector<double> out(values.begin(), values.end());
  for (auto& v : out) v *= target_mean / m;
  return out;
}

// Requests ---------------------------------------------------------------------

std::vector<double> gen_self_consumption_request(std::span<const double> p_b_agg,
                                                 std::span<const double> g_agg) {
  if (p_b_agg.size() != g_agg.size()) {
    throw InvalidArgument("self-consumption request: series lengths differ");
  }
  std::vector<double> r(g_agg.size());
  for (std::size_t t = 0; t < r.size(); ++t) r[t] = std::max(g_agg[t] - p_b_agg[t], 0.0);
  return r;
}

std::vector<double> gen_peak_request(std::span<const double> p_agg, double c) {
  if (!(c > 0.0)) throw InvalidArgument("desired peak must be positive");
  std::vector<double> r(p_agg.size());
  for (std::size_t t = 0; t < r.size(); ++t) r[t] = std::min(c - p_agg[t], 0.0);
  return r;
}

double desired_peak(std::span<const double> p_agg, double factor) {
  if (p_agg.empty()) throw InvalidArgument("desired peak of an empty series");
  if (!(factor > 0.0)) throw InvalidArgument("peak factor must be positive");
  return factor * mean_of(p_agg);
}

std::vector<double> pv_production(std::span<const double> ghi_wm2,
                                  double capacity_kw) {
  if (!(capacity_kw >= 0.0)) throw InvalidArgument("PV capacity must be non-negative");
  std::vector<double> g(ghi_wm2.size());
  for (std::size_t t = 0; t < g.size(); ++t) {
    g[t] = std::clamp(capacity_kw * ghi_wm2[t] / 1000.0, 0.0, capacity_kw);
  }
  return g;
}

// Pool -------------------------------------------------------------------------

void PoolSettings::validate() const {
  grid.validate();
  comfort.validate();
  if (!(rebound_fraction >= 0.0) || !(rebound_exit > 0.0) ||
      !(true_state_cap_hours > 0.0) || !(disturbance_std_kw >= 0.0)) {
    throw InvalidArgument("invalid pool settings");
  }
}

namespace {

// Hours until T crosses `target` when running at a fixed fraction; the cap
// when it never does.
double runtime_to_bound(BuildingState s, const BuildingParams& params,
                        const ExternalConditions& weather, std::size_t step,
                        double fraction, double target, bool falling,
                        double dt_s, std::size_t cap_steps) {
  const double dt_h = dt_s / kSecondsPerHour;
  if (falling ? s.temp <= target : s.temp >= target) return 0.0;
  for (std::size_t n = 0; n < cap_steps; ++n) {
    const auto next = step_building(s, params, fraction, weather_at(weather, step + n), dt_s);
    const bool crossed = falling ? next.temp <= target : next.temp >= target;
    if (crossed) {
      const double frac = (s.temp - target) / (s.temp - next.temp);
      return (static_cast<double>(n) + std::clamp(frac, 0.0, 1.0)) * dt_h;
    }
    s = next;
  }
  return static_cast<double>(cap_steps) * dt_h;
}

}  // namespace

double true_state(const BuildingState& state, const BuildingParams& params,
                  const ComfortSpec& spec, const ExternalConditions& weather,
                  std::size_t control_step, double cap_hours) {
  if (weather.size() == 0) throw InvalidArgument("true state needs weather data");
  const double dt_s = static_cast<double>(weather.dt());
  const auto cap_steps = static_cast<std::size_t>(std::ceil(cap_hours * kSecondsPerHour / dt_s));
  const double d_lo = runtime_to_bound(state, params, weather, control_step, 0.0,
                                       spec.lower, true, dt_s, cap_steps);
  const double d_hi = runtime_to_bound(state, params, weather, control_step, 1.0,
                                       spec.upper, false, dt_s, cap_steps);
  const double cap = static_cast<double>(cap_steps) * dt_s / kSecondsPerHour;
  if (d_lo >= cap && d_hi >= cap) return 0.5;
  if (d_lo + d_hi <= 0.0) return 0.5;
  return d_lo / (d_lo + d_hi);
}

BuildingPool::BuildingPool(std::vector<BuildingParams> params,
                           ExternalConditions weather, PoolSettings settings,
                           std::uint64_t seed)
    : params_(std::move(params)),
      weather_(std::move(weather)),
      settings_(settings) {
  settings_.validate();
  if (weather_.size() == 0) throw InvalidArgument("building pool needs weather data");
  if (weather_.dt() != settings_.grid.dt_control) {
    throw InvalidArgument("weather step " + std::to_string(weather_.dt()) +
                          " s does not match the control step " +
                          std::to_string(settings_.grid.dt_control) + " s");
  }
  states_.reserve(params_.size());
  rngs_.reserve(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    params_[i].validate();
    states_.push_back(steady_initial_state(params_[i], settings_.comfort,
                                           settings_.gains, weather_at(weather_, 0)));
    rngs_.push_back(make_rng(seed, i));
  }
}

std::size_t BuildingPool::slots_available() const {
  const std::size_t sub = settings_.grid.substeps();
  const std::size_t total = weather_.size() / sub;
  return total > slot_ ? total - slot_ : 0;
}

NominalForecast BuildingPool::forecast(std::size_t slots, bool with_state) const {
  if (slots > slots_available()) {
    throw InvalidArgument("weather does not cover the " + std::to_string(slots) +
                          "-slot forecast from slot " + std::to_string(slot_));
  }
  const std::size_t sub = settings_.grid.substeps();
  const double dt_s = static_cast<double>(settings_.grid.dt_control);
  NominalForecast fc;
  fc.slots = slots;
  fc.power.assign(size(), std::vector<double>(slots, 0.0));
  if (with_state) fc.state.assign(size(), std::vector<double>(slots, 0.0));
  for (std::size_t i = 0; i < size(); ++i) {
    BuildingState s = states_[i];
    s.mode = BuildingMode::Nominal;
    const auto& p = params_[i];
    for (std::size_t t = 0; t < slots; ++t) {
      if (with_state) {
        fc.state[i][t] = flexsched::true_state(s, p, settings_.comfort, weather_,
                                               (slot_ + t) * sub,
                                               settings_.true_state_cap_hours);
      }
      double e = 0.0;
      for (std::size_t k = 0; k < sub; ++k) {
        const auto w = weather_at(weather_, (slot_ + t) * sub + k);
        const double u = pid_control(s, settings_.comfort, settings_.gains, dt_s);
        e += u * p.max_power;
        s = step_building(s, p, u, w, dt_s);
      }
      fc.power[i][t] = e / static_cast<double>(sub);
    }
  }
  return fc;
}

double BuildingPool::true_state(std::size_t i) const {
  return flexsched::true_state(states_[i], params_[i], settings_.comfort, weather_,
                               control_step(), settings_.true_state_cap_hours);
}

std::vector<double> BuildingPool::slot_features(std::size_t slot) const {
  const std::size_t sub = settings_.grid.substeps();
  auto window = [&](std::size_t first, std::size_t count) {
    double t = 0.0, g = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const auto w = weather_at(weather_, first + k);
      t += w.t_out;
      g += w.ghi;
    }
    const double c = static_cast<double>(count);
    return std::pair{t / c, g / c / 100.0};
  };
  const auto now = window(slot * sub, sub);
  const auto ahead = window(slot * sub, kFeatureLookahead * sub);
  return {now.first, now.second, ahead.first, ahead.second};
}

BuildingPool::SlotOutcome BuildingPool::step_slot(
    std::span<const SlotCommand> commands) {
  if (commands.size() != size()) {
    throw InvalidArgument("slot commands do not match the pool size");
  }
  if (slots_available() == 0) throw InvalidArgument("weather exhausted");
  const std::size_t sub = settings_.grid.substeps();
  const double dt_s = static_cast<double>(settings_.grid.dt_control);
  const auto& spec = settings_.comfort;
  SlotOutcome out;
  out.power_kw.assign(size(), 0.0);
  out.temp_c.assign(size(), std::vector<double>(sub));
  out.step_power.assign(size(), std::vector<double>(sub));
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < size(); ++i) {
    auto& s = states_[i];
    const auto& p = params_[i];
    const auto& cmd = commands[i];
    if (cmd.follow) {
      s.mode = BuildingMode::Following;
    } else if (s.mode == BuildingMode::Following) {
      s.mode = BuildingMode::Rebounding;
    }
    for (std::size_t k = 0; k < sub; ++k) {
      const auto w = weather_at(weather_, control_step() + k);
      double u = 0.0;
      if (s.mode == BuildingMode::Following) {
        u = std::clamp(cmd.power_kw / p.max_power, 0.0, 1.0);
        s.prev_error = spec.setpoint - s.temp;
      } else {
        if (s.mode == BuildingMode::Rebounding &&
            std::abs(s.temp - spec.setpoint) < settings_.rebound_exit) {
          s.mode = BuildingMode::Nominal;
        }
        if (s.mode == BuildingMode::Rebounding) {
          const double f = settings_.rebound_fraction;
          const double lo = std::clamp(cmd.baseline_kw * (1.0 - f) / p.max_power, 0.0, 1.0);
          const double hi = std::clamp(cmd.baseline_kw * (1.0 + f) / p.max_power, 0.0, 1.0);
          u = pid_control(s, spec, settings_.gains, dt_s, lo, hi);
        } else {
          u = pid_control(s, spec, settings_.gains, dt_s);
        }
      }
      const double heat = settings_.disturbance_std_kw > 0.0
                              ? settings_.disturbance_std_kw * noise(rngs_[i])
                              : 0.0;
      const auto mode = s.mode;
      s = step_building(s, p, u, w, dt_s, heat);
      s.mode = mode;
      out.step_power[i][k] = u * p.max_power;
      out.temp_c[i][k] = s.temp;
      out.power_kw[i] += u * p.max_power / static_cast<double>(sub);
    }
  }
  ++slot_;
  return out;
}

// Traces -----------------------------------------------------------------------

void Trace::init(std::size_t n, std::size_t first, std::size_t substeps_per_slot) {
  buildings = n;
  slots = 0;
  substeps = substeps_per_slot;
  first_slot = first;
  power.assign(n, {});
  request.assign(n, {});
  temp.assign(n, {});
  step_power.assign(n, {});
  mode.assign(n, {});
}

void Trace::record(const BuildingPool::SlotOutcome& out,
                   std::span<const SlotCommand> commands,
                   const BuildingPool& pool) {
  for (std::size_t i = 0; i < buildings; ++i) {
    power[i].push_back(out.power_kw[i]);
    request[i].push_back(commands[i].follow ? commands[i].power_kw - commands[i].baseline_kw
                                            : 0.0);
    temp[i].insert(temp[i].end(), out.temp_c[i].begin(), out.temp_c[i].end());
    step_power[i].insert(step_power[i].end(), out.step_power[i].begin(),
                         out.step_power[i].end());
    mode[i].push_back(static_cast<std::uint8_t>(pool.state(i).mode));
  }
  ++slots;
}

std::vector<double> Trace::aggregate_power() const {
  std::vector<double> agg(slots, 0.0);
  for (std::size_t i = 0; i < buildings; ++i) {
    for (std::size_t t = 0; t < slots; ++t) agg[t] += power[i][t];
  }
  return agg;
}

void Trace::append(const Trace& other) {
  if (buildings == 0 && slots == 0) {
    *this = other;
    return;
  }
  if (other.buildings != buildings || other.substeps != substeps) {
    throw InvalidArgument("cannot append traces of different shape");
  }
  for (std::size_t i = 0; i < buildings; ++i) {
    power[i].insert(power[i].end(), other.power[i].begin(), other.power[i].end());
    request[i].insert(request[i].end(), other.request[i].begin(), other.request[i].end());
    temp[i].insert(temp[i].end(), other.temp[i].begin(), other.temp[i].end());
    step_power[i].insert(step_power[i].end(), other.step_power[i].begin(),
                         other.step_power[i].end());
    mode[i].insert(mode[i].end(), other.mode[i].begin(), other.mode[i].end());
  }
  slots += other.slots;
}

void write_trace_csv(const Trace& trace, const TimeGrid& grid,
                     const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"t_s", "building", "T_c", "p_kw", "r_kw", "mode"});
  std::vector<std::string> cells(6);
  for (std::size_t i = 0; i < trace.buildings; ++i) {
    for (std::size_t c = 0; c < trace.slots * trace.substeps; ++c) {
      const std::size_t t = c / trace.substeps;
      const Seconds ts = static_cast<Seconds>(trace.first_slot * trace.substeps + c) *
                         grid.dt_control;
      cells[0] = std::to_string(ts);
      cells[1] = std::to_string(i);
      cells[2] = csv::format(trace.temp[i][c]);
      cells[3] = csv::format(trace.step_power[i][c]);
      cells[4] = csv::format(trace.request[i][t]);
      cells[5] = to_string(static_cast<BuildingMode>(trace.mode[i][t]));
      w.raw_row(cells);
    }
  }
  w.close();
}

Trace simulate_baseline(BuildingPool& pool, std::size_t slots) {
  if (slots > pool.slots_available()) {
    throw InvalidArgument("weather does not cover the requested baseline run");
  }
  Trace trace;
  trace.init(pool.size(), pool.slot(), pool.settings().grid.substeps());
  std::vector<SlotCommand> commands(pool.size());
  for (std::size_t t = 0; t < slots; ++t) {
    const auto out = pool.step_slot(commands);
    trace.record(out, commands, pool);
  }
  return trace;
}

Trace follow_request(BuildingPool& pool, const RequestPlan& plan,
                     const NominalForecast& baseline) {
  if (plan.active.size() != pool.size() || plan.request.size() != pool.size() ||
      baseline.power.size() != pool.size()) {
    throw InvalidArgument("request plan does not match the pool size");
  }
  const std::size_t slots = plan.active.empty() ? 0 : plan.active.front().size();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (plan.active[i].size() != slots || plan.request[i].size() != slots) {
      throw InvalidArgument("request plan rows differ in length");
    }
  }
  if (baseline.slots < slots) throw InvalidArgument("baseline forecast shorter than the plan");
  Trace trace;
  trace.init(pool.size(), pool.slot(), pool.settings().grid.substeps());
  std::vector<SlotCommand> commands(pool.size());
  for (std::size_t t = 0; t < slots; ++t) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const double pb = baseline.power[i][t];
      commands[i] = {plan.active[i][t] != 0, pb + plan.request[i][t], pb};
    }
    const auto out = pool.step_slot(commands);
    trace.record(out, commands, pool);
  }
  return trace;
}

Trace greedy_baseline(BuildingPool& pool,
                      std::span<const FlexibilityEnvelope> envelopes,
                      std::span<const double> request,
                      const NominalForecast& baseline, std::size_t k, Rng& rng) {
  const std::size_t n = pool.size();
  const std::size_t slots = request.size();
  if (envelopes.size() != n || baseline.power.size() != n) {
    throw InvalidArgument("greedy baseline: envelopes do not match the pool");
  }
  if (baseline.slots < slots) throw InvalidArgument("greedy baseline: forecast too short");
  for (const auto& env : envelopes) {
    if (env.horizon() < slots) throw InvalidArgument("greedy baseline: envelope too short");
  }
  if (k == 0) throw InvalidArgument("greedy baseline: k must be positive");
  enum class Group { Available, Active, Inactive };
  std::vector<Group> group(n, Group::Available);
  std::vector<std::size_t> started(n, 0), served(n, 0);
  const auto& spec = pool.settings().comfort;

  Trace trace;
  trace.init(n, pool.slot(), pool.settings().grid.substeps());
  std::vector<SlotCommand> commands(n);
  std::vector<double> share(n);
  for (std::size_t t = 0; t < slots; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (group[i] == Group::Active && served[i] >= k) group[i] = Group::Inactive;
    }
    const double r = request[t];
    double lo = 0.0, hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (group[i] != Group::Active) continue;
      lo += envelopes[i].lower[started[i]];
      hi += envelopes[i].upper[started[i]];
    }
    const double tol = 1e-9 * std::max(1.0, std::abs(r));
    while (r != 0.0 && !(r >= lo - tol && r <= hi + tol)) {
      std::vector<std::size_t> available;
      for (std::size_t i = 0; i < n; ++i) {
        if (group[i] == Group::Available) available.push_back(i);
      }
      if (available.empty()) break;
      std::uniform_int_distribution<std::size_t> pick(0, available.size() - 1);
      const std::size_t i = available[pick(rng)];
      group[i] = Group::Active;
      started[i] = t;
      served[i] = 0;
      lo += envelopes[i].lower[t];
      hi += envelopes[i].upper[t];
    }
    std::size_t active_count = 0;
    double weight_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (group[i] != Group::Active) continue;
      ++active_count;
      weight_sum += r > 0.0 ? envelopes[i].upper[started[i]] : -envelopes[i].lower[started[i]];
    }
    for (std::size_t i = 0; i < n; ++i) {
      share[i] = 0.0;
      if (group[i] != Group::Active || r == 0.0) continue;
      const double w = r > 0.0 ? envelopes[i].upper[started[i]] : -envelopes[i].lower[started[i]];
      share[i] = weight_sum > 0.0 ? r * w / weight_sum
                                  : r / static_cast<double>(active_count);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double pb = baseline.power[i][t];
      commands[i] = {group[i] == Group::Active, pb + share[i], pb};
    }
    const auto out = pool.step_slot(commands);
    trace.record(out, commands, pool);
    for (std::size_t i = 0; i < n; ++i) {
      if (group[i] != Group::Active) continue;
      ++served[i];
      for (double T : out.temp_c[i]) {
        if (T < spec.lower || T > spec.upper) {
          group[i] = Group::Inactive;
          break;
        }
      }
    }
  }
  return trace;
}

// Identification data ------------------------------------------------------------

void ExcitationPolicy::validate(std::size_t horizon) const {
  if (!enabled) return;
  if (requests_per_day == 0 || length_slots == 0) {
    throw InvalidArgument("excitation needs at least one request of positive length");
  }
  if (horizon / requests_per_day < 2 * length_slots) {
    throw InvalidArgument("excitation requests do not fit into a day with recovery time");
  }
  if (!(min_fraction > 0.0 && min_fraction <= max_fraction && max_fraction <= 1.0)) {
    throw InvalidArgument("excitation fractions must satisfy 0 < min <= max <= 1");
  }
}

IdentificationData collect_identification_data(
    std::span<const BuildingParams> params, const ExternalConditions& weather,
    std::size_t days, const PoolSettings& settings,
    const ExcitationPolicy& excitation, std::uint64_t seed) {
  if (days == 0) throw InvalidArgument("identification needs at least one day");
  const std::size_t H = settings.grid.horizon_steps;
  excitation.validate(H);
  std::vector<BuildingParams> p(params.begin(), params.end());
  BuildingPool excited(p, weather, settings, seed);
  BuildingPool nominal(p, weather, settings, seed);
  if (excited.slots_available() < days * H) {
    throw InvalidArgument("weather covers fewer than " + std::to_string(days) +
                          " identification days");
  }
  const std::size_t n = p.size();
  IdentificationData data;
  data.excited.resize(n);
  data.nominal.resize(n);
  for (auto* logs : {&data.excited, &data.nominal}) {
    for (auto& log : *logs) {
      log.start = 0;
      log.dt = settings.grid.dt_request;
    }
  }
  std::vector<Rng> rngs;
  for (std::size_t i = 0; i < n; ++i) rngs.push_back(make_rng(seed, 0x10000 + i));

  std::vector<SlotCommand> commands(n), idle(n);
  for (std::size_t d = 0; d < days; ++d) {
    const auto fc = excited.forecast(H);
    std::vector<std::vector<double>> r(n, std::vector<double>(H, 0.0));
    std::vector<std::vector<std::uint8_t>> on(n, std::vector<std::uint8_t>(H, 0));
    if (excitation.enabled) {
      const std::size_t section = H / excitation.requests_per_day;
      const std::size_t len = excitation.length_slots;
      for (std::size_t i = 0; i < n; ++i) {
        auto& rng = rngs[i];
        for (std::size_t q = 0; q < excitation.requests_per_day; ++q) {
          std::uniform_int_distribution<std::size_t> offset(0, section - 2 * len);
          std::bernoulli_distribution positive(0.5);
          std::uniform_real_distribution<double> frac(excitation.min_fraction,
                                                      excitation.max_fraction);
          const std::size_t start = q * section + offset(rng);
          const bool up = positive(rng);
          const double f = frac(rng);
          double room = std::numeric_limits<double>::infinity();
          for (std::size_t t = start; t < start + len; ++t) {
            room = std::min(room, up ? p[i].max_power - fc.power[i][t] : fc.power[i][t]);
          }
          if (!(room > 0.0)) continue;
          for (std::size_t t = start; t < start + len; ++t) {
            r[i][t] = (up ? 1.0 : -1.0) * f * room;
            on[i][t] = 1;
          }
        }
      }
    }
    for (std::size_t t = 0; t < H; ++t) {
      const std::size_t slot = excited.slot();
      for (std::size_t i = 0; i < n; ++i) {
        const auto features = excited.slot_features(slot);
        data.excited[i].state.push_back(excited.true_state(i));
        data.excited[i].conditions.push_back(features);
        data.excited[i].baseline_kw.push_back(fc.power[i][t]);
        data.nominal[i].state.push_back(nominal.true_state(i));
        data.nominal[i].conditions.push_back(features);
        commands[i] = {on[i][t] != 0, fc.power[i][t] + r[i][t], fc.power[i][t]};
      }
      const auto out = excited.step_slot(commands);
      const auto nom = nominal.step_slot(idle);
      for (std::size_t i = 0; i < n; ++i) {
        data.excited[i].request_kw.push_back(on[i][t] ? out.power_kw[i] - fc.power[i][t] : 0.0);
        data.nominal[i].request_kw.push_back(0.0);
        data.nominal[i].baseline_kw.push_back(nom.power_kw[i]);
      }
    }
  }
  return data;
}

}  // namespace flexsched
