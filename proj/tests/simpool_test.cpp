#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "flexsched/errors.hpp"
#include "flexsched/simpool.hpp"

namespace flexsched {
namespace {

ExternalConditions constant_weather(std::size_t steps, double t_out, double ghi) {
  return ExternalConditions(TimeSeries(0, 300, std::vector<double>(steps, t_out)),
                            TimeSeries(0, 300, std::vector<double>(steps, ghi)));
}

std::vector<BuildingParams> sample_params(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<BuildingParams> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_building(rng));
  return out;
}

TEST(SampleBuilding, PowerScalingEndpoints) {
  EXPECT_DOUBLE_EQ(scaled_max_power(0.2), 2.0);
  EXPECT_DOUBLE_EQ(scaled_max_power(0.5), 5.0);
  EXPECT_DOUBLE_EQ(scaled_max_power(0.9), 5.0);
}

TEST(SampleBuilding, DrawsInsideIntervals) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    auto p = sample_building(rng);
    EXPECT_GE(p.capacity, 2.77);
    EXPECT_LE(p.capacity, 11.11);
    EXPECT_GE(p.conductance, 0.2);
    EXPECT_LE(p.conductance, 0.5);
    EXPECT_GE(p.max_power, 2.0);
    EXPECT_LE(p.max_power, 5.0);
    EXPECT_GE(p.cop, 4.0);
    EXPECT_LE(p.cop, 5.0);
  }
}

TEST(StepBuilding, Equilibrium) {
  BuildingParams p;
  BuildingState s;
  s.temp = 5.0;
  auto n = step_building(s, p, 0.0, {5.0, 0.0}, 300);
  EXPECT_DOUBLE_EQ(n.temp, 5.0);
}

TEST(StepBuilding, HandEulerStep) {
  BuildingParams p{5.0, 0.25, 4.0, 4.0, 3.0};
  BuildingState s;
  s.temp = 20.0;
  auto n = step_building(s, p, 1.0, {0.0, 0.0}, 300);
  EXPECT_NEAR(n.temp, 20.0 + (16.0 - 5.0) / 5.0 / 12.0, 1e-12);
}

TEST(StepBuilding, SteadyStateFraction) {
  BuildingParams p{5.0, 0.25, 4.0, 4.0, 3.0};
  const double u = steady_state_fraction(p, 21.0, {1.0, 0.0});
  EXPECT_NEAR(u, 0.25 * 20.0 / 16.0, 1e-12);
  BuildingState s;
  s.temp = 21.0;
  EXPECT_NEAR(step_building(s, p, u, {1.0, 0.0}, 300).temp, 21.0, 1e-12);
}

TEST(StepBuilding, CoolsWithoutHeating) {
  BuildingParams p;
  BuildingState s;
  s.temp = 21.0;
  for (int i = 0; i < 50; ++i) {
    auto n = step_building(s, p, 0.0, {-3.0, 0.0}, 300);
    EXPECT_LT(n.temp, s.temp);
    s = n;
  }
}

TEST(Pid, ZeroErrorZeroOutput) {
  BuildingState s;
  s.temp = 21.0;
  EXPECT_EQ(pid_control(s, ComfortSpec{}, PidGains{}, 300), 0.0);
}

TEST(Pid, ClampsAndFreezesIntegrator) {
  BuildingState s;
  s.temp = 10.0;
  PidGains g;
  const double out = pid_control(s, ComfortSpec{}, g, 300);
  EXPECT_EQ(out, 1.0);
  EXPECT_EQ(s.integrator, 0.0);
}

TEST(Pid, ProportionalOnly) {
  BuildingState s;
  s.temp = 20.0;
  PidGains g{0.3, 0.0, 0.0};
  EXPECT_NEAR(pid_control(s, ComfortSpec{}, g, 300), 0.3, 1e-15);
}

TEST(TrueState, Endpoints) {
  BuildingParams p;
  ComfortSpec spec;
  auto w = constant_weather(2000, 0.0, 0.0);
  BuildingState s;
  s.temp = spec.lower;
  EXPECT_EQ(true_state(s, p, spec, w, 0, 48), 0.0);
  s.temp = spec.upper;
  EXPECT_EQ(true_state(s, p, spec, w, 0, 48), 1.0);
}

TEST(TrueState, SymmetricBuildingAtMidpoint) {
  // Heating at full power against T_out chosen so that dT/dt at the midpoint
  // is +x with the pump on and -x with it off.
  BuildingParams p{5.0, 0.25, 2.0, 4.0, 0.0};
  ComfortSpec spec{21.5, 19.0, 24.0};
  const double mid = 21.5;
  // 8 - 0.25 (mid - T_out) = 0.25 (mid - T_out)  =>  T_out = mid - 16.
  auto w = constant_weather(5000, mid - 16.0, 0.0);
  BuildingState s;
  s.temp = mid;
  EXPECT_NEAR(true_state(s, p, spec, w, 0, 48), 0.5, 0.02);
}

TEST(Requests, SelfConsumption) {
  std::vector<double> g{5, 1}, pb{3, 3};
  EXPECT_EQ(gen_self_consumption_request(pb, g), (std::vector<double>{2, 0}));
  std::vector<double> z{0, 0};
  EXPECT_EQ(gen_self_consumption_request(pb, z), (std::vector<double>{0, 0}));
  EXPECT_EQ(gen_self_consumption_request(pb, pb), (std::vector<double>{0, 0}));
}

TEST(Requests, PeakReduction) {
  std::vector<double> p{10, 4};
  EXPECT_EQ(gen_peak_request(p, 6), (std::vector<double>{-4, 0}));
  EXPECT_EQ(gen_peak_request(p, 12), (std::vector<double>{0, 0}));
  std::vector<double> q{2, 4, 6};
  const double c = desired_peak(q, 1.0);
  EXPECT_EQ(c, 4.0);
  EXPECT_EQ(gen_peak_request(q, c), (std::vector<double>{0, 0, -2}));
  EXPECT_THROW(gen_peak_request(q, 0.0), InvalidArgument);
}

TEST(Pv, Production) {
  std::vector<double> ghi{1000, 0, 500, 1400};
  auto g = pv_production(ghi, 200);
  EXPECT_EQ(g[0], 200.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_EQ(g[2], 100.0);
  EXPECT_EQ(g[3], 200.0);
}

TEST(RescaleToMean, Linear) {
  std::vector<double> v{1, 2, 3};
  auto r = rescale_to_mean(v, 4.0);
  EXPECT_NEAR(r[0], 2, 1e-12);
  EXPECT_NEAR(r[2], 6, 1e-12);
  std::vector<double> z{0, 0};
  EXPECT_THROW(rescale_to_mean(z, 1.0), InvalidArgument);
}

TEST(Pool, NoLossesNoPower) {
  auto w = constant_weather(96 * 3, 21.0, 0.0);
  BuildingPool pool(sample_params(3, 4), w, PoolSettings{}, 4);
  auto trace = simulate_baseline(pool, 96);
  for (const auto& p : trace.power)
    for (double v : p) EXPECT_NEAR(v, 0.0, 1e-9);
}

TEST(Pool, NominalComfortAfterBurnIn) {
  auto w = synthetic_weather(4, 300, 9);
  BuildingPool pool(sample_params(8, 9), w, PoolSettings{}, 9);
  auto trace = simulate_baseline(pool, 96 * 3);
  const std::size_t burn = 96 * 3;
  for (const auto& temps : trace.temp) {
    ASSERT_GT(temps.size(), burn);
    for (std::size_t i = burn; i < temps.size(); ++i) {
      EXPECT_GE(temps[i], 19.0);
      EXPECT_LE(temps[i], 24.0);
    }
  }
  for (const auto& p : trace.power)
    EXPECT_GT(std::accumulate(p.begin(), p.end(), 0.0), 0.0);
}

TEST(Pool, DeterministicAndAggregateConsistent) {
  auto w = synthetic_weather(2, 300, 5);
  PoolSettings s;
  s.disturbance_std_kw = 0.05;
  BuildingPool a(sample_params(5, 5), w, s, 5), b(sample_params(5, 5), w, s, 5);
  auto ta = simulate_baseline(a, 96), tb = simulate_baseline(b, 96);
  EXPECT_EQ(ta.power, tb.power);
  EXPECT_EQ(ta.temp, tb.temp);
  auto agg = ta.aggregate_power();
  for (std::size_t t = 0; t < agg.size(); ++t) {
    double sum = 0;
    for (const auto& p : ta.power) sum += p[t];
    EXPECT_NEAR(agg[t], sum, 1e-9);
  }
}

TEST(Pool, ZeroPlanMatchesBaseline) {
  auto w = synthetic_weather(2, 300, 6);
  auto params = sample_params(4, 6);
  BuildingPool a(params, w, PoolSettings{}, 6), b(params, w, PoolSettings{}, 6);
  auto forecast = a.forecast(48);
  RequestPlan plan;
  plan.active.assign(4, std::vector<std::uint8_t>(48, 0));
  plan.request.assign(4, std::vector<double>(48, 0.0));
  auto followed = follow_request(a, plan, forecast);
  auto nominal = simulate_baseline(b, 48);
  EXPECT_EQ(followed.power, nominal.power);
}

TEST(Pool, FollowsToMaxPowerThenReboundLimited) {
  auto w = synthetic_weather(2, 300, 8);
  auto params = sample_params(3, 8);
  for (double sign : {1.0, -1.0}) {
    BuildingPool pool(params, w, PoolSettings{}, 8);
    auto forecast = pool.forecast(8);
    RequestPlan plan;
    plan.active.assign(3, std::vector<std::uint8_t>(8, 0));
    plan.request.assign(3, std::vector<double>(8, 0.0));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t t = 0; t < 4; ++t) {
        plan.active[i][t] = 1;
        plan.request[i][t] = sign > 0 ? params[i].max_power - forecast.power[i][t]
                                      : -forecast.power[i][t];
      }
    }
    auto trace = follow_request(pool, plan, forecast);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(trace.power[i][0], sign > 0 ? params[i].max_power : 0.0, 1e-9);
      EXPECT_LE(trace.power[i][4], 1.2 * forecast.power[i][4] + 1e-9);
      EXPECT_GE(trace.power[i][4], 0.8 * forecast.power[i][4] - 1e-9);
    }
  }
}

TEST(Greedy, ZeroRequestNoActivations) {
  auto w = synthetic_weather(2, 300, 12);
  auto params = sample_params(3, 12);
  BuildingPool pool(params, w, PoolSettings{}, 12);
  auto forecast = pool.forecast(96);
  std::vector<FlexibilityEnvelope> env(3);
  for (auto& e : env) {
    e.lower.assign(96, -1);
    e.upper.assign(96, 1);
  }
  std::vector<double> r(96, 0.0);
  Rng rng(1);
  auto trace = greedy_baseline(pool, env, r, forecast, 36, rng);
  for (const auto& m : trace.mode)
    for (auto v : m) EXPECT_NE(v, static_cast<std::uint8_t>(BuildingMode::Following));
}

TEST(Greedy, ExhaustsPoolOnHugeRequest) {
  auto w = synthetic_weather(2, 300, 13);
  auto params = sample_params(4, 13);
  BuildingPool pool(params, w, PoolSettings{}, 13);
  auto forecast = pool.forecast(8);
  std::vector<FlexibilityEnvelope> env(4);
  for (auto& e : env) {
    e.lower.assign(8, -0.5);
    e.upper.assign(8, 0.5);
  }
  std::vector<double> r(8, -1000.0);
  Rng rng(2);
  auto trace = greedy_baseline(pool, env, r, forecast, 36, rng);
  for (const auto& m : trace.mode)
    EXPECT_EQ(m[0], static_cast<std::uint8_t>(BuildingMode::Following));
}

TEST(Identification, ExcitationDisabledGivesZeroRequests) {
  auto w = synthetic_weather(3, 300, 21);
  auto params = sample_params(2, 21);
  ExcitationPolicy ex;
  ex.enabled = false;
  auto data = collect_identification_data(params, w, 2, PoolSettings{}, ex, 21);
  ASSERT_EQ(data.excited.size(), 2u);
  for (const auto& log : data.excited)
    for (double r : log.request_kw) EXPECT_EQ(r, 0.0);
}

TEST(Identification, LogsStateInUnitIntervalAndRequests) {
  auto w = synthetic_weather(4, 300, 22);
  auto params = sample_params(3, 22);
  auto data = collect_identification_data(params, w, 3, PoolSettings{},
                                          ExcitationPolicy{}, 22);
  for (const auto& log : data.excited) {
    EXPECT_EQ(log.size(), 3u * 96u);
    for (double s : log.state) {
      EXPECT_GE(s, 0.0);
      EXPECT_LE(s, 1.0);
    }
    // Count request runs: two per day.
    std::size_t runs = 0;
    for (std::size_t t = 0; t < log.size(); ++t)
      if (log.request_kw[t] != 0 && (t == 0 || log.request_kw[t - 1] == 0)) ++runs;
    EXPECT_GE(runs, 6u);
  }
}

TEST(WeatherIo, RoundTrip) {
  auto w = synthetic_weather(1, 300, 3);
  auto path = std::filesystem::temp_directory_path() / "flexsched_weather_test.csv";
  write_weather_csv(w, path);
  auto back = read_weather_csv(path);
  EXPECT_EQ(back.size(), w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    EXPECT_EQ(back.outdoor_temp[i], w.outdoor_temp[i]);
    EXPECT_EQ(back.irradiance[i], w.irradiance[i]);
  }
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace flexsched
