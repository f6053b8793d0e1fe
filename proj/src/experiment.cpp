#include "flexsched/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>

#include "flexsched/csv.hpp"
#include "flexsched/errors.hpp"
#include "flexsched/milp/lp_format.hpp"
#include "flexsched/milp/lp_solver.hpp"

namespace flexsched {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr std::uint64_t kStreamBuildings = 0xB000;
constexpr std::uint64_t kStreamWeather = 0xB001;
constexpr std::uint64_t kStreamConsumption = 0xB002;
constexpr std::uint64_t kStreamGreedy = 0xB003;
constexpr std::uint64_t kStreamBank = 0xB004;
constexpr std::uint64_t kStreamBankWeather = 0xB005;
constexpr std::uint64_t kStreamSimulation = 0xB006;

std::string indexed(const char* prefix, std::size_t i, const char* suffix) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%03zu%s", prefix, i, suffix);
  return buf;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::string method_label(const std::string& method, double alpha) {
  if (method != "scheduled") return method;
  return "scheduled_a" + csv::format(alpha);
}

// Per-building identification outcome, kept or not.
struct BuildingFit {
  std::optional<StorageModel> model;
  std::size_t n_plus = 0;
  std::size_t n_minus = 0;
  double b_f = std::numeric_limits<double>::quiet_NaN();
  std::string reason;
};

BuildingFit fit_building(const ExperimentConfig& config, std::size_t index,
                         const OperationLog& excited, const OperationLog& nominal) {
  BuildingFit fit;
  const auto& id = config.identification;
  StorageModel m;
  m.baseline = fit_baseline_model(nominal.conditions, nominal.state, std::nullopt, id.ridge);
  auto samples = identify_request_samples(excited, m.baseline, id.delta);
  fit.n_plus = samples.plus.size();
  fit.n_minus = samples.minus.size();
  if (fit.n_plus < id.min_samples || fit.n_minus < id.min_samples) {
    fit.reason = "building " + std::to_string(index) + " excluded: " +
                 std::to_string(fit.n_plus) + " P+ and " + std::to_string(fit.n_minus) +
                 " P- samples";
    return fit;
  }
  try {
    m.b_f = identify_recovery_parameter(excited, m.baseline, id.delta);
  } catch (const InvalidArgument& e) {
    fit.reason = "building " + std::to_string(index) + " excluded: " + e.what();
    return fit;
  }
  fit.b_f = m.b_f;
  m.p_plus = std::move(samples.plus);
  m.p_minus = std::move(samples.minus);
  m.validate();
  fit.model = std::move(m);
  return fit;
}

std::vector<double> consumption_source(const ExperimentConfig& config) {
  const auto& grid = config.pool.grid;
  const std::size_t need = config.test_days * grid.horizon_steps;
  TimeSeries series;
  if (config.consumption_csv.empty()) {
    series = synthetic_consumption(config.test_days, grid.dt_request,
                                   derive_seed(config.seed, kStreamConsumption));
  } else {
    series = read_consumption_csv(config.consumption_csv);
    if (series.dt() != grid.dt_request) {
      if (series.dt() > grid.dt_request || grid.dt_request % series.dt() != 0) {
        throw ConfigError("consumption CSV step " + std::to_string(series.dt()) +
                          " s cannot be averaged onto " + std::to_string(grid.dt_request) +
                          " s slots");
      }
      series = resample_mean(series, grid.dt_request);
    }
  }
  if (series.size() < need) {
    throw ConfigError("consumption data holds " + std::to_string(series.size()) +
                      " slots, the test period needs " + std::to_string(need));
  }
  return {series.values().begin(), series.values().begin() + static_cast<std::ptrdiff_t>(need)};
}

// Inputs of one day for one pool copy.
struct DayPlan {
  NominalForecast forecast;  // H + k slots
  std::vector<FlexibilityEnvelope> envelopes;
  std::vector<double> baseline_agg;  // H
  std::vector<double> total;         // baseline + non-shiftable
  std::vector<double> pv;
  std::vector<double> request;
  double peak_target = 0.0;
};

DayPlan plan_day(const BuildingPool& pool, std::span<const StorageModel> models,
                 std::span<const std::size_t> ids, const ExperimentConfig& config,
                 milp::ScheduleKind kind, double alpha,
                 std::span<const double> nonshiftable) {
  const std::size_t H = config.pool.grid.horizon_steps;
  const std::size_t k = config.k;
  const std::size_t n = pool.size();
  DayPlan plan;
  plan.forecast = pool.forecast(H + k);
  std::vector<std::vector<double>> features(H + k);
  std::vector<double> ghi(H);
  for (std::size_t j = 0; j < H + k; ++j) {
    features[j] = pool.slot_features(pool.slot() + j);
    if (j < H) ghi[j] = features[j][1] * 100.0;
  }
  plan.envelopes.reserve(n);
  plan.baseline_agg.assign(H, 0.0);
  std::vector<double> f(H + k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& model = models[i];
    for (std::size_t j = 0; j < H + k; ++j) f[j] = model.baseline.predict(features[j]);
    const auto& pb = plan.forecast.power[i];
    const std::size_t tuples = model.p_plus.size() * model.p_minus.size();
    auto env = compute_envelope(model, std::span<const double>(pb).first(H + k - 1), f,
                                PowerBounds{0.0, pool.params(i).max_power}, k,
                                RiskLevel::from_alpha(alpha, tuples), H);
    env.asset_id = "b" + std::to_string(ids[i]);
    plan.envelopes.push_back(std::move(env));
    for (std::size_t t = 0; t < H; ++t) plan.baseline_agg[t] += pb[t];
  }
  plan.total.resize(H);
  for (std::size_t t = 0; t < H; ++t) plan.total[t] = plan.baseline_agg[t] + nonshiftable[t];
  plan.pv = pv_production(ghi, config.pv_kw_per_building * static_cast<double>(n));
  if (kind == milp::ScheduleKind::PeakReduction) {
    plan.peak_target = desired_peak(plan.total, config.peak_factor);
    plan.request = gen_peak_request(plan.total, plan.peak_target);
  } else {
    plan.request = gen_self_consumption_request(plan.baseline_agg, plan.pv);
  }
  return plan;
}

milp::SchedulingProblem build_scenario(milp::ScheduleKind kind, const DayPlan& plan,
                                       std::size_t k) {
  if (kind == milp::ScheduleKind::PeakReduction) {
    return milp::build_peak_reduction(plan.envelopes, plan.total, plan.request, k);
  }
  return milp::build_self_consumption(plan.envelopes, plan.request, k);
}

milp::SolverOptions solver_options(const ExperimentConfig& config, milp::ScheduleKind kind,
                                   const DayPlan& plan) {
  milp::SolverOptions opt;
  const double scale = kind == milp::ScheduleKind::PeakReduction
                           ? plan.peak_target
                           : std::accumulate(plan.request.begin(), plan.request.end(), 0.0);
  opt.abs_gap = config.mip.gap_fraction * scale;
  opt.time_limit_s = config.mip.time_limit_s;
  opt.node_limit = config.mip.node_limit;
  return opt;
}

struct DayResult {
  Trace trace;
  std::vector<double> committed;
  bool skipped = false;
};

DayResult run_scheduled_day(BuildingPool& pool, const DayPlan& plan,
                            const ExperimentConfig& config, milp::ScheduleKind kind,
                            const std::string& label, std::size_t day,
                            std::vector<std::string>& warnings) {
  const std::size_t H = config.pool.grid.horizon_steps;
  const std::size_t n = pool.size();
  DayResult out;
  out.committed.assign(H, 0.0);
  RequestPlan rp;
  rp.active.assign(n, std::vector<std::uint8_t>(H, 0));
  rp.request.assign(n, std::vector<double>(H, 0.0));
  const bool any = std::any_of(plan.request.begin(), plan.request.end(),
                               [](double r) { return r != 0.0; });
  if (any) {
    const auto sp = build_scenario(kind, plan, config.k);
    const auto sched = milp::solve_schedule(sp, solver_options(config, kind, plan));
    if (!sched.usable()) {
      out.skipped = true;
      warnings.push_back(label + " day " + std::to_string(day) + " skipped: solver status " +
                         milp::to_string(sched.status));
    } else {
      std::vector<double> weights(n), lower(n), upper(n);
      for (std::size_t i = 0; i < n; ++i) weights[i] = flexibility_weight(plan.envelopes[i]);
      for (std::size_t t = 0; t < H; ++t) {
        double rc = sched.committed[t];
        if (std::abs(rc) <= 1e-9 * std::max(1.0, std::abs(plan.request[t]))) rc = 0.0;
        out.committed[t] = rc;
        if (rc == 0.0) continue;
        const auto active = activity_column(sched, t);
        double lo_sum = 0.0, hi_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t s = sched.start_of(i);
          lower[i] = active[i] ? plan.envelopes[i].lower[s] : 0.0;
          upper[i] = active[i] ? plan.envelopes[i].upper[s] : 0.0;
          lo_sum += lower[i];
          hi_sum += upper[i];
        }
        DispatchResult d;
        try {
          switch (config.dispatch) {
            case DispatchMode::Heuristic:
              d = heuristic_dispatch(rc, weights, active);
              break;
            case DispatchMode::Repaired:
              d = heuristic_dispatch(rc, weights, active);
              d = repair_dispatch(d.shares, lower, upper, active, rc);
              break;
            case DispatchMode::Balanced:
              d = balanced_dispatch(std::clamp(rc, lo_sum, hi_sum), lower, upper, active);
              break;
          }
        } catch (const InvalidArgument& e) {
          warnings.push_back(label + " day " + std::to_string(day) + " slot " +
                             std::to_string(t) + " not dispatched: " + e.what());
          continue;
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (!active[i]) continue;
          rp.active[i][t] = 1;
          rp.request[i][t] = d.shares[i];
        }
      }
    }
  }
  out.trace = follow_request(pool, rp, plan.forecast);
  return out;
}

// One simulated method over the test period of a scenario.
struct MethodRun {
  std::string method;
  double alpha = 0.0;
  BuildingPool pool;
  Rng rng;
  Trace trace;
  std::vector<double> request, committed, forecast_agg;
  std::vector<std::uint8_t> skipped_days;
};

void write_aggregate_csv(const std::vector<MethodRun>& runs,
                         std::span<const double> nonshiftable, std::span<const double> pv,
                         const TimeGrid& grid, std::size_t first_slot,
                         const std::filesystem::path& path) {
  csv::Writer w(path);
  std::vector<std::string> header{"t_s", "nonshiftable_kw", "pv_kw"};
  for (const auto& r : runs) {
    const auto label = method_label(r.method, r.alpha);
    for (const char* col : {"_forecast_kw", "_request_kw", "_committed_kw", "_actual_kw"}) {
      header.push_back(label + col);
    }
  }
  w.header(header);
  std::vector<std::vector<double>> agg;
  for (const auto& r : runs) agg.push_back(r.trace.aggregate_power());
  std::vector<double> row;
  for (std::size_t t = 0; t < nonshiftable.size(); ++t) {
    row.clear();
    row.push_back(static_cast<double>((first_slot + t) * static_cast<std::size_t>(grid.dt_request)));
    row.push_back(nonshiftable[t]);
    row.push_back(pv[t]);
    for (std::size_t m = 0; m < runs.size(); ++m) {
      row.push_back(runs[m].forecast_agg[t]);
      row.push_back(runs[m].request[t]);
      row.push_back(runs[m].committed[t]);
      row.push_back(agg[m][t]);
    }
    w.row(row);
  }
  w.close();
}

MetricReport evaluate(const MethodRun& run, const MethodRun& nominal,
                      std::span<const double> nonshiftable, std::span<const double> pv,
                      const ExperimentConfig& config, const std::string& scenario) {
  const std::size_t H = config.pool.grid.horizon_steps;
  const std::size_t sub = config.pool.grid.substeps();
  const auto& comfort = config.pool.comfort;
  MetricReport rep;
  rep.scenario = scenario;
  rep.method = method_label(run.method, run.alpha);
  rep.alpha = run.alpha;
  const auto agg = run.trace.aggregate_power();
  const auto nom = nominal.trace.aggregate_power();
  std::vector<double> total(agg.size()), nom_total(agg.size());
  for (std::size_t t = 0; t < agg.size(); ++t) {
    total[t] = agg[t] + nonshiftable[t];
    nom_total[t] = nom[t] + nonshiftable[t];
  }
  double dpa = 0.0;
  for (std::size_t d = 0; d < config.test_days; ++d) {
    DayMetrics dm;
    dm.day = d;
    dm.skipped = run.skipped_days[d] != 0;
    const std::span<const double> day_total(total.data() + d * H, H);
    const std::span<const double> day_nom(nom_total.data() + d * H, H);
    dm.delta_p_a = peak_power_reduction(day_nom, day_total);
    const std::span<const double> day_pv(pv.data() + d * H, H);
    const std::span<const double> day_agg(agg.data() + d * H, H);
    dm.delta_s_r = std::accumulate(day_pv.begin(), day_pv.end(), 0.0) > 0.0
                       ? self_consumed_fraction(day_pv, day_agg)
                       : std::numeric_limits<double>::quiet_NaN();
    std::vector<std::vector<double>> temps(run.trace.buildings);
    for (std::size_t i = 0; i < run.trace.buildings; ++i) {
      const auto& T = run.trace.temp[i];
      temps[i].assign(T.begin() + static_cast<std::ptrdiff_t>(d * H * sub),
                      T.begin() + static_cast<std::ptrdiff_t>((d + 1) * H * sub));
    }
    dm.delta_t_r = temp_violation_pct_pooled(temps, comfort.lower, comfort.upper);
    dpa += dm.delta_p_a;
    if (dm.skipped) ++rep.days_skipped;
    rep.days.push_back(dm);
  }
  rep.delta_p_a = dpa / static_cast<double>(config.test_days);
  rep.delta_s_r = std::accumulate(pv.begin(), pv.end(), 0.0) > 0.0
                      ? self_consumed_fraction(pv, agg)
                      : std::numeric_limits<double>::quiet_NaN();
  rep.delta_t_r = temp_violation_pct_pooled(run.trace.temp, comfort.lower, comfort.upper);
  double se = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < agg.size(); ++t) {
    if (run.committed[t] == 0.0) continue;
    const double e = agg[t] - run.forecast_agg[t] - run.committed[t];
    se += e * e;
    ++count;
  }
  rep.tracking_rmse = count ? std::sqrt(se / static_cast<double>(count)) : 0.0;
  return rep;
}

std::vector<std::string> relative(const std::vector<std::filesystem::path>& paths,
                                  const std::filesystem::path& base) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(std::filesystem::relative(p, base).generic_string());
  return out;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
}

}  // namespace

std::vector<BuildingParams> sample_pool(const ExperimentConfig& config) {
  Rng rng = make_rng(config.seed, kStreamBuildings);
  std::vector<BuildingParams> params;
  params.reserve(config.buildings);
  for (std::size_t i = 0; i < config.buildings; ++i) {
    params.push_back(sample_building(rng, config.solar_aperture));
  }
  return params;
}

ExternalConditions load_weather(const ExperimentConfig& config) {
  const auto& grid = config.pool.grid;
  const std::size_t days = config.train_days + config.test_days + 2;
  if (config.weather_csv.empty()) {
    return synthetic_weather(days, grid.dt_control, derive_seed(config.seed, kStreamWeather),
                             config.synthetic_weather);
  }
  auto w = read_weather_csv(config.weather_csv);
  if (w.dt() != grid.dt_control) {
    if (w.dt() > grid.dt_control || grid.dt_control % w.dt() != 0) {
      throw ConfigError("weather CSV step " + std::to_string(w.dt()) +
                        " s cannot be averaged onto the " + std::to_string(grid.dt_control) +
                        " s control step");
    }
    w = ExternalConditions(resample_mean(w.outdoor_temp, grid.dt_control),
                           resample_mean(w.irradiance, grid.dt_control));
  }
  const std::size_t need = days * grid.horizon_steps * grid.substeps();
  if (w.size() < need) {
    throw ConfigError("weather data holds " + std::to_string(w.size()) +
                      " control steps, the experiment needs " + std::to_string(need));
  }
  return w;
}

IdentifiedPool identify_pool(const ExperimentConfig& config,
                             std::span<const BuildingParams> params,
                             const ExternalConditions& weather) {
  IdentifiedPool out;
  if (!config.models_dir.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto path = config.models_dir / indexed("model_", i, ".json");
      if (!std::filesystem::exists(path)) {
        out.warnings.push_back("building " + std::to_string(i) + " excluded: no model file " +
                               path.string());
        continue;
      }
      out.building.push_back(i);
      out.models.push_back(read_storage_model(path));
    }
  } else {
    const auto data = collect_identification_data(params, weather, config.train_days,
                                                  config.pool, config.excitation, config.seed);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto fit = fit_building(config, i, data.excited[i], data.nominal[i]);
      if (!fit.model) {
        out.warnings.push_back(fit.reason);
        continue;
      }
      out.building.push_back(i);
      out.models.push_back(std::move(*fit.model));
    }
  }
  if (out.models.empty()) throw InvalidArgument("no building has a usable storage model");
  return out;
}

RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const auto& grid = config.pool.grid;
  const std::size_t H = grid.horizon_steps;
  const std::size_t slots = config.test_days * H;
  RunResult result;

  const auto all_params = sample_pool(config);
  const auto weather = load_weather(config);
  auto ident = identify_pool(config, all_params, weather);
  result.warnings = ident.warnings;
  std::vector<BuildingParams> params;
  for (auto i : ident.building) params.push_back(all_params[i]);
  result.buildings = params.size();

  BuildingPool warm(params, weather, config.pool, derive_seed(config.seed, kStreamSimulation));
  simulate_baseline(warm, config.train_days * H);
  const std::size_t first_slot = warm.slot();

  std::vector<double> nonshiftable(slots, 0.0);
  if (config.nonshiftable_ratio > 0.0) {
    BuildingPool probe = warm;
    const auto nominal = simulate_baseline(probe, slots).aggregate_power();
    nonshiftable = rescale_to_mean(consumption_source(config),
                                   mean(nominal) * config.nonshiftable_ratio);
  }
  std::vector<double> pv(slots, 0.0);
  {
    std::vector<double> ghi(slots);
    for (std::size_t t = 0; t < slots; ++t) ghi[t] = warm.slot_features(first_slot + t)[1] * 100.0;
    pv = pv_production(ghi, config.pv_kw_per_building * static_cast<double>(params.size()));
  }

  const bool write = config.write_trajectories && !out_dir.empty();
  if (write) ensure_dir(out_dir);

  for (auto kind : config.scenarios) {
    const std::string scenario = milp::to_string(kind);
    std::vector<MethodRun> runs;
    auto add = [&](std::string method, double alpha, std::uint64_t stream) {
      runs.push_back(MethodRun{std::move(method), alpha, warm,
                               make_rng(config.seed, stream), {}, {}, {}, {}, {}});
    };
    add("nominal", 0.0, kStreamGreedy);
    for (double a : config.alphas) add("scheduled", a, kStreamGreedy);
    if (config.greedy) add("greedy", config.greedy_alpha, kStreamGreedy);

    for (auto& run : runs) {
      for (std::size_t d = 0; d < config.test_days; ++d) {
        const std::span<const double> ns(nonshiftable.data() + d * H, H);
        const double alpha = run.method == "nominal" ? 1.0 : run.alpha;
        const auto plan = plan_day(run.pool, ident.models, ident.building, config, kind, alpha, ns);
        const std::string label = scenario + "/" + method_label(run.method, run.alpha);
        DayResult day;
        if (run.method == "nominal") {
          day.committed.assign(H, 0.0);
          day.trace = simulate_baseline(run.pool, H);
        } else if (run.method == "greedy") {
          day.trace = greedy_baseline(run.pool, plan.envelopes, plan.request, plan.forecast,
                                      config.k, run.rng);
          day.committed = plan.request;
        } else {
          day = run_scheduled_day(run.pool, plan, config, kind, label, d, result.warnings);
        }
        run.trace.append(day.trace);
        run.request.insert(run.request.end(), plan.request.begin(), plan.request.end());
        run.committed.insert(run.committed.end(), day.committed.begin(), day.committed.end());
        for (std::size_t t = 0; t < H; ++t) {
          double s = 0.0;
          for (const auto& p : plan.forecast.power) s += p[t];
          run.forecast_agg.push_back(s);
        }
        run.skipped_days.push_back(day.skipped ? 1 : 0);
      }
    }
    for (const auto& run : runs) {
      result.reports.push_back(evaluate(run, runs.front(), nonshiftable, pv, config, scenario));
    }
    if (write) {
      write_aggregate_csv(runs, nonshiftable, pv, grid, first_slot,
                          out_dir / ("aggregate_" + scenario + ".csv"));
      for (const auto& run : runs) {
        write_trace_csv(run.trace, grid,
                        out_dir / ("trajectory_" + scenario + "_" +
                                   method_label(run.method, run.alpha) + ".csv"));
      }
    }
  }
  return result;
}

// Envelope bank -----------------------------------------------------------------

std::vector<double> EnvelopeBank::baseline_agg(std::size_t n) const {
  if (n > size()) throw InvalidArgument("envelope bank holds fewer assets than requested");
  const std::size_t H = nonshiftable_shape.size();
  std::vector<double> agg(H, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < H; ++t) agg[t] += baseline[i][t];
  }
  return agg;
}

std::vector<double> EnvelopeBank::consumption(std::size_t n, double nonshiftable_ratio) const {
  auto agg = baseline_agg(n);
  const double scale = mean(agg) * nonshiftable_ratio;
  for (std::size_t t = 0; t < agg.size(); ++t) agg[t] += scale * nonshiftable_shape[t];
  return agg;
}

EnvelopeBank make_envelope_bank(std::size_t count, std::size_t k, std::size_t horizon,
                                std::uint64_t seed, double alpha) {
  if (count == 0) throw InvalidArgument("envelope bank needs at least one asset");
  PoolSettings settings;
  settings.grid.horizon_steps = horizon;
  settings.validate();
  if (k == 0 || k > horizon) throw InvalidArgument("envelope bank: k must lie in [1, horizon]");
  Rng rng = make_rng(seed, kStreamBank);
  std::vector<BuildingParams> params;
  for (std::size_t i = 0; i < count; ++i) params.push_back(sample_building(rng));
  const std::size_t days = 2 + (k + 24) / horizon + 1;
  auto weather = synthetic_weather(days, settings.grid.dt_control,
                                   derive_seed(seed, kStreamBankWeather));
  BuildingPool pool(params, weather, settings, seed);
  simulate_baseline(pool, horizon);
  const auto fc = pool.forecast(horizon + k, true);

  EnvelopeBank bank;
  const double dt_h = static_cast<double>(settings.grid.dt_request) / 3600.0;
  const std::size_t step = pool.control_step();
  std::normal_distribution<double> spread(0.0, 0.15);
  constexpr std::size_t kSamples = 5;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& p = params[i];
    BuildingState warmer = pool.state(i), colder = pool.state(i);
    warmer.temp += 0.25;
    colder.temp -= 0.25;
    const double ds_dT =
        (true_state(warmer, p, settings.comfort, weather, step, settings.true_state_cap_hours) -
         true_state(colder, p, settings.comfort, weather, step, settings.true_state_cap_hours)) /
        0.5;
    const double a = p.cop * dt_h / p.capacity * std::max(ds_dT, 1e-3);
    std::vector<double> plus(kSamples), minus(kSamples);
    for (auto& v : plus) v = a * std::exp(spread(rng));
    for (auto& v : minus) v = a * std::exp(spread(rng));
    const auto risk = RiskLevel::from_alpha(alpha, kSamples * kSamples);
    const auto& pb = fc.power[i];
    auto env = compute_envelope(plus, minus, std::span<const double>(pb).first(horizon + k - 1),
                                fc.state[i], PowerBounds{0.0, p.max_power}, k, risk.j, horizon);
    env.alpha = risk.alpha();
    env.asset_id = "a" + std::to_string(i);
    bank.envelopes.push_back(std::move(env));
    bank.baseline.emplace_back(pb.begin(), pb.begin() + static_cast<std::ptrdiff_t>(horizon));
  }
  const auto shape = synthetic_consumption(1, settings.grid.dt_request,
                                           derive_seed(seed, kStreamConsumption));
  bank.nonshiftable_shape = rescale_to_mean(shape.values().first(horizon), 1.0);
  for (std::size_t t = 0; t < horizon; ++t) {
    bank.ghi.push_back(pool.slot_features(pool.slot() + t)[1] * 100.0);
  }
  return bank;
}

// Benchmark ---------------------------------------------------------------------

std::vector<BenchRow> run_bench(const ExperimentConfig& config,
                                const std::filesystem::path& out_dir) {
  config.validate();
  const auto& b = config.bench;
  const std::size_t H = config.pool.grid.horizon_steps;
  const std::size_t max_count = *std::max_element(b.counts.begin(), b.counts.end());
  const auto bank = make_envelope_bank(max_count, config.k, H, config.seed, 1.0);
  std::vector<BenchRow> rows;
  auto summarize = [&](std::size_t assets, double tier, const char* stage,
                       const std::vector<double>& times, std::string status, double objective) {
    BenchRow row;
    row.assets = assets;
    row.tier = tier;
    row.stage = stage;
    row.repeats = times.size();
    row.mean_s = mean(times);
    row.min_s = *std::min_element(times.begin(), times.end());
    row.max_s = *std::max_element(times.begin(), times.end());
    row.status = std::move(status);
    row.objective = objective;
    row.single_sample = times.size() == 1;
    rows.push_back(std::move(row));
  };
  for (std::size_t count : b.counts) {
    const std::span<const FlexibilityEnvelope> envs(bank.envelopes.data(), count);
    const auto total = bank.consumption(count, config.nonshiftable_ratio);
    for (std::size_t ti = 0; ti < b.tiers.size(); ++ti) {
      const double tier = b.tiers[ti];
      const double c = desired_peak(total, tier);
      const auto r = gen_peak_request(total, c);
      std::vector<double> build_t, lp_t;
      std::optional<milp::SchedulingProblem> sp;
      milp::LpSolution lp;
      for (std::size_t rep = 0; rep < b.repeats; ++rep) {
        auto t0 = Clock::now();
        sp = milp::build_peak_reduction(envs, total, r, config.k);
        build_t.push_back(since(t0));
        t0 = Clock::now();
        milp::LpRelaxation relax(sp->problem);
        lp = relax.solve();
        lp_t.push_back(since(t0));
      }
      summarize(count, tier, "build", build_t, "ok", 0.0);
      summarize(count, tier, "lp_relaxation", lp_t, milp::to_string(lp.status),
                lp.status == milp::LpStatus::Optimal ? lp.objective : 0.0);
      if (count <= b.bnb_max_assets) {
        milp::SolverOptions opt;
        opt.abs_gap = config.mip.gap_fraction * c;
        opt.time_limit_s = b.bnb_time_limit_s;
        opt.node_limit = config.mip.node_limit;
        const auto t0 = Clock::now();
        const auto res = milp::solve_bnb(sp->problem, opt);
        summarize(count, tier, "bnb", {since(t0)}, milp::to_string(res.status),
                  res.has_solution() ? res.objective : 0.0);
      }
      if (b.export_lp && !out_dir.empty() && count == max_count && ti == 0) {
        ensure_dir(out_dir);
        const auto path = out_dir / ("bench_peak_reduction_" + std::to_string(count) + ".lp");
        const auto t0 = Clock::now();
        milp::write_lp(sp->problem, path);
        summarize(count, tier, "export_lp", {since(t0)}, "ok", 0.0);
      }
    }
  }
  return rows;
}

void write_bench_csv(std::span<const BenchRow> rows, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.header({"assets", "tier", "stage", "repeats", "mean_s", "min_s", "max_s", "status",
            "objective", "flag"});
  for (const auto& r : rows) {
    const std::vector<std::string> cells{
        std::to_string(r.assets), csv::format(r.tier), r.stage, std::to_string(r.repeats),
        csv::format(r.mean_s), csv::format(r.min_s), csv::format(r.max_s), r.status,
        csv::format(r.objective), r.single_sample ? "single_sample" : ""};
    w.raw_row(cells);
  }
  w.close();
}

// Commands ----------------------------------------------------------------------

std::vector<std::string> cmd_identify(const ExperimentConfig& config,
                                      const std::filesystem::path& out_dir,
                                      std::vector<std::string>& warnings) {
  config.validate();
  ensure_dir(out_dir);
  const auto params = sample_pool(config);
  const auto weather = load_weather(config);
  const auto data = collect_identification_data(params, weather, config.train_days, config.pool,
                                                config.excitation, config.seed);
  std::vector<std::filesystem::path> outputs;
  csv::Writer summary(out_dir / "identify_summary.csv");
  summary.header({"building", "kept", "n_plus", "n_minus", "b_f", "capacity_kwh_per_c",
                  "conductance_kw_per_c", "max_power_kw", "cop"});
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto excited = out_dir / "logs" / indexed("excited_", i, ".csv");
    const auto nominal = out_dir / "logs" / indexed("nominal_", i, ".csv");
    ensure_dir(excited.parent_path());
    write_operation_log(data.excited[i], excited);
    write_operation_log(data.nominal[i], nominal);
    outputs.push_back(excited);
    outputs.push_back(nominal);
    auto fit = fit_building(config, i, data.excited[i], data.nominal[i]);
    if (fit.model) {
      const auto path = out_dir / "models" / indexed("model_", i, ".json");
      write_storage_model(*fit.model, path);
      outputs.push_back(path);
    } else {
      warnings.push_back(fit.reason);
    }
    const auto& p = params[i];
    summary.row(std::vector<double>{static_cast<double>(i), fit.model ? 1.0 : 0.0,
                                    static_cast<double>(fit.n_plus),
                                    static_cast<double>(fit.n_minus), fit.b_f, p.capacity,
                                    p.conductance, p.max_power, p.cop});
  }
  summary.close();
  outputs.push_back(out_dir / "identify_summary.csv");
  return relative(outputs, out_dir);
}

std::vector<std::string> cmd_run(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir,
                                 std::vector<std::string>& warnings) {
  ensure_dir(out_dir);
  const auto result = run_experiment(config, out_dir);
  warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
  std::vector<std::filesystem::path> outputs{out_dir / "metrics_summary.csv",
                                             out_dir / "metrics_days.csv",
                                             out_dir / "metrics_table.txt"};
  write_metric_summary(result.reports, outputs[0]);
  write_metric_days(result.reports, outputs[1]);
  std::ofstream table(outputs[2]);
  table << format_metric_table(result.reports);
  if (!table) throw IoError("cannot write '" + outputs[2].string() + "'");
  if (config.write_trajectories) {
    for (auto kind : config.scenarios) {
      const std::string s = milp::to_string(kind);
      outputs.push_back(out_dir / ("aggregate_" + s + ".csv"));
      outputs.push_back(out_dir / ("trajectory_" + s + "_nominal.csv"));
      for (double a : config.alphas) {
        outputs.push_back(out_dir / ("trajectory_" + s + "_" + method_label("scheduled", a) + ".csv"));
      }
      if (config.greedy) outputs.push_back(out_dir / ("trajectory_" + s + "_greedy.csv"));
    }
  }
  return relative(outputs, out_dir);
}

std::vector<std::string> cmd_bench(const ExperimentConfig& config,
                                   const std::filesystem::path& out_dir,
                                   std::vector<std::string>& warnings) {
  ensure_dir(out_dir);
  const auto rows = run_bench(config, out_dir);
  std::vector<std::filesystem::path> outputs{out_dir / "bench.csv"};
  write_bench_csv(rows, outputs[0]);
  for (const auto& r : rows) {
    if (r.stage == "export_lp") {
      outputs.push_back(out_dir / ("bench_peak_reduction_" + std::to_string(r.assets) + ".lp"));
    }
    if (r.stage == "bnb" && r.status != milp::to_string(milp::MipStatus::Optimal)) {
      warnings.push_back("bnb at " + std::to_string(r.assets) + " assets, tier " +
                         csv::format(r.tier) + ": " + r.status);
    }
  }
  return relative(outputs, out_dir);
}

std::vector<std::string> cmd_export(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir,
                                    std::vector<std::string>& warnings) {
  config.validate();
  ensure_dir(out_dir);
  const auto kind = milp::parse_schedule_kind(config.export_lp.scenario);
  const std::string scenario = milp::to_string(kind);
  const std::size_t H = config.pool.grid.horizon_steps;
  std::vector<std::filesystem::path> outputs;
  if (config.export_lp.bank_assets > 0) {
    const std::size_t n = config.export_lp.bank_assets;
    const auto bank = make_envelope_bank(n, config.k, H, config.seed, config.export_lp.alpha);
    milp::SchedulingProblem sp;
    if (kind == milp::ScheduleKind::PeakReduction) {
      const auto total = bank.consumption(n, config.nonshiftable_ratio);
      const auto r = gen_peak_request(total, desired_peak(total, config.peak_factor));
      sp = milp::build_peak_reduction(bank.envelopes, total, r, config.k);
    } else {
      const auto pv = pv_production(bank.ghi, config.pv_kw_per_building * static_cast<double>(n));
      const auto r = gen_self_consumption_request(bank.baseline_agg(n), pv);
      sp = milp::build_self_consumption(bank.envelopes, r, config.k);
    }
    const auto path = out_dir / ("export_" + scenario + "_bank" + std::to_string(n) + ".lp");
    milp::write_lp(sp.problem, path);
    outputs.push_back(path);
    return relative(outputs, out_dir);
  }
  const auto all_params = sample_pool(config);
  const auto weather = load_weather(config);
  auto ident = identify_pool(config, all_params, weather);
  warnings.insert(warnings.end(), ident.warnings.begin(), ident.warnings.end());
  std::vector<BuildingParams> params;
  for (auto i : ident.building) params.push_back(all_params[i]);
  BuildingPool pool(params, weather, config.pool, derive_seed(config.seed, kStreamSimulation));
  simulate_baseline(pool, config.train_days * H);
  const std::size_t slots = config.test_days * H;
  std::vector<double> nonshiftable(slots, 0.0);
  if (config.nonshiftable_ratio > 0.0) {
    BuildingPool probe = pool;
    const auto nominal = simulate_baseline(probe, slots).aggregate_power();
    nonshiftable = rescale_to_mean(consumption_source(config),
                                   mean(nominal) * config.nonshiftable_ratio);
  }
  for (std::size_t d = 0; d < config.test_days; ++d) {
    const std::span<const double> ns(nonshiftable.data() + d * H, H);
    const auto plan = plan_day(pool, ident.models, ident.building, config, kind,
                               config.export_lp.alpha, ns);
    const auto sp = build_scenario(kind, plan, config.k);
    const auto path = out_dir / indexed(("export_" + scenario + "_day").c_str(), d, ".lp");
    milp::write_lp(sp.problem, path);
    outputs.push_back(path);
    simulate_baseline(pool, H);
  }
  return relative(outputs, out_dir);
}

}  // namespace flexsched
