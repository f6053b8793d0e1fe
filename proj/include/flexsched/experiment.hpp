#pragma once

// Experiment orchestration: identification, day-ahead scheduling runs with
// dispatch and simulation, the greedy comparison, scalability benchmarks and
// LP export. Every command writes CSV outputs plus a run manifest.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flexsched/dispatch.hpp"
#include "flexsched/envelope.hpp"
#include "flexsched/metrics.hpp"
#include "flexsched/milp/scheduling.hpp"
#include "flexsched/simpool.hpp"
#include "flexsched/storage_model.hpp"

namespace flexsched {

inline constexpr const char* kVersion = "0.1.0";

struct IdentificationSettings {
  double delta = 0.05;
  double ridge = 1e-4;
  std::size_t min_samples = 1;  // per sign
};

struct MipSettings {
  /// Absolute gap as a fraction of the desired peak c (peak reduction) or
  /// of sum r_self (self-consumption).
  double gap_fraction = 0.01;
  double time_limit_s = 60.0;
  std::size_t node_limit = 2000;
};

struct BenchSettings {
  std::vector<std::size_t> counts{50, 100, 250, 500, 1000, 2000};
  std::vector<double> tiers{1.0, 1.05, 1.1};
  std::size_t repeats = 3;
  std::size_t bnb_max_assets = 250;
  double bnb_time_limit_s = 10.0;
  bool export_lp = true;
};

struct ExportSettings {
  std::string scenario = "peak_reduction";
  double alpha = 1.0;
  /// 0 uses the identified pool; otherwise a synthetic envelope bank of this
  /// many assets is exported.
  std::size_t bank_assets = 0;
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  std::size_t buildings = 20;
  std::size_t train_days = 10;
  std::size_t test_days = 10;
  std::size_t k = 36;
  std::vector<double> alphas{0.001, 0.5, 1.0};
  std::vector<milp::ScheduleKind> scenarios{milp::ScheduleKind::PeakReduction,
                                            milp::ScheduleKind::SelfConsumption};
  DispatchMode dispatch = DispatchMode::Heuristic;
  bool greedy = true;
  double peak_factor = 1.0;
  double nonshiftable_ratio = 1.0;
  double pv_kw_per_building = 4.0;
  double solar_aperture = 3.0;
  double greedy_alpha = 1.0;
  bool write_trajectories = true;

  PoolSettings pool;
  ExcitationPolicy excitation;
  IdentificationSettings identification;
  SyntheticWeatherOptions synthetic_weather;
  MipSettings mip;
  BenchSettings bench;
  ExportSettings export_lp;

  std::filesystem::path weather_csv;      // empty: synthetic weather
  std::filesystem::path consumption_csv;  // empty: synthetic profile
  std::filesystem::path models_dir;       // empty: identify in process

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Parses JSON text. Unknown keys and wrong types raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON of the full (defaulted) configuration.
std::string config_to_json(const ExperimentConfig& config);
/// Hex SHA-256.
std::string sha256_hex(const std::string& data);

struct Manifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};
void write_manifest(const Manifest& manifest, const ExperimentConfig& config,
                    const std::filesystem::path& path);

// Pipeline pieces --------------------------------------------------------------

/// Buildings sampled from the seed, in index order.
std::vector<BuildingParams> sample_pool(const ExperimentConfig& config);

/// Weather covering train + test days plus two spare days for the envelope
/// and feature lookahead.
ExternalConditions load_weather(const ExperimentConfig& config);

struct IdentifiedPool {
  std::vector<std::size_t> building;  // original indices of kept buildings
  std::vector<StorageModel> models;
  std::vector<std::string> warnings;
};

/// Fits f on the nominal log and P+, P-, b_f on the excited log of every
/// building; buildings without enough request or recovery episodes are
/// dropped with a warning.
IdentifiedPool identify_pool(const ExperimentConfig& config,
                             std::span<const BuildingParams> params,
                             const ExternalConditions& weather);

struct RunResult {
  std::vector<MetricReport> reports;
  std::vector<std::string> warnings;
  std::size_t buildings = 0;
};

/// Test-period simulation for every scenario: nominal operation, the
/// scheduled approach at every alpha and (optionally) the greedy baseline.
/// Writes trajectories into out_dir when enabled and out_dir is non-empty.
RunResult run_experiment(const ExperimentConfig& config,
                         const std::filesystem::path& out_dir = {});

/// Synthetic envelope bank: sampled buildings under one synthetic day with
/// nominal forecasts and a physics-derived coefficient spread.
struct EnvelopeBank {
  std::vector<FlexibilityEnvelope> envelopes;
  std::vector<std::vector<double>> baseline;  // per asset, kW per slot
  std::vector<double> nonshiftable_shape;     // unit mean
  std::vector<double> ghi;                    // W/m² slot means

  std::size_t size() const noexcept { return envelopes.size(); }
  /// Baseline of the first n assets plus the non-shiftable load scaled to
  /// ratio times their mean baseline.
  std::vector<double> consumption(std::size_t n, double nonshiftable_ratio) const;
  std::vector<double> baseline_agg(std::size_t n) const;
};
EnvelopeBank make_envelope_bank(std::size_t count, std::size_t k,
                                std::size_t horizon, std::uint64_t seed,
                                double alpha = 1.0);

struct BenchRow {
  std::size_t assets = 0;
  double tier = 1.0;
  std::string stage;  // build, lp_relaxation, bnb, export_lp
  std::size_t repeats = 0;
  double mean_s = 0.0;
  double min_s = 0.0;
  double max_s = 0.0;
  std::string status;
  double objective = 0.0;
  bool single_sample = false;
};
std::vector<BenchRow> run_bench(const ExperimentConfig& config,
                                const std::filesystem::path& out_dir = {});
void write_bench_csv(std::span<const BenchRow> rows,
                     const std::filesystem::path& path);

// CLI commands; each returns the written output paths.
std::vector<std::string> cmd_identify(const ExperimentConfig& config,
                                      const std::filesystem::path& out_dir,
                                      std::vector<std::string>& warnings);
std::vector<std::string> cmd_run(const ExperimentConfig& config,
                                 const std::filesystem::path& out_dir,
                                 std::vector<std::string>& warnings);
std::vector<std::string> cmd_bench(const ExperimentConfig& config,
                                   const std::filesystem::path& out_dir,
                                   std::vector<std::string>& warnings);
std::vector<std::string> cmd_export(const ExperimentConfig& config,
                                    const std::filesystem::path& out_dir,
                                    std::vector<std::string>& warnings);

}  // namespace flexsched
