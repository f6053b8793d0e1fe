#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <Eigen/Core>

#include "flexsched/errors.hpp"
#include "flexsched/experiment.hpp"
#include "json.hpp"

namespace flexsched {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_integer() || it->get<long long>() < 0) {
        throw ConfigError(where + "." + key + " must be a non-negative integer");
      }
      out = it->get<T>();
    } else if constexpr (std::is_same_v<T, Seconds>) {
      if (!it->is_number_integer()) throw ConfigError(where + "." + key + " must be an integer");
      out = it->get<T>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(where + "." + key + " must be a number");
      out = it->get<double>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(where + "." + key + " must be a boolean");
      out = it->get<bool>();
    } else {
      out = it->get<T>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_path(const json& obj, const char* key, std::filesystem::path& out,
               const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) return;
  if (!it->is_string()) throw ConfigError(where + "." + key + " must be a string");
  out = it->get<std::string>();
}

const json& child(const json& obj, const char* key) {
  static const json empty = json::object();
  const auto it = obj.find(key);
  return it == obj.end() ? empty : *it;
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    pool.validate();
    excitation.validate(pool.grid.horizon_steps);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (buildings == 0) throw ConfigError("buildings must be positive");
  if (train_days == 0) throw ConfigError("train_days must be positive");
  if (test_days == 0) throw ConfigError("test_days must be positive");
  if (k == 0 || k > pool.grid.horizon_steps) throw ConfigError("k must lie in [1, horizon_steps]");
  if (alphas.empty()) throw ConfigError("alphas must not be empty");
  for (double a : alphas) {
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("alphas must lie in (0, 1]");
  }
  if (!(greedy_alpha > 0.0 && greedy_alpha <= 1.0)) throw ConfigError("greedy_alpha must lie in (0, 1]");
  if (scenarios.empty()) throw ConfigError("scenarios must not be empty");
  for (auto s : scenarios) {
    if (s != milp::ScheduleKind::PeakReduction && s != milp::ScheduleKind::SelfConsumption) {
      throw ConfigError("run scenarios are peak_reduction and self_consumption");
    }
  }
  if (!(peak_factor > 0.0)) throw ConfigError("peak_factor must be positive");
  if (!(nonshiftable_ratio >= 0.0)) throw ConfigError("nonshiftable_ratio must be non-negative");
  if (!(pv_kw_per_building >= 0.0)) throw ConfigError("pv_kw_per_building must be non-negative");
  if (!(solar_aperture >= 0.0)) throw ConfigError("solar_aperture_m2 must be non-negative");
  if (!(identification.delta > 0.0)) throw ConfigError("identification.delta must be positive");
  if (!(identification.ridge > 0.0)) throw ConfigError("identification.ridge must be positive");
  if (!(mip.gap_fraction >= 0.0)) throw ConfigError("solver.gap_fraction must be non-negative");
  if (!(mip.time_limit_s > 0.0)) throw ConfigError("solver.time_limit_s must be positive");
  if (bench.counts.empty() || bench.tiers.empty()) throw ConfigError("bench counts and tiers must not be empty");
  for (auto c : bench.counts) {
    if (c == 0) throw ConfigError("bench counts must be positive");
  }
  for (double t : bench.tiers) {
    if (!(t > 0.0)) throw ConfigError("bench tiers must be positive");
  }
  if (bench.repeats == 0) throw ConfigError("bench.repeats must be positive");
  if (!(bench.bnb_time_limit_s > 0.0)) throw ConfigError("bench.bnb_time_limit_s must be positive");
  if (!(export_lp.alpha > 0.0 && export_lp.alpha <= 1.0)) throw ConfigError("export.alpha must lie in (0, 1]");
  try {
    const auto kind = milp::parse_schedule_kind(export_lp.scenario);
    if (kind != milp::ScheduleKind::PeakReduction && kind != milp::ScheduleKind::SelfConsumption) {
      throw ConfigError("export.scenario must be peak_reduction or self_consumption");
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("export.scenario: ") + e.what());
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config",
             {"seed", "buildings", "train_days", "test_days", "k", "alphas",
              "scenarios", "dispatch", "greedy", "greedy_alpha", "peak_factor",
              "nonshiftable_ratio", "pv_kw_per_building", "write_trajectories",
              "weather_csv", "consumption_csv", "models_dir", "grid", "comfort",
              "pid", "simulation", "excitation", "identification",
              "synthetic_weather", "solver", "bench", "export"});
  ExperimentConfig c;
  const std::string r = "config";
  read(root, "seed", c.seed, r);
  read(root, "buildings", c.buildings, r);
  read(root, "train_days", c.train_days, r);
  read(root, "test_days", c.test_days, r);
  read(root, "k", c.k, r);
  if (root.contains("alphas")) {
    const auto& a = root["alphas"];
    if (!a.is_array()) throw ConfigError("config.alphas must be an array");
    c.alphas.clear();
    for (const auto& v : a) {
      if (!v.is_number()) throw ConfigError("config.alphas must hold numbers");
      c.alphas.push_back(v.get<double>());
    }
  }
  if (root.contains("scenarios")) {
    const auto& a = root["scenarios"];
    if (!a.is_array()) throw ConfigError("config.scenarios must be an array");
    c.scenarios.clear();
    for (const auto& v : a) {
      if (!v.is_string()) throw ConfigError("config.scenarios must hold strings");
      try {
        c.scenarios.push_back(milp::parse_schedule_kind(v.get<std::string>()));
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config.scenarios: ") + e.what());
      }
    }
  }
  if (root.contains("dispatch")) {
    if (!root["dispatch"].is_string()) throw ConfigError("config.dispatch must be a string");
    try {
      c.dispatch = parse_dispatch_mode(root["dispatch"].get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config.dispatch: ") + e.what());
    }
  }
  read(root, "greedy", c.greedy, r);
  read(root, "greedy_alpha", c.greedy_alpha, r);
  read(root, "peak_factor", c.peak_factor, r);
  read(root, "nonshiftable_ratio", c.nonshiftable_ratio, r);
  read(root, "pv_kw_per_building", c.pv_kw_per_building, r);
  read(root, "write_trajectories", c.write_trajectories, r);
  read_path(root, "weather_csv", c.weather_csv, r);
  read_path(root, "consumption_csv", c.consumption_csv, r);
  read_path(root, "models_dir", c.models_dir, r);

  const auto& grid = child(root, "grid");
  check_keys(grid, "grid", {"dt_control_s", "dt_request_s", "horizon_steps"});
  read(grid, "dt_control_s", c.pool.grid.dt_control, "grid");
  read(grid, "dt_request_s", c.pool.grid.dt_request, "grid");
  read(grid, "horizon_steps", c.pool.grid.horizon_steps, "grid");

  const auto& comfort = child(root, "comfort");
  check_keys(comfort, "comfort", {"setpoint_c", "lower_c", "upper_c"});
  read(comfort, "setpoint_c", c.pool.comfort.setpoint, "comfort");
  read(comfort, "lower_c", c.pool.comfort.lower, "comfort");
  read(comfort, "upper_c", c.pool.comfort.upper, "comfort");

  const auto& pid = child(root, "pid");
  check_keys(pid, "pid", {"kp", "ki", "kd"});
  read(pid, "kp", c.pool.gains.kp, "pid");
  read(pid, "ki", c.pool.gains.ki, "pid");
  read(pid, "kd", c.pool.gains.kd, "pid");

  const auto& sim = child(root, "simulation");
  check_keys(sim, "simulation", {"rebound_fraction", "rebound_exit_c", "true_state_cap_h",
                                 "disturbance_std_kw", "solar_aperture_m2"});
  read(sim, "rebound_fraction", c.pool.rebound_fraction, "simulation");
  read(sim, "rebound_exit_c", c.pool.rebound_exit, "simulation");
  read(sim, "true_state_cap_h", c.pool.true_state_cap_hours, "simulation");
  read(sim, "disturbance_std_kw", c.pool.disturbance_std_kw, "simulation");
  read(sim, "solar_aperture_m2", c.solar_aperture, "simulation");

  const auto& ex = child(root, "excitation");
  check_keys(ex, "excitation", {"enabled", "requests_per_day", "length_slots",
                                "min_fraction", "max_fraction"});
  read(ex, "enabled", c.excitation.enabled, "excitation");
  read(ex, "requests_per_day", c.excitation.requests_per_day, "excitation");
  read(ex, "length_slots", c.excitation.length_slots, "excitation");
  read(ex, "min_fraction", c.excitation.min_fraction, "excitation");
  read(ex, "max_fraction", c.excitation.max_fraction, "excitation");

  const auto& id = child(root, "identification");
  check_keys(id, "identification", {"delta", "ridge", "min_samples"});
  read(id, "delta", c.identification.delta, "identification");
  read(id, "ridge", c.identification.ridge, "identification");
  read(id, "min_samples", c.identification.min_samples, "identification");

  const auto& sw = child(root, "synthetic_weather");
  check_keys(sw, "synthetic_weather", {"mean_temp_c", "daily_amplitude_c", "day_to_day_std_c",
                                       "ghi_peak_wm2", "min_temp_c", "max_temp_c"});
  read(sw, "mean_temp_c", c.synthetic_weather.mean_temp, "synthetic_weather");
  read(sw, "daily_amplitude_c", c.synthetic_weather.daily_amplitude, "synthetic_weather");
  read(sw, "day_to_day_std_c", c.synthetic_weather.day_to_day_std, "synthetic_weather");
  read(sw, "ghi_peak_wm2", c.synthetic_weather.ghi_peak, "synthetic_weather");
  read(sw, "min_temp_c", c.synthetic_weather.min_temp, "synthetic_weather");
  read(sw, "max_temp_c", c.synthetic_weather.max_temp, "synthetic_weather");

  const auto& solver = child(root, "solver");
  check_keys(solver, "solver", {"gap_fraction", "time_limit_s", "node_limit"});
  read(solver, "gap_fraction", c.mip.gap_fraction, "solver");
  read(solver, "time_limit_s", c.mip.time_limit_s, "solver");
  read(solver, "node_limit", c.mip.node_limit, "solver");

  const auto& bench = child(root, "bench");
  check_keys(bench, "bench", {"counts", "tiers", "repeats", "bnb_max_assets",
                              "bnb_time_limit_s", "export_lp"});
  if (bench.contains("counts")) {
    c.bench.counts.clear();
    for (const auto& v : bench["counts"]) {
      if (!v.is_number_integer() || v.get<long long>() <= 0) {
        throw ConfigError("bench.counts must hold positive integers");
      }
      c.bench.counts.push_back(v.get<std::size_t>());
    }
  }
  if (bench.contains("tiers")) {
    c.bench.tiers.clear();
    for (const auto& v : bench["tiers"]) {
      if (!v.is_number()) throw ConfigError("bench.tiers must hold numbers");
      c.bench.tiers.push_back(v.get<double>());
    }
  }
  read(bench, "repeats", c.bench.repeats, "bench");
  read(bench, "bnb_max_assets", c.bench.bnb_max_assets, "bench");
  read(bench, "bnb_time_limit_s", c.bench.bnb_time_limit_s, "bench");
  read(bench, "export_lp", c.bench.export_lp, "bench");

  const auto& ex_lp = child(root, "export");
  check_keys(ex_lp, "export", {"scenario", "alpha", "bank_assets"});
  read(ex_lp, "scenario", c.export_lp.scenario, "export");
  read(ex_lp, "alpha", c.export_lp.alpha, "export");
  read(ex_lp, "bank_assets", c.export_lp.bank_assets, "export");

  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  auto c = parse_config(buf.str());
  const auto base = path.parent_path();
  for (auto* p : {&c.weather_csv, &c.consumption_csv, &c.models_dir}) {
    if (!p->empty() && p->is_relative()) *p = base / *p;
  }
  for (const auto* p : {&c.weather_csv, &c.consumption_csv}) {
    if (!p->empty() && !std::filesystem::exists(*p)) {
      throw ConfigError("referenced file '" + p->string() + "' does not exist");
    }
  }
  if (!c.models_dir.empty() && !std::filesystem::is_directory(c.models_dir)) {
    throw ConfigError("models_dir '" + c.models_dir.string() + "' is not a directory");
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["buildings"] = c.buildings;
  j["train_days"] = c.train_days;
  j["test_days"] = c.test_days;
  j["k"] = c.k;
  j["alphas"] = c.alphas;
  j["scenarios"] = json::array();
  for (auto s : c.scenarios) j["scenarios"].push_back(milp::to_string(s));
  j["dispatch"] = to_string(c.dispatch);
  j["greedy"] = c.greedy;
  j["greedy_alpha"] = c.greedy_alpha;
  j["peak_factor"] = c.peak_factor;
  j["nonshiftable_ratio"] = c.nonshiftable_ratio;
  j["pv_kw_per_building"] = c.pv_kw_per_building;
  j["write_trajectories"] = c.write_trajectories;
  j["weather_csv"] = c.weather_csv.string();
  j["consumption_csv"] = c.consumption_csv.string();
  j["models_dir"] = c.models_dir.string();
  j["grid"] = {{"dt_control_s", c.pool.grid.dt_control},
               {"dt_request_s", c.pool.grid.dt_request},
               {"horizon_steps", c.pool.grid.horizon_steps}};
  j["comfort"] = {{"setpoint_c", c.pool.comfort.setpoint},
                  {"lower_c", c.pool.comfort.lower},
                  {"upper_c", c.pool.comfort.upper}};
  j["pid"] = {{"kp", c.pool.gains.kp}, {"ki", c.pool.gains.ki}, {"kd", c.pool.gains.kd}};
  j["simulation"] = {{"rebound_fraction", c.pool.rebound_fraction},
                     {"rebound_exit_c", c.pool.rebound_exit},
                     {"true_state_cap_h", c.pool.true_state_cap_hours},
                     {"disturbance_std_kw", c.pool.disturbance_std_kw},
                     {"solar_aperture_m2", c.solar_aperture}};
  j["excitation"] = {{"enabled", c.excitation.enabled},
                     {"requests_per_day", c.excitation.requests_per_day},
                     {"length_slots", c.excitation.length_slots},
                     {"min_fraction", c.excitation.min_fraction},
                     {"max_fraction", c.excitation.max_fraction}};
  j["identification"] = {{"delta", c.identification.delta},
                         {"ridge", c.identification.ridge},
                         {"min_samples", c.identification.min_samples}};
  j["synthetic_weather"] = {{"mean_temp_c", c.synthetic_weather.mean_temp},
                            {"daily_amplitude_c", c.synthetic_weather.daily_amplitude},
                            {"day_to_day_std_c", c.synthetic_weather.day_to_day_std},
                            {"ghi_peak_wm2", c.synthetic_weather.ghi_peak},
                            {"min_temp_c", c.synthetic_weather.min_temp},
                            {"max_temp_c", c.synthetic_weather.max_temp}};
  j["solver"] = {{"gap_fraction", c.mip.gap_fraction},
                 {"time_limit_s", c.mip.time_limit_s},
                 {"node_limit", c.mip.node_limit}};
  j["bench"] = {{"counts", c.bench.counts},
                {"tiers", c.bench.tiers},
                {"repeats", c.bench.repeats},
                {"bnb_max_assets", c.bench.bnb_max_assets},
                {"bnb_time_limit_s", c.bench.bnb_time_limit_s},
                {"export_lp", c.bench.export_lp}};
  j["export"] = {{"scenario", c.export_lp.scenario},
                 {"alpha", c.export_lp.alpha},
                 {"bank_assets", c.export_lp.bank_assets}};
  return j.dump(2);
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCategory::Internal, "SHA-256 computation failed");
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
  return out.str();
}

void write_manifest(const Manifest& m, const ExperimentConfig& config,
                    const std::filesystem::path& path) {
  json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["outputs"] = m.outputs;
  j["warnings"] = m.warnings;
  j["wall_seconds"] = m.seconds;
  j["config"] = json::parse(config_to_json(config));
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ts;
  ts << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  j["created_utc"] = ts.str();
  j["versions"] = {
      {"flexsched", kVersion},
      {"compiler", std::string("g++ ") + __VERSION__},
      {"cxx_standard", __cplusplus},
      {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                    std::to_string(EIGEN_MAJOR_VERSION) + "." +
                    std::to_string(EIGEN_MINOR_VERSION)},
      {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                            std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
      {"openssl", OpenSSL_version(OPENSSL_VERSION)}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest '" + path.string() + "'");
}

}  // namespace flexsched
