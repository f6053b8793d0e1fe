#include "flexsched/storage_model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "flexsched/csv.hpp"
#include "flexsched/errors.hpp"

namespace flexsched {
namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

int sign_of(double r) { return (r > 0.0) - (r < 0.0); }

bool saturated(double s) { return s <= 0.0 || s >= 1.0; }

std::vector<double> baseline_states(const OperationLog& log,
                                    const BaselineStateModel& baseline) {
  return baseline.predict_all(log.conditions);
}

void check_baseline_length(const OperationLog& log,
                           std::span<const double> baseline_state) {
  if (baseline_state.size() != log.size()) {
    throw InvalidArgument(
        "baseline state series length does not match the operation log");
  }
}

}  // namespace

void OperationLog::validate() const {
  const auto n = state.size();
  if (request_kw.size() != n || baseline_kw.size() != n ||
      conditions.size() != n) {
    throw InvalidArgument("operation log: series lengths differ");
  }
  if (dt <= 0) throw InvalidArgument("operation log: dt must be positive");
  require_finite(state, "operation log state");
  require_finite(request_kw, "operation log request");
  require_finite(baseline_kw, "operation log baseline power");
  for (std::size_t t = 0; t < n; ++t) {
    if (state[t] < 0.0 || state[t] > 1.0) {
      std::ostringstream msg;
      msg << "operation log: state " << state[t] << " at step " << t
          << " outside [0,1]";
      throw InvalidArgument(msg.str());
    }
    if (conditions[t].size() != condition_dim()) {
      throw InvalidArgument("operation log: condition vectors differ in size");
    }
    require_finite(conditions[t], "operation log conditions");
  }
}

void write_operation_log(const OperationLog& log,
                         const std::filesystem::path& path) {
  log.validate();
  csv::Writer out(path);
  std::vector<std::string> header{"time_s", "s", "r_kw", "p_b_kw"};
  for (std::size_t i = 0; i < log.condition_dim(); ++i) {
    header.push_back("e_" + std::to_string(i + 1));
  }
  out.header(header);
  std::vector<double> row(header.size());
  for (std::size_t t = 0; t < log.size(); ++t) {
    row[0] = static_cast<double>(log.start + log.dt * static_cast<Seconds>(t));
    row[1] = log.state[t];
    row[2] = log.request_kw[t];
    row[3] = log.baseline_kw[t];
    std::copy(log.conditions[t].begin(), log.conditions[t].end(),
              row.begin() + 4);
    out.row(row);
  }
  out.close();
}

OperationLog read_operation_log(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto time = table.column("time_s");
  OperationLog log;
  log.state = table.column("s");
  log.request_kw = table.column("r_kw");
  log.baseline_kw = table.column("p_b_kw");
  std::vector<std::size_t> e_cols;
  for (std::size_t i = 1; table.has_column("e_" + std::to_string(i)); ++i) {
    e_cols.push_back(table.column_index("e_" + std::to_string(i)));
  }
  for (const auto& row : table.rows) {
    std::vector<double> e;
    e.reserve(e_cols.size());
    for (auto c : e_cols) e.push_back(row[c]);
    log.conditions.push_back(std::move(e));
  }
  if (time.size() >= 2) {
    log.dt = static_cast<Seconds>(std::llround(time[1] - time[0]));
  }
  if (!time.empty()) log.start = static_cast<Seconds>(std::llround(time[0]));
  log.validate();
  return log;
}

BaselineStateModel::BaselineStateModel(std::vector<std::vector<double>> inputs,
                                       std::vector<double> weights,
                                       double bandwidth, double ridge)
    : inputs_(std::move(inputs)),
      weights_(std::move(weights)),
      bandwidth_(bandwidth),
      ridge_(ridge) {
  if (inputs_.size() != weights_.size()) {
    throw InvalidArgument("baseline model: weights/training size mismatch");
  }
  if (!(bandwidth_ > 0.0)) {
    throw InvalidArgument("baseline model: bandwidth must be positive");
  }
}

double BaselineStateModel::predict_unclamped(std::span<const double> e) const {
  const double scale = -0.5 / (bandwidth_ * bandwidth_);
  double sum = 0.0;
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    if (inputs_[i].size() != e.size()) {
      throw InvalidArgument("baseline model: input dimension mismatch");
    }
    sum += weights_[i] * std::exp(scale * squared_distance(inputs_[i], e));
  }
  return sum;
}

double BaselineStateModel::predict(std::span<const double> e) const {
  return std::clamp(predict_unclamped(e), 0.0, 1.0);
}

std::vector<double> BaselineStateModel::predict_all(
    std::span<const std::vector<double>> inputs) const {
  std::vector<double> out;
  out.reserve(inputs.size());
  for (const auto& e : inputs) out.push_back(predict(e));
  return out;
}

double median_pairwise_distance(std::span<const std::vector<double>> inputs) {
  std::vector<double> d;
  d.reserve(inputs.size() * (inputs.size() - (inputs.empty() ? 0 : 1)) / 2);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = i + 1; j < inputs.size(); ++j) {
      d.push_back(std::sqrt(squared_distance(inputs[i], inputs[j])));
    }
  }
  if (d.empty()) return 1.0;
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  return *mid > 0.0 ? *mid : 1.0;
}

BaselineStateModel fit_baseline_model(
    std::span<const std::vector<double>> inputs, std::span<const double> states,
    std::optional<double> bandwidth, double ridge) {
  const auto n = inputs.size();
  if (n == 0 || states.size() != n) {
    throw InvalidArgument(
        "fit_baseline_model: need matching, non-empty inputs and states");
  }
  if (ridge < 0.0 || !std::isfinite(ridge)) {
    throw InvalidArgument("fit_baseline_model: ridge must be >= 0");
  }
  const auto dim = inputs.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    if (inputs[i].size() != dim) {
      throw InvalidArgument("fit_baseline_model: input dimensions differ");
    }
    require_finite(inputs[i], "fit_baseline_model input");
    if (!(states[i] >= 0.0 && states[i] <= 1.0)) {
      std::ostringstream msg;
      msg << "fit_baseline_model: state " << states[i] << " at sample " << i
          << " outside [0,1]";
      throw InvalidArgument(msg.str());
    }
  }
  if (ridge == 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (squared_distance(inputs[i], inputs[j]) == 0.0) {
          throw InvalidArgument(
              "fit_baseline_model: duplicate inputs make the kernel system "
              "singular without regularization");
        }
      }
    }
  }
  const double sigma = bandwidth ? *bandwidth : median_pairwise_distance(inputs);
  if (!(sigma > 0.0)) {
    throw InvalidArgument("fit_baseline_model: bandwidth must be positive");
  }

  const double scale = -0.5 / (sigma * sigma);
  Eigen::MatrixXd gram(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    gram(i, i) = 1.0 + ridge;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = std::exp(scale * squared_distance(inputs[i], inputs[j]));
      gram(i, j) = k;
      gram(j, i) = k;
    }
  }
  Eigen::VectorXd rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs(i) = states[i];

  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw InvalidArgument("fit_baseline_model: kernel system is singular");
  }
  const Eigen::VectorXd w = ldlt.solve(rhs);
  if (!w.allFinite()) {
    throw InvalidArgument("fit_baseline_model: kernel system is singular");
  }
  return BaselineStateModel(
      std::vector<std::vector<double>>(inputs.begin(), inputs.end()),
      std::vector<double>(w.data(), w.data() + n), sigma, ridge);
}

std::vector<Episode> segment_episodes(const OperationLog& log,
                                      std::span<const double> baseline_state,
                                      double delta) {
  check_baseline_length(log, baseline_state);
  const auto& r = log.request_kw;
  const auto& s = log.state;
  const auto n = log.size();
  std::vector<Episode> episodes;

  std::size_t t = 0;
  while (t < n) {
    if (r[t] == 0.0) {
      ++t;
      continue;
    }
    // Request run beginning at t; may be split by saturation or sign flips.
    std::size_t start = t;
    int sign = sign_of(r[t]);
    bool run_over = false;
    while (!run_over) {
      std::size_t tau = start + 1;
      EpisodeEnd end = EpisodeEnd::LogEnd;
      for (; tau < n; ++tau) {
        if (r[tau] == 0.0) {
          end = EpisodeEnd::RequestStopped;
          break;
        }
        if (sign_of(r[tau]) != sign) {
          end = EpisodeEnd::SignChange;
          break;
        }
        if (saturated(s[tau])) {
          end = EpisodeEnd::Saturated;
          break;
        }
      }
      if (tau >= n) {
        tau = n - 1;
        end = EpisodeEnd::LogEnd;
      }
      if (tau > start) {
        episodes.push_back({EpisodeKind::Request, start, tau - start, end});
      }
      switch (end) {
        case EpisodeEnd::Saturated:
          start = tau;
          break;
        case EpisodeEnd::SignChange:
          start = tau;
          sign = sign_of(r[tau]);
          break;
        default:
          run_over = true;
          t = tau;
          break;
      }
      if (end == EpisodeEnd::LogEnd) {
        t = n;
        run_over = true;
      }
    }
    if (t >= n || r[t] != 0.0) continue;

    // Recovery tail starting at the first zero-request step.
    const std::size_t rec_start = t;
    std::size_t tau = rec_start + 1;
    EpisodeEnd end = EpisodeEnd::LogEnd;
    for (; tau < n; ++tau) {
      if (r[tau] != 0.0) {
        end = EpisodeEnd::NewRequest;
        break;
      }
      if (std::abs(s[tau] - baseline_state[tau]) < delta) {
        end = EpisodeEnd::Recovered;
        break;
      }
    }
    if (tau >= n) tau = n - 1;
    if (tau > rec_start) {
      episodes.push_back(
          {EpisodeKind::Recovery, rec_start, tau - rec_start, end});
    }
    t = std::max(tau, rec_start + 1);
  }
  return episodes;
}

std::vector<Episode> segment_episodes(const OperationLog& log,
                                      const BaselineStateModel& baseline,
                                      double delta) {
  const auto f = baseline_states(log, baseline);
  return segment_episodes(log, f, delta);
}

RequestSamples identify_request_samples(const OperationLog& log,
                                        std::span<const Episode> episodes,
                                        std::span<const double> baseline_state) {
  check_baseline_length(log, baseline_state);
  RequestSamples out;
  for (const auto& ep : episodes) {
    if (ep.kind != EpisodeKind::Request) continue;
    const auto t0 = ep.start;
    const auto tl = ep.end_index();
    const int sign = sign_of(log.request_kw[t0]);
    if ((sign > 0 && log.state[t0] >= 1.0) ||
        (sign < 0 && log.state[t0] <= 0.0)) {
      ++out.skipped_saturated_start;
      continue;
    }
    double sum_r = 0.0;
    for (auto t = t0; t < tl; ++t) sum_r += log.request_kw[t];
    if (sum_r == 0.0) {
      ++out.skipped_zero_sum;
      continue;
    }
    const double a = (log.state[tl] - baseline_state[tl] -
                      (log.state[t0] - baseline_state[t0])) /
                     sum_r;
    if (!(a > 0.0)) {
      ++out.discarded_nonpositive;
      continue;
    }
    (sum_r > 0.0 ? out.plus : out.minus).push_back(a);
  }
  return out;
}

RequestSamples identify_request_samples(const OperationLog& log,
                                        const BaselineStateModel& baseline,
                                        double delta) {
  const auto f = baseline_states(log, baseline);
  const auto episodes = segment_episodes(log, f, delta);
  return identify_request_samples(log, episodes, f);
}

double fit_recovery_rate(double start_deviation, double end_deviation,
                         std::size_t length) {
  if (length == 0) throw InvalidArgument("recovery episode has zero length");
  if (std::abs(start_deviation) < 1e-15) return 0.0;
  const double l = static_cast<double>(length);
  auto residual = [&](double b) {
    const double e = std::pow(1.0 - b, l) * start_deviation - end_deviation;
    return e * e;
  };
  const auto [b, value] = boost::math::tools::brent_find_minima(
      residual, 0.0, 1.0, std::numeric_limits<double>::digits);
  (void)value;
  return b;
}

double identify_recovery_parameter(const OperationLog& log,
                                   std::span<const Episode> episodes,
                                   std::span<const double> baseline_state) {
  check_baseline_length(log, baseline_state);
  std::optional<double> best;
  for (const auto& ep : episodes) {
    if (ep.kind != EpisodeKind::Recovery) continue;
    const auto t0 = ep.start;
    const auto tl = ep.end_index();
    const double b = fit_recovery_rate(log.state[t0] - baseline_state[t0],
                                       log.state[tl] - baseline_state[tl],
                                       ep.length);
    best = best ? std::max(*best, b) : b;
  }
  if (!best) {
    throw InvalidArgument(
        "identify_recovery_parameter: no recovery episodes in the log; "
        "collect more data with request periods followed by request-free "
        "periods");
  }
  return *best;
}

double identify_recovery_parameter(const OperationLog& log,
                                   const BaselineStateModel& baseline,
                                   double delta) {
  const auto f = baseline_states(log, baseline);
  const auto episodes = segment_episodes(log, f, delta);
  return identify_recovery_parameter(log, episodes, f);
}

void StorageModel::validate() const {
  if (p_plus.empty() || p_minus.empty()) {
    throw InvalidArgument("storage model: both sample sets must be non-empty");
  }
  for (double a : p_plus) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw InvalidArgument("storage model: P+ samples must be positive");
    }
  }
  for (double a : p_minus) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw InvalidArgument("storage model: P- samples must be positive");
    }
  }
  if (!(b_f >= 0.0 && b_f <= 1.0)) {
    throw InvalidArgument("storage model: b_f outside [0,1]");
  }
}

void write_storage_model(const StorageModel& model,
                         const std::filesystem::path& path) {
  nlohmann::json j;
  j["p_plus"] = model.p_plus;
  j["p_minus"] = model.p_minus;
  j["b_f"] = model.b_f;
  j["baseline"] = {{"bandwidth", model.baseline.bandwidth()},
                   {"ridge", model.baseline.ridge()},
                   {"inputs", model.baseline.inputs()},
                   {"weights", model.baseline.weights()}};
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(1) << "\n";
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

StorageModel read_storage_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  StorageModel model;
  try {
    const auto j = nlohmann::json::parse(in);
    model.p_plus = j.at("p_plus").get<std::vector<double>>();
    model.p_minus = j.at("p_minus").get<std::vector<double>>();
    model.b_f = j.at("b_f").get<double>();
    const auto& b = j.at("baseline");
    model.baseline = BaselineStateModel(
        b.at("inputs").get<std::vector<std::vector<double>>>(),
        b.at("weights").get<std::vector<double>>(),
        b.at("bandwidth").get<double>(), b.at("ridge").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("storage model '" + path.string() +
                          "': " + e.what());
  }
  model.validate();
  return model;
}

std::vector<double> predict_state(double s0, std::span<const double> requests,
                                  std::span<const double> baseline_state,
                                  double a_plus, double a_minus, double b_f) {
  if (baseline_state.size() != requests.size() + 1) {
    throw InvalidArgument(
        "predict_state: baseline state needs one more value than requests");
  }
  std::vector<double> s(requests.size() + 1);
  s[0] = s0;
  for (std::size_t t = 0; t < requests.size(); ++t) {
    const double r = requests[t];
    double next = s[t] + a_plus * std::max(r, 0.0) + a_minus * std::min(r, 0.0);
    if (r == 0.0) next += b_f * (baseline_state[t] - s[t]);
    next += baseline_state[t + 1] - baseline_state[t];
    s[t + 1] = next;
  }
  return s;
}

std::vector<double> predict_state(const StorageModel& model, double s0,
                                  std::span<const double> requests,
                                  std::span<const std::vector<double>> conditions,
                                  double a_plus, double a_minus) {
  const auto f = model.baseline.predict_all(conditions);
  return predict_state(s0, requests, f, a_plus, a_minus, model.b_f);
}

}  // namespace flexsched
