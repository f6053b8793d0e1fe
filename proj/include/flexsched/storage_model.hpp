#pragma once

// Virtual storage model of a thermal asset and its identification from
// operation logs.
//
// State recursion (request-grid steps, r in kW):
//   s[t+1] = s[t] + a_plus * max(r,0) + a_minus * min(r,0)
//            + b_f * (f(e[t]) - s[t]) * [r == 0] + f(e[t+1]) - f(e[t])
//
// Both coefficient sample sets hold positive numbers: a negative request
// lowers the state through min(r,0) <= 0.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "flexsched/core.hpp"

namespace flexsched {

/// Request-grid trajectories of one asset. conditions[t] is the feature
/// vector e_t (all of equal dimension).
struct OperationLog {
  Seconds start = 0;
  Seconds dt = 900;
  std::vector<double> state;
  std::vector<double> request_kw;
  std::vector<double> baseline_kw;
  std::vector<std::vector<double>> conditions;

  std::size_t size() const noexcept { return state.size(); }
  std::size_t condition_dim() const noexcept {
    return conditions.empty() ? 0 : conditions.front().size();
  }
  /// Equal lengths, finite entries, s in [0,1].
  void validate() const;
};

/// CSV columns: time_s, s, r_kw, p_b_kw, e_1..e_m.
void write_operation_log(const OperationLog& log,
                         const std::filesystem::path& path);
OperationLog read_operation_log(const std::filesystem::path& path);

/// Gaussian-kernel ridge regression f: R^m -> [0,1] for the nominal state.
class BaselineStateModel {
 public:
  BaselineStateModel() = default;
  BaselineStateModel(std::vector<std::vector<double>> inputs,
                     std::vector<double> weights, double bandwidth,
                     double ridge);

  /// Prediction clamped to [0,1].
  double predict(std::span<const double> e) const;
  /// Kernel expansion without clamping (diagnostics and residual checks).
  double predict_unclamped(std::span<const double> e) const;
  std::vector<double> predict_all(
      std::span<const std::vector<double>> inputs) const;

  const std::vector<std::vector<double>>& inputs() const { return inputs_; }
  const std::vector<double>& weights() const { return weights_; }
  double bandwidth() const { return bandwidth_; }
  double ridge() const { return ridge_; }
  bool empty() const { return weights_.empty(); }

 private:
  std::vector<std::vector<double>> inputs_;
  std::vector<double> weights_;
  double bandwidth_ = 1.0;
  double ridge_ = 1e-4;
};

/// Fits weights w = (K + ridge*I)^-1 s with K_ij = exp(-|e_i-e_j|^2/(2 sigma^2)).
/// Without a bandwidth the median pairwise input distance is used.
BaselineStateModel fit_baseline_model(
    std::span<const std::vector<double>> inputs, std::span<const double> states,
    std::optional<double> bandwidth = std::nullopt, double ridge = 1e-4);

/// Median of pairwise Euclidean distances; 1.0 when undefined.
double median_pairwise_distance(std::span<const std::vector<double>> inputs);

enum class EpisodeKind { Request, Recovery };

enum class EpisodeEnd {
  RequestStopped,  // r returned to zero
  SignChange,
  Saturated,       // s reached 0 or 1
  Recovered,       // |s - f| < delta
  NewRequest,      // recovery interrupted by a request
  LogEnd,
};

/// Index range [start, start + length] of a log. Requests are applied on
/// [start, start + length); the closing state is taken at start + length.
struct Episode {
  EpisodeKind kind;
  std::size_t start;
  std::size_t length;
  EpisodeEnd end;
  std::size_t end_index() const { return start + length; }
};

/// Request episodes: maximal one-signed request runs cut at the first step
/// where r = 0, the sign flips, or s saturates. A run that keeps going after
/// saturation continues as a new episode from the saturated state.
/// Recovery episodes: zero-request runs right after a request run, cut when
/// r != 0 or |s - f| < delta.
std::vector<Episode> segment_episodes(const OperationLog& log,
                                      std::span<const double> baseline_state,
                                      double delta = 0.05);
std::vector<Episode> segment_episodes(const OperationLog& log,
                                      const BaselineStateModel& baseline,
                                      double delta = 0.05);

struct RequestSamples {
  std::vector<double> plus;
  std::vector<double> minus;
  std::size_t discarded_nonpositive = 0;
  std::size_t skipped_zero_sum = 0;
  std::size_t skipped_saturated_start = 0;
};

/// One coefficient sample per request episode:
///   a = (s_l - f_l - (s_0 - f_0)) / sum(r_0..r_{l-1}).
RequestSamples identify_request_samples(const OperationLog& log,
                                        std::span<const Episode> episodes,
                                        std::span<const double> baseline_state);
RequestSamples identify_request_samples(const OperationLog& log,
                                        const BaselineStateModel& baseline,
                                        double delta = 0.05);

/// Least-squares recovery rate of one episode on [0,1]; 0 when the
/// starting deviation from the nominal state vanishes.
double fit_recovery_rate(double start_deviation, double end_deviation,
                         std::size_t length);

/// max over recovery episodes of the fitted recovery rate. Throws
/// InvalidArgument when the log holds no recovery episode.
double identify_recovery_parameter(const OperationLog& log,
                                   std::span<const Episode> episodes,
                                   std::span<const double> baseline_state);
double identify_recovery_parameter(const OperationLog& log,
                                   const BaselineStateModel& baseline,
                                   double delta = 0.05);

struct StorageModel {
  std::vector<double> p_plus;
  std::vector<double> p_minus;
  double b_f = 0.0;
  BaselineStateModel baseline;

  void validate() const;
};

void write_storage_model(const StorageModel& model,
                         const std::filesystem::path& path);
StorageModel read_storage_model(const std::filesystem::path& path);

/// Forward recursion of the storage model, not clamped. baseline_state must
/// hold requests.size() + 1 values; the result has the same length.
std::vector<double> predict_state(double s0, std::span<const double> requests,
                                  std::span<const double> baseline_state,
                                  double a_plus, double a_minus, double b_f);
std::vector<double> predict_state(const StorageModel& model, double s0,
                                  std::span<const double> requests,
                                  std::span<const std::vector<double>> conditions,
                                  double a_plus, double a_minus);

}  // namespace flexsched
