#pragma once

// Activation scheduling problems over a pool of flexibility envelopes.
//
// Asset i started at step l contributes [R_lo(i,l), R_hi(i,l)] to every
// covering constraint t with max(t-k-1, 0) <= l <= t.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "flexsched/envelope.hpp"
#include "flexsched/milp/branch_and_bound.hpp"
#include "flexsched/milp/problem.hpp"

namespace flexsched::milp {

enum class ScheduleKind { General, Committed, SelfConsumption, PeakReduction };

const char* to_string(ScheduleKind kind) noexcept;
ScheduleKind parse_schedule_kind(std::string_view text);

/// First step whose activation still covers step t.
inline std::size_t window_start(std::size_t t, std::size_t k) {
  return t > k + 1 ? t - k - 1 : 0;
}

/// Variable layout: u(i,t) = i*H + t, then d_0..d_{H-1}, then rho.
struct ScheduleLayout {
  std::size_t assets = 0;
  std::size_t horizon = 0;
  std::size_t k = 1;
  bool has_d = false;
  bool has_rho = false;

  std::size_t u(std::size_t i, std::size_t t) const { return i * horizon + t; }
  std::size_t d(std::size_t t) const { return assets * horizon + t; }
  std::size_t rho() const { return assets * horizon + horizon; }
};

struct SchedulingProblem {
  ScheduleKind kind = ScheduleKind::General;
  MilpProblem problem;
  ScheduleLayout layout;
  std::vector<double> request;   // r_agg (scenario request)
  std::vector<double> baseline;  // aggregate baseline power (peak only)
};

/// Minimize activations subject to covering r_agg exactly (up to eps).
SchedulingProblem build_general(std::span<const FlexibilityEnvelope> envelopes,
                                std::span<const double> r_agg, std::size_t k,
                                double eps = 0.0);

/// Commitment constraints with scaling factors d_t and no objective.
/// Rejects eps > 0.
SchedulingProblem build_committed(std::span<const FlexibilityEnvelope> envelopes,
                                  std::span<const double> r_agg, std::size_t k,
                                  double eps = 0.0);

/// Maximize sum_t r_self_t d_t. Rejects negative entries.
SchedulingProblem build_self_consumption(
    std::span<const FlexibilityEnvelope> envelopes,
    std::span<const double> r_self, std::size_t k);

/// Minimize rho >= p_b_agg_t + d_t r_peak_t. Rejects positive entries.
SchedulingProblem build_peak_reduction(
    std::span<const FlexibilityEnvelope> envelopes,
    std::span<const double> p_b_agg, std::span<const double> r_peak,
    std::size_t k);

enum class ScheduleStatus { Optimal, GapUnproven, Infeasible, NoSolution };

const char* to_string(ScheduleStatus status) noexcept;

struct Schedule {
  std::size_t assets = 0;
  std::size_t horizon = 0;
  std::size_t k = 1;
  std::vector<std::uint8_t> u;  // row-major assets x horizon
  std::vector<double> d;
  std::vector<double> committed;  // d_t * r_agg_t
  double objective = 0.0;
  double bound = 0.0;
  double gap = 0.0;
  ScheduleStatus status = ScheduleStatus::NoSolution;
  std::size_t nodes = 0;
  double seconds = 0.0;

  bool started(std::size_t i, std::size_t t) const { return u[i * horizon + t] != 0; }
  /// Start step of asset i, or horizon when never activated.
  std::size_t start_of(std::size_t i) const;
  bool usable() const noexcept {
    return status == ScheduleStatus::Optimal || status == ScheduleStatus::GapUnproven;
  }
};

/// Maps a B&B result back onto the schedule layout.
Schedule extract_schedule(const SchedulingProblem& sp, const MipResult& result);

/// Builds and solves in one call.
Schedule solve_schedule(const SchedulingProblem& sp, const SolverOptions& options);

/// Per-step activated aggregate envelope: sum over assets and window starts.
struct ActiveEnvelope {
  std::vector<double> lower;
  std::vector<double> upper;
};
ActiveEnvelope active_envelope(std::span<const FlexibilityEnvelope> envelopes,
                               const Schedule& schedule);

/// Largest violation of the covering constraints by the committed request
/// (0 when every d_t r_t lies inside the activated envelope).
double commitment_violation(std::span<const FlexibilityEnvelope> envelopes,
                            const Schedule& schedule);

/// Exhaustive search over activation starts (including "never") with the
/// closed-form optimal d_t for each start assignment. Requires
/// (H+1)^M <= 1e6. `baseline` is only read for PeakReduction.
Schedule brute_force_schedule(std::span<const FlexibilityEnvelope> envelopes,
                              std::span<const double> request,
                              ScheduleKind kind, std::size_t k,
                              double eps = 0.0,
                              std::span<const double> baseline = {});

}  // namespace flexsched::milp
