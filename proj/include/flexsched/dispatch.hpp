#pragma once

// Per-step split of a committed aggregate request among active assets.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "flexsched/envelope.hpp"
#include "flexsched/milp/scheduling.hpp"

namespace flexsched {

enum class DispatchMode { Heuristic, Repaired, Balanced };

const char* to_string(DispatchMode mode) noexcept;
DispatchMode parse_dispatch_mode(std::string_view text);

struct DispatchResult {
  std::vector<double> shares;  // one entry per asset, kW
  double residual = 0.0;       // unassigned remainder, kW
  DispatchMode mode = DispatchMode::Heuristic;
};

/// 1 iff asset i was started in [max(t-k-1, 0), t].
bool activity(const milp::Schedule& schedule, std::size_t i, std::size_t t,
              std::size_t k);
std::vector<std::uint8_t> activity_column(const milp::Schedule& schedule,
                                          std::size_t t);

/// Mean envelope width.
double flexibility_weight(const FlexibilityEnvelope& envelope);

/// Shares proportional to F_i among active assets. No per-asset bound checks.
/// Throws InvalidArgument when r != 0 and no active asset carries weight.
DispatchResult heuristic_dispatch(double r_comm, std::span<const double> weights,
                                  std::span<const std::uint8_t> active);

/// Clips shares into [lower_i, upper_i] and hands the clipped excess to the
/// unsaturated active assets in proportion to their current shares (or
/// their remaining room when those shares are all zero). What cannot be
/// placed ends up in the residual.
DispatchResult repair_dispatch(std::span<const double> shares,
                               std::span<const double> lower,
                               std::span<const double> upper,
                               std::span<const std::uint8_t> active,
                               double r_comm);

/// Minimizes sum r_i^2 subject to sum r_i = r_comm and r_i in [lower_i,
/// upper_i] over the active assets; inactive assets receive 0. Throws
/// InvalidArgument when r_comm lies outside the aggregate box.
DispatchResult balanced_dispatch(double r_comm, std::span<const double> lower,
                                 std::span<const double> upper,
                                 std::span<const std::uint8_t> active);

}  // namespace flexsched
