#include "flexsched/dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "flexsched/errors.hpp"

namespace flexsched {

const char* to_string(DispatchMode mode) noexcept {
  switch (mode) {
    case DispatchMode::Heuristic: return "heuristic";
    case DispatchMode::Repaired: return "repaired";
    case DispatchMode::Balanced: return "balanced";
  }
  return "unknown";
}

DispatchMode parse_dispatch_mode(std::string_view text) {
  if (text == "heuristic") return DispatchMode::Heuristic;
  if (text == "repaired") return DispatchMode::Repaired;
  if (text == "balanced") return DispatchMode::Balanced;
  throw InvalidArgument("unknown dispatch mode '" + std::string(text) + "'");
}

bool activity(const milp::Schedule& schedule, std::size_t i, std::size_t t,
              std::size_t k) {
  if (i >= schedule.assets || t >= schedule.horizon) {
    throw InvalidArgument("activity: index out of range");
  }
  for (std::size_t l = milp::window_start(t, k); l <= t; ++l) {
    if (schedule.started(i, l)) return true;
  }
  return false;
}

std::vector<std::uint8_t> activity_column(const milp::Schedule& schedule,
                                          std::size_t t) {
  std::vector<std::uint8_t> a(schedule.assets);
  for (std::size_t i = 0; i < schedule.assets; ++i) {
    a[i] = activity(schedule, i, t, schedule.k) ? 1 : 0;
  }
  return a;
}

double flexibility_weight(const FlexibilityEnvelope& envelope) {
  envelope.validate();
  if (envelope.horizon() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < envelope.horizon(); ++t) {
    s += envelope.upper[t] - envelope.lower[t];
  }
  return s / static_cast<double>(envelope.horizon());
}

namespace {

void check_sizes(std::size_t n, std::size_t a, std::size_t b, const char* what) {
  if (a != n || b != n) {
    throw InvalidArgument(std::string(what) + ": per-asset inputs differ in length");
  }
}

double sum(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

}  // namespace

DispatchResult heuristic_dispatch(double r_comm, std::span<const double> weights,
                                  std::span<const std::uint8_t> active) {
  check_sizes(weights.size(), active.size(), active.size(), "heuristic dispatch");
  if (!std::isfinite(r_comm)) throw InvalidArgument("heuristic dispatch: non-finite request");
  DispatchResult out;
  out.mode = DispatchMode::Heuristic;
  out.shares.assign(weights.size(), 0.0);
  if (r_comm == 0.0) return out;
  double total = 0.0;
  bool any_active = false;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!active[i]) continue;
    any_active = true;
    if (weights[i] < 0.0) throw InvalidArgument("heuristic dispatch: negative weight");
    total += weights[i];
  }
  if (!any_active) {
    throw InvalidArgument("heuristic dispatch: nonzero request with no active asset");
  }
  if (!(total > 0.0)) {
    throw InvalidArgument("heuristic dispatch: active assets carry zero weight");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (active[i]) out.shares[i] = weights[i] / total * r_comm;
  }
  out.residual = r_comm - sum(out.shares);
  return out;
}

DispatchResult repair_dispatch(std::span<const double> shares,
                               std::span<const double> lower,
                               std::span<const double> upper,
                               std::span<const std::uint8_t> active,
                               double r_comm) {
  const std::size_t n = shares.size();
  check_sizes(n, lower.size(), upper.size(), "repair dispatch");
  check_sizes(n, active.size(), active.size(), "repair dispatch");
  DispatchResult out;
  out.mode = DispatchMode::Repaired;
  out.shares.assign(shares.begin(), shares.end());
  auto& r = out.shares;
  double excess = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lower[i] > upper[i]) throw InvalidArgument("repair dispatch: empty box");
    if (!active[i]) {
      excess += r[i];
      r[i] = 0.0;
    }
  }
  for (std::size_t pass = 0; pass < 2 * n + 2; ++pass) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      if (r[i] > upper[i]) {
        excess += r[i] - upper[i];
        r[i] = upper[i];
      } else if (r[i] < lower[i]) {
        excess += r[i] - lower[i];
        r[i] = lower[i];
      }
    }
    if (excess == 0.0) break;
    const bool up = excess > 0.0;
    double share_sum = 0.0, room_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      const double room = up ? upper[i] - r[i] : r[i] - lower[i];
      if (room <= 0.0) continue;
      share_sum += std::abs(r[i]);
      room_sum += room;
    }
    if (room_sum <= 0.0) break;
    const bool by_share = share_sum > 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) continue;
      const double room = up ? upper[i] - r[i] : r[i] - lower[i];
      if (room <= 0.0) continue;
      const double w = by_share ? std::abs(r[i]) / share_sum : room / room_sum;
      r[i] += excess * w;
    }
    excess = 0.0;
  }
  // Any overshoot left after the last pass is clipped into the residual.
  for (std::size_t i = 0; i < n; ++i) {
    if (active[i]) r[i] = std::clamp(r[i], lower[i], upper[i]);
  }
  out.residual = r_comm - sum(r);
  return out;
}

DispatchResult balanced_dispatch(double r_comm, std::span<const double> lower,
                                 std::span<const double> upper,
                                 std::span<const std::uint8_t> active) {
  const std::size_t n = lower.size();
  check_sizes(n, upper.size(), active.size(), "balanced dispatch");
  if (!std::isfinite(r_comm)) throw InvalidArgument("balanced dispatch: non-finite request");
  double lo_sum = 0.0, hi_sum = 0.0;
  double lo_min = 0.0, hi_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    if (lower[i] > upper[i]) throw InvalidArgument("balanced dispatch: empty box");
    lo_sum += lower[i];
    hi_sum += upper[i];
    lo_min = std::min(lo_min, lower[i]);
    hi_max = std::max(hi_max, upper[i]);
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(r_comm));
  if (r_comm < lo_sum - tol || r_comm > hi_sum + tol) {
    throw InvalidArgument("balanced dispatch: request " + std::to_string(r_comm) +
                          " kW outside the aggregate box [" + std::to_string(lo_sum) +
                          ", " + std::to_string(hi_sum) + "]");
  }
  DispatchResult out;
  out.mode = DispatchMode::Balanced;
  out.shares.assign(n, 0.0);
  auto total_at = [&](double nu) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) s += std::clamp(nu, lower[i], upper[i]);
    }
    return s;
  };
  double a = lo_min - std::abs(r_comm);
  double b = hi_max + std::abs(r_comm);
  double nu = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (a + b);
    if (mid <= a || mid >= b) break;
    nu = mid;
    const double g = total_at(nu);
    if (std::abs(g - r_comm) <= 1e-12 * std::max(1.0, std::abs(r_comm))) break;
    if (g < r_comm) a = nu; else b = nu;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (active[i]) out.shares[i] = std::clamp(nu, lower[i], upper[i]);
  }
  out.residual = r_comm - sum(out.shares);
  return out;
}

}  // namespace flexsched
