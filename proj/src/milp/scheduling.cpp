#include "flexsched/milp/scheduling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "flexsched/errors.hpp"

namespace flexsched::milp {
namespace {

void check_pool(std::span<const FlexibilityEnvelope> envelopes,
                std::size_t horizon, std::size_t k) {
  if (horizon == 0) throw InvalidArgument("scheduling: empty request horizon");
  if (k == 0) throw InvalidArgument("scheduling: k must be >= 1");
  for (std::size_t i = 0; i < envelopes.size(); ++i) {
    const auto& env = envelopes[i];
    if (env.horizon() != horizon || env.upper.size() != horizon) {
      std::ostringstream msg;
      msg << "scheduling: envelope " << i << " has horizon " << env.horizon()
          << ", request has " << horizon;
      throw InvalidArgument(msg.str());
    }
    if (env.k != k) {
      std::ostringstream msg;
      msg << "scheduling: envelope " << i << " was computed for k=" << env.k
          << ", problem uses k=" << k;
      throw InvalidArgument(msg.str());
    }
    env.validate();
  }
}

std::string indexed(const char* prefix, std::size_t a) {
  return std::string(prefix) + std::to_string(a);
}

// Adds binaries u_i_t and the single-activation rows.
void add_activations(MilpProblem& p, const ScheduleLayout& layout) {
  for (std::size_t i = 0; i < layout.assets; ++i) {
    const std::string stem = "u_" + std::to_string(i) + "_";
    for (std::size_t t = 0; t < layout.horizon; ++t) {
      p.add_binary(stem + std::to_string(t));
    }
  }
}

void add_single_activation_rows(MilpProblem& p, const ScheduleLayout& layout) {
  for (std::size_t i = 0; i < layout.assets; ++i) {
    Constraint row;
    row.name = indexed("act_", i);
    row.relation = Relation::LessEqual;
    row.rhs = 1.0;
    row.index.reserve(layout.horizon);
    row.coef.reserve(layout.horizon);
    for (std::size_t t = 0; t < layout.horizon; ++t) {
      row.index.push_back(static_cast<std::uint32_t>(layout.u(i, t)));
      row.coef.push_back(1.0);
    }
    p.add_constraint(std::move(row));
  }
}

// Covering rows  c*d_t - sum u R_lo >= eps - r0   and
//                c*d_t - sum u R_hi <= -eps - r0
// where (c, r0) = (r_t, 0) with scaling factors and (0, r_t) without.
void add_covering_rows(MilpProblem& p, const ScheduleLayout& layout,
                       std::span<const FlexibilityEnvelope> envelopes,
                       std::span<const double> r, double eps) {
  // Rows that hold on the whole [0,1] box of u and d are not emitted.
  const std::size_t k = layout.k;
  for (int side = 0; side < 2; ++side) {
    for (std::size_t t = 0; t < layout.horizon; ++t) {
      const std::size_t ts = window_start(t, k);
      double rhs;
      if (layout.has_d) {
        rhs = side == 0 ? eps : -eps;
      } else {
        rhs = side == 0 ? eps - r[t] : -eps - r[t];
      }
      // Least favourable activity: the minimum for >= rows, the maximum for <=.
      double extreme = 0.0;
      auto extend = [&](double a) {
        extreme += side == 0 ? std::min(a, 0.0) : std::max(a, 0.0);
      };
      for (std::size_t i = 0; i < layout.assets; ++i) {
        const auto& bound = side == 0 ? envelopes[i].lower : envelopes[i].upper;
        for (std::size_t l = ts; l <= t; ++l) extend(-bound[l]);
      }
      if (layout.has_d) extend(r[t]);
      if (side == 0 ? extreme >= rhs : extreme <= rhs) continue;
      Constraint row;
      row.name = indexed(side == 0 ? "cov_lo_" : "cov_hi_", t);
      row.index.reserve(layout.assets * (t - ts + 1) + 1);
      row.coef.reserve(layout.assets * (t - ts + 1) + 1);
      for (std::size_t i = 0; i < layout.assets; ++i) {
        const auto& bound = side == 0 ? envelopes[i].lower : envelopes[i].upper;
        for (std::size_t l = ts; l <= t; ++l) {
          if (bound[l] == 0.0) continue;
          row.index.push_back(static_cast<std::uint32_t>(layout.u(i, l)));
          row.coef.push_back(-bound[l]);
        }
      }
      if (layout.has_d && r[t] != 0.0) {
        row.index.push_back(static_cast<std::uint32_t>(layout.d(t)));
        row.coef.push_back(r[t]);
      }
      row.relation = side == 0 ? Relation::GreaterEqual : Relation::LessEqual;
      row.rhs = rhs;
      p.add_constraint(std::move(row));
    }
  }
}

void check_request(std::span<const double> r, const char* what) {
  for (double v : r) {
    if (!std::isfinite(v)) {
      throw InvalidArgument(std::string(what) + ": non-finite request value");
    }
  }
}

}  // namespace

const char* to_string(ScheduleKind kind) noexcept {
  switch (kind) {
    case ScheduleKind::General: return "general";
    case ScheduleKind::Committed: return "committed";
    case ScheduleKind::SelfConsumption: return "self_consumption";
    case ScheduleKind::PeakReduction: return "peak_reduction";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view text) {
  if (text == "general") return ScheduleKind::General;
  if (text == "committed") return ScheduleKind::Committed;
  if (text == "self_consumption") return ScheduleKind::SelfConsumption;
  if (text == "peak_reduction") return ScheduleKind::PeakReduction;
  throw InvalidArgument("unknown scenario '" + std::string(text) +
                        "' (expected general, committed, self_consumption or "
                        "peak_reduction)");
}

const char* to_string(ScheduleStatus status) noexcept {
  switch (status) {
    case ScheduleStatus::Optimal: return "optimal";
    case ScheduleStatus::GapUnproven: return "gap-unproven";
    case ScheduleStatus::Infeasible: return "infeasible";
    case ScheduleStatus::NoSolution: return "no-solution";
  }
  return "unknown";
}

SchedulingProblem build_general(std::span<const FlexibilityEnvelope> envelopes,
                                std::span<const double> r_agg, std::size_t k,
                                double eps) {
  check_pool(envelopes, r_agg.size(), k);
  check_request(r_agg, "build_general");
  SchedulingProblem sp;
  sp.kind = ScheduleKind::General;
  sp.layout = {envelopes.size(), r_agg.size(), k, false, false};
  sp.request.assign(r_agg.begin(), r_agg.end());
  auto& p = sp.problem;
  p.reserve_variables(sp.layout.assets * sp.layout.horizon);
  add_activations(p, sp.layout);
  p.set_sense(Sense::Minimize);
  for (std::size_t j = 0; j < p.num_variables(); ++j) p.set_objective(j, 1.0);
  add_covering_rows(p, sp.layout, envelopes, r_agg, eps);
  add_single_activation_rows(p, sp.layout);
  return sp;
}

SchedulingProblem build_committed(std::span<const FlexibilityEnvelope> envelopes,
                                  std::span<const double> r_agg, std::size_t k,
                                  double eps) {
  check_pool(envelopes, r_agg.size(), k);
  check_request(r_agg, "build_committed");
  if (eps > 0.0 || !std::isfinite(eps)) {
    throw InvalidArgument(
        "build_committed: eps must be <= 0; a positive covering margin makes "
        "the zero commitment infeasible");
  }
  SchedulingProblem sp;
  sp.kind = ScheduleKind::Committed;
  sp.layout = {envelopes.size(), r_agg.size(), k, true, false};
  sp.request.assign(r_agg.begin(), r_agg.end());
  auto& p = sp.problem;
  p.reserve_variables(sp.layout.assets * sp.layout.horizon + sp.layout.horizon + 1);
  add_activations(p, sp.layout);
  for (std::size_t t = 0; t < sp.layout.horizon; ++t) {
    p.add_variable(indexed("d_", t), 0.0, 1.0);
  }
  add_covering_rows(p, sp.layout, envelopes, r_agg, eps);
  add_single_activation_rows(p, sp.layout);
  return sp;
}

SchedulingProblem build_self_consumption(
    std::span<const FlexibilityEnvelope> envelopes,
    std::span<const double> r_self, std::size_t k) {
  for (std::size_t t = 0; t < r_self.size(); ++t) {
    if (r_self[t] < 0.0) {
      std::ostringstream msg;
      msg << "build_self_consumption: request " << r_self[t] << " at step " << t
          << " is negative";
      throw InvalidArgument(msg.str());
    }
  }
  auto sp = build_committed(envelopes, r_self, k, 0.0);
  sp.kind = ScheduleKind::SelfConsumption;
  sp.problem.set_sense(Sense::Maximize);
  for (std::size_t t = 0; t < sp.layout.horizon; ++t) {
    sp.problem.set_objective(sp.layout.d(t), r_self[t]);
  }
  return sp;
}

SchedulingProblem build_peak_reduction(
    std::span<const FlexibilityEnvelope> envelopes,
    std::span<const double> p_b_agg, std::span<const double> r_peak,
    std::size_t k) {
  if (p_b_agg.size() != r_peak.size()) {
    throw InvalidArgument(
        "build_peak_reduction: baseline and request lengths differ");
  }
  check_request(p_b_agg, "build_peak_reduction");
  for (std::size_t t = 0; t < r_peak.size(); ++t) {
    if (r_peak[t] > 0.0) {
      std::ostringstream msg;
      msg << "build_peak_reduction: request " << r_peak[t] << " at step " << t
          << " is positive";
      throw InvalidArgument(msg.str());
    }
  }
  auto sp = build_committed(envelopes, r_peak, k, 0.0);
  sp.kind = ScheduleKind::PeakReduction;
  sp.layout.has_rho = true;
  sp.baseline.assign(p_b_agg.begin(), p_b_agg.end());
  double rho_lo = -kInf, rho_hi = -kInf;
  for (std::size_t t = 0; t < r_peak.size(); ++t) {
    rho_lo = std::max(rho_lo, p_b_agg[t] + r_peak[t]);
    rho_hi = std::max(rho_hi, p_b_agg[t]);
  }
  auto& p = sp.problem;
  const auto rho = p.add_variable("rho", rho_lo, rho_hi);
  p.set_sense(Sense::Minimize);
  p.set_objective(rho, 1.0);
  for (std::size_t t = 0; t < sp.layout.horizon; ++t) {
    const Term terms[] = {{rho, 1.0}, {sp.layout.d(t), -r_peak[t]}};
    p.add_constraint(indexed("peak_", t), terms, Relation::GreaterEqual,
                     p_b_agg[t]);
  }
  return sp;
}

std::size_t Schedule::start_of(std::size_t i) const {
  for (std::size_t t = 0; t < horizon; ++t) {
    if (started(i, t)) return t;
  }
  return horizon;
}

Schedule extract_schedule(const SchedulingProblem& sp, const MipResult& result) {
  const auto& L = sp.layout;
  Schedule s;
  s.assets = L.assets;
  s.horizon = L.horizon;
  s.k = L.k;
  s.u.assign(L.assets * L.horizon, 0);
  s.d.assign(L.horizon, L.has_d ? 0.0 : 1.0);
  s.committed.assign(L.horizon, 0.0);
  s.nodes = result.nodes;
  s.seconds = result.seconds;
  switch (result.status) {
    case MipStatus::Optimal: s.status = ScheduleStatus::Optimal; break;
    case MipStatus::GapUnproven:
      s.status = result.has_solution() ? ScheduleStatus::GapUnproven
                                       : ScheduleStatus::NoSolution;
      break;
    case MipStatus::Infeasible: s.status = ScheduleStatus::Infeasible; break;
    case MipStatus::Unbounded: s.status = ScheduleStatus::NoSolution; break;
  }
  s.bound = result.bound;
  s.gap = result.gap;
  if (!result.has_solution()) return s;
  s.objective = result.objective;
  for (std::size_t i = 0; i < L.assets; ++i) {
    for (std::size_t t = 0; t < L.horizon; ++t) {
      s.u[i * L.horizon + t] = result.x[L.u(i, t)] > 0.5 ? 1 : 0;
    }
  }
  for (std::size_t t = 0; t < L.horizon; ++t) {
    if (L.has_d) s.d[t] = std::clamp(result.x[L.d(t)], 0.0, 1.0);
    s.committed[t] = s.d[t] * sp.request[t];
  }
  return s;
}

Schedule solve_schedule(const SchedulingProblem& sp, const SolverOptions& options) {
  return extract_schedule(sp, solve_bnb(sp.problem, options));
}

ActiveEnvelope active_envelope(std::span<const FlexibilityEnvelope> envelopes,
                               const Schedule& schedule) {
  if (envelopes.size() != schedule.assets) {
    throw InvalidArgument("active_envelope: envelope count differs from schedule");
  }
  ActiveEnvelope out;
  out.lower.assign(schedule.horizon, 0.0);
  out.upper.assign(schedule.horizon, 0.0);
  for (std::size_t i = 0; i < schedule.assets; ++i) {
    const auto s = schedule.start_of(i);
    if (s >= schedule.horizon) continue;
    const auto end = std::min(schedule.horizon, s + schedule.k + 2);
    for (std::size_t t = s; t < end; ++t) {
      out.lower[t] += envelopes[i].lower[s];
      out.upper[t] += envelopes[i].upper[s];
    }
  }
  return out;
}

double commitment_violation(std::span<const FlexibilityEnvelope> envelopes,
                            const Schedule& schedule) {
  const auto env = active_envelope(envelopes, schedule);
  double worst = 0.0;
  for (std::size_t t = 0; t < schedule.horizon; ++t) {
    worst = std::max(worst, env.lower[t] - schedule.committed[t]);
    worst = std::max(worst, schedule.committed[t] - env.upper[t]);
  }
  return worst;
}

Schedule brute_force_schedule(std::span<const FlexibilityEnvelope> envelopes,
                              std::span<const double> request,
                              ScheduleKind kind, std::size_t k, double eps,
                              std::span<const double> baseline) {
  const std::size_t H = request.size();
  const std::size_t M = envelopes.size();
  check_pool(envelopes, H, k);
  if (kind == ScheduleKind::Committed) {
    throw InvalidArgument("brute_force_schedule: committed problems have no objective");
  }
  if (eps > 0.0 && kind != ScheduleKind::General) {
    throw InvalidArgument("brute_force_schedule: eps must be <= 0");
  }
  if (kind == ScheduleKind::PeakReduction && baseline.size() != H) {
    throw InvalidArgument("brute_force_schedule: peak reduction needs a baseline");
  }
  double count = 1.0;
  for (std::size_t i = 0; i < M; ++i) count *= static_cast<double>(H + 1);
  if (count > 1e6) {
    throw InvalidArgument("brute_force_schedule: more than 1e6 start assignments");
  }
  const bool maximize = kind == ScheduleKind::SelfConsumption;

  std::vector<std::size_t> start(M, 0);
  std::vector<double> lo(H), hi(H), d(H);
  Schedule best;
  best.assets = M;
  best.horizon = H;
  best.k = k;
  best.status = ScheduleStatus::Infeasible;
  bool found = false;
  double best_obj = 0.0;
  std::vector<std::size_t> best_start;
  std::vector<double> best_d;

  while (true) {
    std::fill(lo.begin(), lo.end(), 0.0);
    std::fill(hi.begin(), hi.end(), 0.0);
    for (std::size_t i = 0; i < M; ++i) {
      const auto s = start[i];
      if (s >= H) continue;
      const auto end = std::min(H, s + k + 2);
      for (std::size_t t = s; t < end; ++t) {
        lo[t] += envelopes[i].lower[s];
        hi[t] += envelopes[i].upper[s];
      }
    }
    bool feasible = true;
    double obj = 0.0;
    for (std::size_t t = 0; t < H && feasible; ++t) {
      const double r = request[t];
      if (kind == ScheduleKind::General) {
        d[t] = 1.0;
        feasible = r - lo[t] >= eps && r - hi[t] <= -eps;
      } else if (r > 0.0) {
        d[t] = std::min(1.0, (hi[t] - eps) / r);
      } else if (r < 0.0) {
        d[t] = std::min(1.0, (lo[t] + eps) / r);
      } else {
        d[t] = 1.0;
      }
    }
    if (feasible) {
      switch (kind) {
        case ScheduleKind::General:
          for (auto s : start) obj += s < H ? 1.0 : 0.0;
          break;
        case ScheduleKind::SelfConsumption:
          for (std::size_t t = 0; t < H; ++t) obj += request[t] * d[t];
          break;
        default:
          obj = -kInf;
          for (std::size_t t = 0; t < H; ++t) {
            obj = std::max(obj, baseline[t] + d[t] * request[t]);
          }
          break;
      }
      const bool better = !found || (maximize ? obj > best_obj : obj < best_obj);
      if (better) {
        found = true;
        best_obj = obj;
        best_start = start;
        best_d = d;
      }
    }
    // Next assignment (odometer, asset 0 fastest).
    std::size_t i = 0;
    for (; i < M; ++i) {
      if (++start[i] <= H) break;
      start[i] = 0;
    }
    if (i == M) break;
  }
  if (!found) return best;
  best.status = ScheduleStatus::Optimal;
  best.objective = best_obj;
  best.bound = best_obj;
  best.gap = 0.0;
  best.u.assign(M * H, 0);
  for (std::size_t i = 0; i < M; ++i) {
    if (best_start[i] < H) best.u[i * H + best_start[i]] = 1;
  }
  best.d = best_d;
  best.committed.resize(H);
  for (std::size_t t = 0; t < H; ++t) best.committed[t] = best.d[t] * request[t];
  return best;
}

}  // namespace flexsched::milp
