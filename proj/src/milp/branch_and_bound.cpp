#include "flexsched/milp/branch_and_bound.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <queue>

#include "flexsched/errors.hpp"

namespace flexsched::milp {

const char* to_string(MipStatus status) noexcept {
  switch (status) {
    case MipStatus::Optimal: return "optimal";
    case MipStatus::GapUnproven: return "gap-unproven";
    case MipStatus::Infeasible: return "infeasible";
    case MipStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

void SolverOptions::validate() const {
  if (!std::isfinite(abs_gap) || abs_gap < 0.0) {
    throw InvalidArgument("solver options: abs_gap must be finite and >= 0");
  }
  if (!(time_limit_s > 0.0)) {
    throw InvalidArgument("solver options: time limit must be positive");
  }
  if (!(integrality_tol > 0.0 && integrality_tol < 0.5)) {
    throw InvalidArgument("solver options: integrality tolerance out of range");
  }
}

namespace {

struct BoundChange {
  std::uint32_t var;
  double lower;
  double upper;
};

// Branching history shared between siblings.
struct Path {
  std::shared_ptr<const Path> parent;
  BoundChange change;
};

struct Node {
  double bound;  // minimization form
  std::uint64_t seq;
  std::shared_ptr<const Path> path;
  std::size_t depth;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.seq > b.seq;
  }
};

}  // namespace

MipResult solve_bnb(const MilpProblem& problem, const SolverOptions& options) {
  options.validate();
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  };

  const LpRelaxation lp(problem);
  const std::size_t n = problem.num_variables();
  const double sign = problem.sense() == Sense::Maximize ? -1.0 : 1.0;
  std::vector<double> base_lo(n), base_hi(n);
  std::vector<std::size_t> int_vars;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& v = problem.variables()[j];
    base_lo[j] = v.lower;
    base_hi[j] = v.upper;
    if (v.integer) {
      base_lo[j] = std::ceil(v.lower - options.integrality_tol);
      base_hi[j] = std::floor(v.upper + options.integrality_tol);
      int_vars.push_back(j);
    }
  }

  MipResult result;
  double incumbent = std::numeric_limits<double>::infinity();  // min form
  auto offer = [&](std::vector<double> x) {
    for (auto j : int_vars) x[j] = std::round(x[j]);
    const double obj = sign * problem.objective_value(x);
    if (obj < incumbent) {
      incumbent = obj;
      result.x = std::move(x);
    }
  };

  std::vector<double> lo(n), hi(n);
  auto load_bounds = [&](const std::shared_ptr<const Path>& path) {
    lo = base_lo;
    hi = base_hi;
    // Deeper changes are tighter, so applying root-first is sufficient.
    std::vector<const BoundChange*> changes;
    for (auto p = path.get(); p; p = p->parent.get()) changes.push_back(&p->change);
    for (auto it = changes.rbegin(); it != changes.rend(); ++it) {
      lo[(*it)->var] = (*it)->lower;
      hi[(*it)->var] = (*it)->upper;
    }
  };

  auto fractional_var = [&](const std::vector<double>& x) {
    std::size_t best = n;
    double best_frac = options.integrality_tol;
    for (auto j : int_vars) {
      const double f = x[j] - std::floor(x[j]);
      const double dist = std::min(f, 1.0 - f);
      if (dist > best_frac) {
        best_frac = dist;
        best = j;
      }
    }
    return best;
  };

  auto round_and_resolve = [&](const std::vector<double>& x) {
    std::vector<double> rl(lo), rh(hi);
    for (auto j : int_vars) {
      const double v = std::clamp(std::round(x[j]), lo[j], hi[j]);
      rl[j] = v;
      rh[j] = v;
    }
    const auto sol = lp.solve(rl, rh, options.lp);
    result.lp_iterations += sol.iterations;
    if (sol.status == LpStatus::Optimal) offer(sol.x);
  };

  auto solve_node = [&](const std::shared_ptr<const Path>& path) {
    load_bounds(path);
    auto sol = lp.solve(lo, hi, options.lp);
    result.lp_iterations += sol.iterations;
    return sol;
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::uint64_t seq = 0;

  auto finish = [&](MipStatus status, double best_bound) {
    result.status = status;
    result.seconds = elapsed();
    if (result.has_solution()) {
      result.objective = sign * incumbent;
      const double b = std::min(best_bound, incumbent);
      result.bound = sign * b;
      result.gap = std::max(0.0, incumbent - b);
    } else {
      result.bound = sign * best_bound;
    }
    return result;
  };

  auto root = solve_node(nullptr);
  if (root.status == LpStatus::Infeasible) {
    return finish(MipStatus::Infeasible, std::numeric_limits<double>::infinity());
  }
  if (root.status == LpStatus::Unbounded) {
    return finish(MipStatus::Unbounded, -std::numeric_limits<double>::infinity());
  }
  const double root_bound = sign * root.objective;
  if (fractional_var(root.x) == n) {
    offer(root.x);
    return finish(MipStatus::Optimal, root_bound);
  }
  if (options.heuristic_interval > 0) round_and_resolve(root.x);
  open.push({root_bound, seq++, nullptr, 0});
  // Root branching reuses the root relaxation; later nodes solve their own.
  std::vector<double> pending_x = std::move(root.x);
  bool have_pending = true;

  const double prune_tol = std::max(options.abs_gap, 1e-9);
  while (!open.empty()) {
    const double best_bound = open.top().bound;
    if (incumbent - best_bound <= options.abs_gap + 1e-12) {
      return finish(MipStatus::Optimal, best_bound);
    }
    if (result.nodes >= options.node_limit || elapsed() > options.time_limit_s) {
      return finish(MipStatus::GapUnproven, best_bound);
    }
    Node node = open.top();
    open.pop();
    if (node.bound >= incumbent - prune_tol) continue;

    std::vector<double> x;
    if (have_pending) {
      x = std::move(pending_x);
      have_pending = false;
      load_bounds(node.path);
    } else {
      ++result.nodes;
      auto sol = solve_node(node.path);
      if (sol.status != LpStatus::Optimal) continue;
      const double bound = sign * sol.objective;
      if (bound >= incumbent - prune_tol) continue;
      node.bound = std::max(node.bound, bound);
      x = std::move(sol.x);
      const std::size_t frac = fractional_var(x);
      if (frac == n) {
        offer(x);
        continue;
      }
      if (options.heuristic_interval > 0 &&
          result.nodes % options.heuristic_interval == 0) {
        round_and_resolve(x);
      }
    }
    const std::size_t j = fractional_var(x);
    if (j == n) {
      offer(x);
      continue;
    }
    const double v = x[j];
    const auto down = std::make_shared<const Path>(
        Path{node.path, {static_cast<std::uint32_t>(j), lo[j], std::floor(v)}});
    const auto up = std::make_shared<const Path>(
        Path{node.path, {static_cast<std::uint32_t>(j), std::ceil(v), hi[j]}});
    open.push({node.bound, seq++, down, node.depth + 1});
    open.push({node.bound, seq++, up, node.depth + 1});
  }
  if (!result.has_solution()) {
    return finish(MipStatus::Infeasible, std::numeric_limits<double>::infinity());
  }
  return finish(MipStatus::Optimal, incumbent);
}

}  // namespace flexsched::milp
