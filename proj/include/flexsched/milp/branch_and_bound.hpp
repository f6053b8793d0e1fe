#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "flexsched/milp/lp_solver.hpp"
#include "flexsched/milp/problem.hpp"

namespace flexsched::milp {

struct SolverOptions {
  double abs_gap = 0.0;
  double time_limit_s = 60.0;
  std::size_t node_limit = std::numeric_limits<std::size_t>::max();
  double integrality_tol = 1e-6;
  /// Round-and-resolve incumbent search at the root and every n-th node
  /// (0 disables it).
  std::size_t heuristic_interval = 25;
  LpOptions lp;

  /// abs_gap finite and >= 0, positive time limit.
  void validate() const;
};

enum class MipStatus { Optimal, GapUnproven, Infeasible, Unbounded };

const char* to_string(MipStatus status) noexcept;

struct MipResult {
  MipStatus status = MipStatus::Infeasible;
  /// Best incumbent; empty when none was found.
  std::vector<double> x;
  double objective = std::numeric_limits<double>::quiet_NaN();
  /// Best proven bound in the problem's sense.
  double bound = std::numeric_limits<double>::quiet_NaN();
  /// |objective - bound|; infinite without an incumbent.
  double gap = std::numeric_limits<double>::infinity();
  /// Nodes explored after the root relaxation.
  std::size_t nodes = 0;
  std::size_t lp_iterations = 0;
  double seconds = 0.0;

  bool has_solution() const noexcept { return !x.empty(); }
};

/// Best-first branch-and-bound over LP relaxations. Branches on the most
/// fractional integer variable (ties: lowest index). Stops once the
/// incumbent is within abs_gap of the best open bound; hitting the time or
/// node limit yields GapUnproven.
MipResult solve_bnb(const MilpProblem& problem,
                    const SolverOptions& options = {});

}  // namespace flexsched::milp
