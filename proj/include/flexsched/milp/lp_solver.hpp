#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "flexsched/milp/problem.hpp"

namespace flexsched::milp {

enum class LpStatus { Optimal, Infeasible, Unbounded };

const char* to_string(LpStatus status) noexcept;

struct LpOptions {
  /// 0 selects a cap proportional to the problem size.
  std::size_t max_iterations = 0;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  std::size_t refactor_interval = 100;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  std::size_t degenerate_switch = 150;
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  std::vector<double> x;
  /// In the problem's own sense (maximization objectives are not negated).
  double objective = 0.0;
  std::size_t iterations = 0;
};

/// Column-oriented copy of a problem's constraint matrix, reusable across
/// solves that only tighten variable bounds. Inequalities implied by the
/// variable bounds are dropped, and upper bounds implied by the rows are
/// relaxed while lower bounds stay at or above the problem bounds.
class LpRelaxation {
 public:
  explicit LpRelaxation(const MilpProblem& problem);

  LpSolution solve(const LpOptions& options = {}) const;
  /// Solve with tightened variable bounds (integrality ignored). Bounds
  /// wider than the problem bounds are rejected when rows were dropped.
  LpSolution solve(std::span<const double> lower, std::span<const double> upper,
                   const LpOptions& options = {}) const;

  /// Rows kept after dropping implied inequalities.
  std::size_t rows() const noexcept { return rhs_.size(); }
  std::size_t dropped_rows() const noexcept { return dropped_rows_; }
  std::size_t cols() const noexcept { return cost_.size(); }

 private:
  friend class SimplexRun;

  std::vector<std::size_t> col_start_;
  std::vector<std::uint32_t> row_index_;
  std::vector<double> value_;
  std::vector<double> rhs_;
  std::vector<Relation> relation_;
  std::vector<double> cost_;  // minimization form
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<double> price_weight_;
  std::vector<double> implied_upper_;
  bool maximize_ = false;
  std::size_t dropped_rows_ = 0;
};

/// Bounded-variable revised primal simplex on the continuous relaxation.
/// Throws SolverError when the iteration cap is hit or the basis becomes
/// numerically singular.
LpSolution solve_lp(const MilpProblem& problem, const LpOptions& options = {});

}  // namespace flexsched::milp
