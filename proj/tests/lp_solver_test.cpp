#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "flexsched/core.hpp"
#include "flexsched/errors.hpp"
#include "flexsched/milp/lp_solver.hpp"

namespace flexsched::milp {
namespace {

TEST(LpSolver, SingleConstraint) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 10);
  p.set_sense(Sense::Maximize);
  p.set_objective(x, 1);
  std::vector<Term> row{{x, 1}};
  p.add_constraint("c", row, Relation::LessEqual, 3);
  auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.x[x], 3, 1e-9);
}

TEST(LpSolver, TwoVariableVertex) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, kInf);
  auto y = p.add_variable("y", 0, kInf);
  p.set_sense(Sense::Maximize);
  p.set_objective(x, 3);
  p.set_objective(y, 2);
  std::vector<Term> a{{x, 1}, {y, 1}}, b{{x, 1}};
  p.add_constraint("a", a, Relation::LessEqual, 4);
  p.add_constraint("b", b, Relation::LessEqual, 2);
  auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.x[x], 2, 1e-9);
  EXPECT_NEAR(s.x[y], 2, 1e-9);
  EXPECT_NEAR(s.objective, 10, 1e-9);
}

TEST(LpSolver, Infeasible) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 10);
  std::vector<Term> row{{x, 1}};
  p.add_constraint("lo", row, Relation::GreaterEqual, 2);
  p.add_constraint("hi", row, Relation::LessEqual, 1);
  EXPECT_EQ(solve_lp(p).status, LpStatus::Infeasible);
}

TEST(LpSolver, Unbounded) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, kInf);
  auto y = p.add_variable("y", 0, kInf);
  p.set_sense(Sense::Maximize);
  p.set_objective(x, 1);
  std::vector<Term> row{{x, 1}, {y, -1}};
  p.add_constraint("c", row, Relation::LessEqual, 1);
  EXPECT_EQ(solve_lp(p).status, LpStatus::Unbounded);
}

TEST(LpSolver, EqualityAndNegativeBounds) {
  MilpProblem p;
  auto x = p.add_variable("x", -5, 5);
  auto y = p.add_variable("y", -5, 5);
  p.set_objective(x, 1);
  p.set_objective(y, 2);
  std::vector<Term> row{{x, 1}, {y, 1}};
  p.add_constraint("eq", row, Relation::Equal, 1);
  auto s = solve_lp(p);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.x[x], 5, 1e-9);
  EXPECT_NEAR(s.x[y], -4, 1e-9);
  EXPECT_NEAR(s.objective, -3, 1e-9);
}

TEST(LpRelaxation, DropsRowsImpliedByBounds) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 1);
  auto y = p.add_variable("y", 0, 1);
  p.set_sense(Sense::Maximize);
  p.set_objective(x, 1);
  p.set_objective(y, 1);
  std::vector<Term> loose{{x, 1}, {y, 1}}, tight{{x, 2}, {y, 1}};
  p.add_constraint("loose", loose, Relation::LessEqual, 5);
  p.add_constraint("tight", tight, Relation::LessEqual, 2);
  LpRelaxation relax(p);
  EXPECT_EQ(relax.rows(), 1u);
  EXPECT_EQ(relax.dropped_rows(), 1u);
  auto s = relax.solve();
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.objective, 1.5, 1e-9);
}

TEST(LpRelaxation, RejectsWiderBoundsAfterDrop) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 1);
  std::vector<Term> row{{x, 1}};
  p.add_constraint("implied", row, Relation::LessEqual, 5);
  LpRelaxation relax(p);
  ASSERT_EQ(relax.dropped_rows(), 1u);
  std::vector<double> lo{0}, hi{10};
  EXPECT_THROW(relax.solve(lo, hi), InvalidArgument);
}

TEST(LpRelaxation, ImpliedUpperBoundRelaxation) {
  // x + y <= 1 with x, y in [0,1]: the column bounds are redundant and the
  // solution must still respect them.
  MilpProblem p;
  auto x = p.add_variable("x", 0, 1);
  auto y = p.add_variable("y", 0, 1);
  p.set_sense(Sense::Maximize);
  p.set_objective(x, 2);
  p.set_objective(y, 1);
  std::vector<Term> row{{x, 1}, {y, 1}};
  p.add_constraint("gub", row, Relation::LessEqual, 1);
  LpRelaxation relax(p);
  auto s = relax.solve();
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.x[x], 1, 1e-12);
  EXPECT_NEAR(s.x[y], 0, 1e-12);
  // Tightened bounds below the implied bound must still bind.
  std::vector<double> lo{0, 0}, hi{0.25, 1};
  auto t = relax.solve(lo, hi);
  ASSERT_EQ(t.status, LpStatus::Optimal);
  EXPECT_NEAR(t.x[x], 0.25, 1e-12);
  EXPECT_NEAR(t.x[y], 0.75, 1e-12);
}

TEST(LpRelaxation, TightenedBoundsResolve) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 4);
  auto y = p.add_variable("y", 0, 4);
  p.set_sense(Sense::Maximize);
  p.set_objective(x, 1);
  p.set_objective(y, 1);
  std::vector<Term> row{{x, 2}, {y, 1}};
  p.add_constraint("c", row, Relation::LessEqual, 6);
  LpRelaxation relax(p);
  std::vector<double> lo{2, 0}, hi{4, 4};
  auto s = relax.solve(lo, hi);
  ASSERT_EQ(s.status, LpStatus::Optimal);
  EXPECT_NEAR(s.x[x], 2, 1e-9);
  EXPECT_NEAR(s.x[y], 2, 1e-9);
}

// Optimal value of a small bounded LP: every nonsingular choice of n active
// hyperplanes among rows and bounds, kept when feasible.
double vertex_oracle(const MilpProblem& p) {
  const std::size_t n = p.num_variables();
  const auto& rows = p.constraints();
  // Candidate hyperplanes: all rows plus all bounds.
  struct Plane {
    std::vector<double> a;
    double b;
  };
  std::vector<Plane> planes;
  for (const auto& r : rows) {
    Plane pl{std::vector<double>(n, 0.0), r.rhs};
    for (std::size_t i = 0; i < r.size(); ++i) pl.a[r.index[i]] = r.coef[i];
    planes.push_back(pl);
  }
  for (std::size_t j = 0; j < n; ++j) {
    Plane lo{std::vector<double>(n, 0.0), p.variables()[j].lower};
    lo.a[j] = 1;
    planes.push_back(lo);
    Plane hi{std::vector<double>(n, 0.0), p.variables()[j].upper};
    hi.a[j] = 1;
    planes.push_back(hi);
  }
  double best = p.sense() == Sense::Maximize ? -kInf : kInf;
  std::vector<std::size_t> pick(n);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t depth,
                                                          std::size_t from) {
    if (depth == n) {
      // Gaussian elimination on the n x n system.
      std::vector<std::vector<double>> m(n, std::vector<double>(n + 1));
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) m[r][c] = planes[pick[r]].a[c];
        m[r][n] = planes[pick[r]].b;
      }
      for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c; r < n; ++r)
          if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (std::abs(m[piv][c]) < 1e-12) return;
        std::swap(m[c], m[piv]);
        for (std::size_t r = 0; r < n; ++r) {
          if (r == c) continue;
          const double f = m[r][c] / m[c][c];
          for (std::size_t k = c; k <= n; ++k) m[r][k] -= f * m[c][k];
        }
      }
      std::vector<double> x(n);
      for (std::size_t c = 0; c < n; ++c) x[c] = m[c][n] / m[c][c];
      if (p.max_violation(x) > 1e-9) return;
      const double v = p.objective_value(x);
      best = p.sense() == Sense::Maximize ? std::max(best, v) : std::min(best, v);
      return;
    }
    for (std::size_t i = from; i < planes.size(); ++i) {
      pick[depth] = i;
      rec(depth + 1, i + 1);
    }
  };
  rec(0, 0);
  return best;
}

TEST(LpSolver, MatchesVertexEnumeration) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> rel(0, 2);
  int solved = 0;
  for (int rep = 0; rep < 80; ++rep) {
    MilpProblem p;
    const std::size_t n = 2 + rep % 3;
    for (std::size_t j = 0; j < n; ++j) {
      p.add_variable("x" + std::to_string(j), -2 + u(rng), 2 + u(rng));
      p.set_objective(j, u(rng));
    }
    p.set_sense(rep % 2 ? Sense::Maximize : Sense::Minimize);
    for (int r = 0; r < 3; ++r) {
      std::vector<Term> terms;
      for (std::size_t j = 0; j < n; ++j) terms.push_back({j, u(rng)});
      const int k = rel(rng);
      const Relation relation = k == 0   ? Relation::LessEqual
                                : k == 1 ? Relation::GreaterEqual
                                         : Relation::Equal;
      p.add_constraint("r" + std::to_string(r), terms, relation, 0.5 * u(rng));
    }
    const double oracle = vertex_oracle(p);
    auto s = solve_lp(p);
    if (std::isinf(oracle)) {
      EXPECT_EQ(s.status, LpStatus::Infeasible);
      continue;
    }
    ASSERT_EQ(s.status, LpStatus::Optimal);
    EXPECT_NEAR(s.objective, oracle, 1e-7);
    EXPECT_LE(p.max_violation(s.x), 1e-7);
    ++solved;
  }
  EXPECT_GT(solved, 10);
}

TEST(MilpProblem, ValidateCatchesBadInput) {
  MilpProblem p;
  p.add_variable("x", 0, 1);
  EXPECT_NO_THROW(p.validate());
  p.add_variable("x", 0, 1);
  EXPECT_THROW(p.validate(), InvalidArgument);

  MilpProblem q;
  q.add_variable("y", 0, kInf, true);
  EXPECT_THROW(q.validate(), InvalidArgument);
}

TEST(MilpProblem, MergesRepeatedIndices) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 1);
  auto y = p.add_variable("y", 0, 1);
  std::vector<Term> row{{x, 1}, {y, 0}, {x, 2}};
  p.add_constraint("c", row, Relation::LessEqual, 1);
  ASSERT_EQ(p.constraints()[0].size(), 1u);
  EXPECT_EQ(p.constraints()[0].coef[0], 3.0);
}

}  // namespace
}  // namespace flexsched::milp
