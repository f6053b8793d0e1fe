#include <gtest/gtest.h>

#include "flexsched/errors.hpp"
#include "flexsched/milp/scheduling.hpp"
#include "flexsched/simpool.hpp"
#include "instances.hpp"

namespace flexsched::milp {
namespace {

FlexibilityEnvelope flat(std::size_t h, double lo, double hi, std::size_t k) {
  FlexibilityEnvelope e;
  e.lower.assign(h, lo);
  e.upper.assign(h, hi);
  e.k = k;
  return e;
}

SolverOptions exact() {
  SolverOptions o;
  o.abs_gap = 0.0;
  return o;
}

TEST(Window, StartArithmetic) {
  EXPECT_EQ(window_start(0, 2), 0u);
  EXPECT_EQ(window_start(3, 2), 0u);
  EXPECT_EQ(window_start(4, 2), 1u);
  EXPECT_EQ(window_start(7, 3), 3u);
}

TEST(General, ZeroRequestNeedsNoActivations) {
  std::vector<FlexibilityEnvelope> env{flat(3, -1, 1, 2), flat(3, -1, 1, 2)};
  std::vector<double> r(3, 0.0);
  auto sp = build_general(env, r, 2);
  EXPECT_EQ(sp.problem.num_integers(), 6u);
  auto s = solve_schedule(sp, exact());
  ASSERT_EQ(s.status, ScheduleStatus::Optimal);
  EXPECT_NEAR(s.objective, 0, 1e-9);
  for (auto u : s.u) EXPECT_EQ(u, 0);
}

TEST(General, SingleActivationCovers) {
  std::vector<FlexibilityEnvelope> env{flat(2, 0, 5, 2)};
  std::vector<double> r{3, 3};
  auto s = solve_schedule(build_general(env, r, 2), exact());
  ASSERT_EQ(s.status, ScheduleStatus::Optimal);
  EXPECT_NEAR(s.objective, 1, 1e-9);
  EXPECT_TRUE(s.started(0, 0));
}

TEST(General, ExcessRequestInfeasible) {
  std::vector<FlexibilityEnvelope> env{flat(2, 0, 1, 2), flat(2, 0, 1, 2)};
  std::vector<double> r{1, 3};
  auto s = solve_schedule(build_general(env, r, 2), exact());
  EXPECT_EQ(s.status, ScheduleStatus::Infeasible);
}

TEST(General, RejectsMismatchedHorizon) {
  std::vector<FlexibilityEnvelope> env{flat(2, 0, 1, 2), flat(3, 0, 1, 2)};
  std::vector<double> r{1, 1};
  EXPECT_THROW(build_general(env, r, 2), InvalidArgument);
}

TEST(Committed, ZeroPointFeasibleAndScaling) {
  std::vector<FlexibilityEnvelope> env{flat(1, 0, 2, 1)};
  std::vector<double> r{4};
  auto sp = build_committed(env, r, 1);
  std::vector<double> zero(sp.problem.num_variables(), 0.0);
  EXPECT_LE(sp.problem.max_violation(zero), 0.0);

  // Maximize d_0 on top of the commitment rows.
  sp.problem.set_sense(Sense::Maximize);
  sp.problem.set_objective(sp.layout.d(0), 1.0);
  auto s = solve_schedule(sp, exact());
  ASSERT_TRUE(s.usable());
  EXPECT_NEAR(s.d[0], 0.5, 1e-9);
  EXPECT_TRUE(s.started(0, 0));
  EXPECT_THROW(build_committed(env, r, 1, 0.1), InvalidArgument);
}

TEST(SelfConsumption, RejectsNegativeRequest) {
  std::vector<FlexibilityEnvelope> env{flat(2, -1, 1, 1)};
  std::vector<double> r{1, -1};
  EXPECT_THROW(build_self_consumption(env, r, 1), InvalidArgument);
}

TEST(PeakReduction, RejectsPositiveRequestAndHasRho) {
  std::vector<FlexibilityEnvelope> env{flat(2, -1, 1, 1)};
  std::vector<double> pb{3, 3}, bad{0, 1}, ok{-1, 0};
  EXPECT_THROW(build_peak_reduction(env, pb, bad, 1), InvalidArgument);
  auto sp = build_peak_reduction(env, pb, ok, 1);
  EXPECT_TRUE(sp.layout.has_rho);
  EXPECT_EQ(sp.problem.num_variables(), 2u + 2u + 1u);
}

TEST(BruteForce, EnumerationCount) {
  std::vector<FlexibilityEnvelope> env{flat(2, 0, 5, 2)};
  std::vector<double> r{3, 3};
  auto s = brute_force_schedule(env, r, ScheduleKind::General, 2);
  EXPECT_EQ(s.status, ScheduleStatus::Optimal);
  EXPECT_NEAR(s.objective, 1, 1e-12);
  std::vector<FlexibilityEnvelope> big(5, flat(20, 0, 1, 1));
  std::vector<double> rb(20, 0.0);
  EXPECT_THROW(brute_force_schedule(big, rb, ScheduleKind::General, 1),
               InvalidArgument);
}

TEST(BruteForce, SelfConsumptionHandCase) {
  // H=3, k=1: each activation covers t..t+2. Asset 0 can give 1 kW in every
  // step, asset 1 gives 2 kW only at t=2 when started at 2.
  FlexibilityEnvelope a = flat(3, 0, 1, 1);
  FlexibilityEnvelope b = flat(3, 0, 0, 1);
  b.upper[2] = 2;
  std::vector<FlexibilityEnvelope> env{a, b};
  std::vector<double> r{2, 1, 3};
  auto s = brute_force_schedule(env, r, ScheduleKind::SelfConsumption, 1);
  // Asset 0 at 0 covers steps 0..2 with 1 kW; asset 1 at 2 adds 2 kW at t=2.
  // Objective: 1 + 1 + 3 = 5.
  EXPECT_NEAR(s.objective, 5, 1e-12);
  auto m = solve_schedule(build_self_consumption(env, r, 1), exact());
  EXPECT_NEAR(m.objective, 5, 1e-6);
}

TEST(BruteForce, ZeroRequest) {
  std::vector<FlexibilityEnvelope> env{flat(3, -1, 1, 1), flat(3, -2, 2, 1)};
  std::vector<double> r(3, 0.0), pb{4, 9, 6};
  auto sc = brute_force_schedule(env, r, ScheduleKind::SelfConsumption, 1);
  EXPECT_EQ(sc.objective, 0.0);
  auto pk = brute_force_schedule(env, r, ScheduleKind::PeakReduction, 1, 0.0, pb);
  EXPECT_EQ(pk.objective, 9.0);
}

class OracleEquivalence : public ::testing::TestWithParam<ScheduleKind> {};

TEST_P(OracleEquivalence, RandomInstances) {
  const ScheduleKind kind = GetParam();
  Rng rng(kind == ScheduleKind::PeakReduction ? 31 : 37);
  for (int rep = 0; rep < 20; ++rep) {
    auto c = testing::random_schedule_case(rng, kind);
    auto sp = kind == ScheduleKind::PeakReduction
                  ? build_peak_reduction(c.envelopes, c.baseline, c.request, c.k)
                  : build_self_consumption(c.envelopes, c.request, c.k);
    auto s = solve_schedule(sp, exact());
    ASSERT_EQ(s.status, ScheduleStatus::Optimal);
    auto b = brute_force_schedule(c.envelopes, c.request, kind, c.k, 0.0,
                                  c.baseline);
    EXPECT_NEAR(s.objective, b.objective, 1e-6);
    for (std::size_t i = 0; i < s.assets; ++i) {
      int starts = 0;
      for (std::size_t t = 0; t < s.horizon; ++t) starts += s.started(i, t);
      EXPECT_LE(starts, 1);
    }
    for (std::size_t t = 0; t < s.horizon; ++t) {
      auto [lo, hi] = testing::activated_bounds(c.envelopes, s, t);
      EXPECT_GE(s.committed[t], lo - 1e-9);
      EXPECT_LE(s.committed[t], hi + 1e-9);
      EXPECT_GE(s.d[t], -1e-12);
      EXPECT_LE(s.d[t], 1 + 1e-12);
    }
    EXPECT_LE(commitment_violation(c.envelopes, s), 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(Objectives, OracleEquivalence,
                         ::testing::Values(ScheduleKind::SelfConsumption,
                                           ScheduleKind::PeakReduction));

TEST(PeakReduction, ObjectiveBoundedByDesiredPeak) {
  std::vector<FlexibilityEnvelope> env{flat(4, -1, 1, 1)};
  std::vector<double> p{8, 12, 9, 7};
  const double c = 9.0;
  auto r = gen_peak_request(p, c);
  auto s = solve_schedule(build_peak_reduction(env, p, r, 1), exact());
  ASSERT_TRUE(s.usable());
  EXPECT_GE(s.objective, c - 1e-9);
  EXPECT_NEAR(s.objective, 11.0, 1e-6);
}

TEST(SelfConsumption, MonotoneInEnvelopeWidth) {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    auto c = testing::random_schedule_case(rng, ScheduleKind::SelfConsumption, 3, 6);
    auto narrow = solve_schedule(build_self_consumption(c.envelopes, c.request, c.k), exact());
    for (auto& e : c.envelopes)
      for (double& u : e.upper) u *= 1.5;
    auto wide = solve_schedule(build_self_consumption(c.envelopes, c.request, c.k), exact());
    EXPECT_GE(wide.objective, narrow.objective - 1e-6);
  }
}

TEST(ScheduleKind, ParseRoundTrip) {
  for (auto k : {ScheduleKind::General, ScheduleKind::Committed,
                 ScheduleKind::SelfConsumption, ScheduleKind::PeakReduction})
    EXPECT_EQ(parse_schedule_kind(to_string(k)), k);
  EXPECT_THROW(parse_schedule_kind("nonsense"), Error);
}

}  // namespace
}  // namespace flexsched::milp
