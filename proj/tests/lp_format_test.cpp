#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "flexsched/errors.hpp"
#include "flexsched/milp/lp_format.hpp"
#include "flexsched/milp/scheduling.hpp"

namespace flexsched::milp {
namespace {

FlexibilityEnvelope flat(std::size_t h, double lo, double hi) {
  FlexibilityEnvelope e;
  e.lower.assign(h, lo);
  e.upper.assign(h, hi);
  return e;
}

TEST(LpFormat, EmptyObjectiveOneConstraint) {
  MilpProblem p;
  auto x = p.add_variable("x", 0, 4);
  std::vector<Term> row{{x, 1.5}};
  p.add_constraint("c1", row, Relation::LessEqual, 3);
  std::ostringstream out;
  write_lp(p, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("Minimize"), std::string::npos);
  EXPECT_NE(text.find("Subject To"), std::string::npos);
  EXPECT_NE(text.find("Bounds"), std::string::npos);
  EXPECT_NE(text.find("End"), std::string::npos);
  std::istringstream in(text);
  auto back = parse_lp(in);
  EXPECT_TRUE(structurally_equal(p, back));
}

TEST(LpFormat, PeakProblemCounts) {
  std::vector<FlexibilityEnvelope> env{flat(2, -1, 1), flat(2, -2, 0.5)};
  std::vector<double> pb{3, 4}, r{-1, -2};
  auto sp = build_peak_reduction(env, pb, r, 1);
  std::ostringstream out;
  write_lp(sp.problem, out);
  std::istringstream in(out.str());
  auto back = parse_lp(in);
  EXPECT_EQ(back.num_integers(), 4u);
  EXPECT_EQ(back.num_variables(), 4u + 2u + 1u);
  EXPECT_TRUE(structurally_equal(sp.problem, back));
}

TEST(LpFormat, RoundTripKeepsFullPrecision) {
  MilpProblem p;
  p.set_sense(Sense::Maximize);
  auto x = p.add_variable("x", -kInf, kInf);
  auto y = p.add_binary("y");
  auto z = p.add_variable("z", -2.5, 1.0 / 3.0, true);
  p.set_objective(x, 0.1);
  p.set_objective(z, -1e-17 + 2.0 / 7.0);
  std::vector<Term> a{{x, 1.0 / 3.0}, {y, -2}, {z, 1e-9}};
  std::vector<Term> b{{x, 1}, {z, 1}};
  p.add_constraint("a", a, Relation::GreaterEqual, -0.7);
  p.add_constraint("b", b, Relation::Equal, 0.125);
  std::ostringstream out;
  write_lp(p, out);
  std::istringstream in(out.str());
  auto back = parse_lp(in);
  EXPECT_TRUE(structurally_equal(p, back, 0.0));
}

TEST(LpFormat, LongRowsWrap) {
  MilpProblem p;
  std::vector<Term> row;
  for (int i = 0; i < 400; ++i) row.push_back({p.add_binary("u_" + std::to_string(i)), 1.0 + i});
  p.add_constraint("long", row, Relation::LessEqual, 10);
  std::ostringstream out;
  write_lp(p, out);
  std::istringstream lines(out.str());
  std::string line;
  while (std::getline(lines, line)) EXPECT_LE(line.size(), 510u);
  std::istringstream in(out.str());
  EXPECT_TRUE(structurally_equal(p, parse_lp(in)));
}

TEST(LpFormat, ParsesCommonVariants) {
  std::istringstream in(
      "\\ comment\nmax\n obj: 2 x + 3 y\nst\n c1: x + y < 4\n c2: x - y >= -1\n"
      "bounds\n x free\n 0 <= y <= 3\ngenerals\n y\nend\n");
  auto p = parse_lp(in);
  EXPECT_EQ(p.sense(), Sense::Maximize);
  ASSERT_EQ(p.num_variables(), 2u);
  EXPECT_EQ(p.variables()[0].lower, -kInf);
  EXPECT_TRUE(p.variables()[1].integer);
  EXPECT_EQ(p.constraints()[0].relation, Relation::LessEqual);
}

TEST(LpFormat, RejectsGarbage) {
  std::istringstream in("Minimize\n obj: x +\nSubject To\n c: x >= \nEnd\n");
  EXPECT_THROW(parse_lp(in), Error);
}

TEST(LpFormat, UnwritablePathIsIoError) {
  MilpProblem p;
  p.add_variable("x", 0, 1);
  const auto blocker = std::filesystem::temp_directory_path() / "flexsched_lp_blocker";
  { std::ofstream(blocker) << "x"; }
  try {
    write_lp(p, blocker / "out.lp");
    FAIL() << "expected IoError";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::Io);
  }
  std::filesystem::remove(blocker);
}

}  // namespace
}  // namespace flexsched::milp
