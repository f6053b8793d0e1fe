#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "flexsched/errors.hpp"
#include "flexsched/storage_model.hpp"

namespace flexsched {
namespace {

OperationLog make_log(std::vector<double> state, std::vector<double> request) {
  OperationLog log;
  log.state = std::move(state);
  log.request_kw = std::move(request);
  log.baseline_kw.assign(log.state.size(), 1.0);
  for (std::size_t t = 0; t < log.state.size(); ++t)
    log.conditions.push_back({0.0});
  return log;
}

TEST(BaselineModel, SinglePointInterpolates) {
  std::vector<std::vector<double>> x{{0.0}};
  std::vector<double> s{0.5};
  auto m = fit_baseline_model(x, s, 1.0, 1e-9);
  EXPECT_NEAR(m.predict(std::vector<double>{0.0}), 0.5, 1e-6);
}

TEST(BaselineModel, TwoPointSystemMatchesHandSolution) {
  std::vector<std::vector<double>> x{{0.0}, {1.0}};
  std::vector<double> s{0.2, 0.8};
  const double sigma = 0.5, lambda = 1e-8;
  auto m = fit_baseline_model(x, s, sigma, lambda);
  // 2x2 system [[1+l, c],[c, 1+l]] w = s with c = exp(-1/(2 sigma^2)).
  const double c = std::exp(-1.0 / (2 * sigma * sigma));
  const double det = (1 + lambda) * (1 + lambda) - c * c;
  const double w0 = ((1 + lambda) * 0.2 - c * 0.8) / det;
  const double w1 = ((1 + lambda) * 0.8 - c * 0.2) / det;
  EXPECT_NEAR(m.weights()[0], w0, 1e-9);
  EXPECT_NEAR(m.weights()[1], w1, 1e-9);
  const double p0 = m.predict(std::vector<double>{0.0});
  const double p1 = m.predict(std::vector<double>{1.0});
  EXPECT_GE(p0, 0.19);
  EXPECT_LE(p0, 0.21);
  EXPECT_GE(p1, 0.79);
  EXPECT_LE(p1, 0.81);
}

TEST(BaselineModel, RejectsStateOutsideUnitInterval) {
  std::vector<std::vector<double>> x{{0.0}, {1.0}};
  std::vector<double> s{0.2, 1.3};
  EXPECT_THROW(fit_baseline_model(x, s), InvalidArgument);
}

TEST(BaselineModel, ResidualShrinksWithRidge) {
  std::vector<std::vector<double>> x;
  std::vector<double> s;
  for (int i = 0; i < 12; ++i) {
    x.push_back({i * 0.3, std::sin(i * 0.7)});
    s.push_back(0.5 + 0.3 * std::sin(i * 1.3));
  }
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-1, 1e-2, 1e-3, 1e-4, 1e-6}) {
    auto m = fit_baseline_model(x, s, 1.0, lambda);
    double r = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = m.predict_unclamped(x[i]) - s[i];
      r += e * e;
    }
    EXPECT_LE(r, prev + 1e-15);
    prev = r;
  }
}

TEST(BaselineModel, PredictionsClamped) {
  std::vector<std::vector<double>> x{{0.0}, {0.1}};
  std::vector<double> s{1.0, 0.0};
  auto m = fit_baseline_model(x, s, 1.0, 1e-9);
  for (double e = -1; e <= 1; e += 0.05) {
    const double p = m.predict(std::vector<double>{e});
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
}

TEST(Episodes, RequestThenRecovery) {
  auto log = make_log({0.5, 0.55, 0.6, 0.58, 0.56}, {2, 2, 0, 0, 0});
  std::vector<double> f(5, 0.5);
  auto eps = segment_episodes(log, f, 0.05);
  ASSERT_EQ(eps.size(), 2u);
  EXPECT_EQ(eps[0].kind, EpisodeKind::Request);
  EXPECT_EQ(eps[0].start, 0u);
  EXPECT_EQ(eps[0].length, 2u);
  EXPECT_EQ(eps[1].kind, EpisodeKind::Recovery);
  EXPECT_EQ(eps[1].start, 2u);
}

TEST(Episodes, NoRequestsNoEpisodes) {
  auto log = make_log({0.5, 0.5, 0.5}, {0, 0, 0});
  std::vector<double> f(3, 0.5);
  EXPECT_TRUE(segment_episodes(log, f).empty());
}

TEST(Episodes, SignChangeEndsRequest) {
  auto log = make_log({0.5, 0.6, 0.58, 0.55}, {3, -1, 0, 0});
  std::vector<double> f(4, 0.5);
  auto eps = segment_episodes(log, f);
  ASSERT_GE(eps.size(), 2u);
  EXPECT_EQ(eps[0].length, 1u);
  EXPECT_EQ(eps[0].end, EpisodeEnd::SignChange);
  EXPECT_EQ(eps[1].kind, EpisodeKind::Request);
  EXPECT_EQ(eps[1].start, 1u);
}

TEST(RequestSamples, PlugIntoFormula) {
  auto log = make_log({0.4, 0.5, 0.6, 0.6}, {2, 2, 0, 0});
  std::vector<double> f(4, 0.4);
  f[3] = 0.6;
  auto eps = segment_episodes(log, f);
  auto samples = identify_request_samples(log, eps, f);
  ASSERT_EQ(samples.plus.size(), 1u);
  EXPECT_NEAR(samples.plus[0], 0.05, 1e-12);
}

TEST(RequestSamples, NonPositiveDiscarded) {
  // Sample (0.5 - 0.6 - (0.5 - 0.5)) / 2 = -0.05.
  auto log = make_log({0.5, 0.5, 0.5}, {1, 1, 0});
  std::vector<double> f{0.5, 0.55, 0.6};
  auto eps = segment_episodes(log, f);
  auto samples = identify_request_samples(log, eps, f);
  EXPECT_TRUE(samples.plus.empty());
  EXPECT_EQ(samples.discarded_nonpositive, 1u);
}

TEST(RecoveryRate, DegenerateStartReturnsZero) {
  EXPECT_EQ(fit_recovery_rate(0.0, 0.1, 4), 0.0);
}

TEST(RecoveryRate, InvertsGeometricDecay) {
  const double b = 0.2;
  EXPECT_NEAR(fit_recovery_rate(0.3, 0.3 * std::pow(1 - b, 5), 5), b, 1e-6);
}

TEST(RecoveryParameter, MaxOverEpisodes) {
  // Two request/recovery pairs decaying at 0.1 and 0.3 around f = 0.5. Each
  // recovery closes on the state where the next request (or the log) starts.
  std::vector<double> s{0.5}, r;
  auto episode = [&](double rate) {
    r.push_back(1.0);
    double dev = s.back() - 0.5 + 0.1;
    for (int i = 0; i < 3; ++i) {
      s.push_back(0.5 + dev);
      r.push_back(0.0);
      dev *= 1 - rate;
    }
    s.push_back(0.5 + dev);
  };
  episode(0.1);
  episode(0.3);
  r.push_back(0.0);
  auto log = make_log(s, r);
  std::vector<double> f(s.size(), 0.5);
  auto eps = segment_episodes(log, f, 1e-6);
  EXPECT_NEAR(identify_recovery_parameter(log, eps, f), 0.3, 1e-6);
}

TEST(RecoveryParameter, NoRecoveryEpisodeThrows) {
  auto log = make_log({0.5, 0.5}, {0, 0});
  std::vector<double> f(2, 0.5);
  EXPECT_THROW(identify_recovery_parameter(log, {}, f), InvalidArgument);
}

TEST(PredictState, FixedPoint) {
  std::vector<double> r(5, 0.0), f(6, 0.4);
  auto s = predict_state(0.4, r, f, 0.1, 0.1, 0.3);
  for (double v : s) EXPECT_DOUBLE_EQ(v, 0.4);
}

TEST(PredictState, HandRecursion) {
  std::vector<double> r{2, 0}, f(3, 0.5);
  auto s = predict_state(0.5, r, f, 0.1, 0.1, 0.5);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_NEAR(s[0], 0.5, 1e-15);
  EXPECT_NEAR(s[1], 0.7, 1e-15);
  EXPECT_NEAR(s[2], 0.6, 1e-15);
}

TEST(PredictState, TracksBaselineRamp) {
  std::vector<double> r(6, 0.0), f;
  for (int t = 0; t < 7; ++t) f.push_back(0.2 + 0.05 * t);
  auto s = predict_state(f[0], r, f, 0.1, 0.1, 0.4);
  for (std::size_t t = 0; t < f.size(); ++t) EXPECT_NEAR(s[t], f[t], 1e-15);
}

TEST(OperationLogIo, RoundTrip) {
  auto log = make_log({0.5, 0.55, 0.6}, {2, 2, 0});
  log.conditions = {{1.5, 2.0}, {1.25, 3.0}, {0.1, 0.2}};
  auto path = std::filesystem::temp_directory_path() / "flexsched_log_test.csv";
  write_operation_log(log, path);
  auto back = read_operation_log(path);
  EXPECT_EQ(back.state, log.state);
  EXPECT_EQ(back.request_kw, log.request_kw);
  EXPECT_EQ(back.conditions, log.conditions);
  std::filesystem::remove(path);
}

TEST(StorageModelIo, RoundTrip) {
  StorageModel m;
  m.p_plus = {0.03, 0.031};
  m.p_minus = {0.02};
  m.b_f = 0.2;
  std::vector<std::vector<double>> x{{0.0}, {1.0}};
  std::vector<double> s{0.2, 0.8};
  m.baseline = fit_baseline_model(x, s, 0.5, 1e-4);
  auto path = std::filesystem::temp_directory_path() / "flexsched_model_test.json";
  write_storage_model(m, path);
  auto back = read_storage_model(path);
  EXPECT_EQ(back.p_plus, m.p_plus);
  EXPECT_EQ(back.p_minus, m.p_minus);
  EXPECT_EQ(back.b_f, m.b_f);
  EXPECT_EQ(back.baseline.weights(), m.baseline.weights());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace flexsched
