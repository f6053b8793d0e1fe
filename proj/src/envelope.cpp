#include "flexsched/envelope.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "flexsched/csv.hpp"
#include "flexsched/errors.hpp"

namespace flexsched {
namespace {

constexpr double kBoundTol = 1e-9;
constexpr double kTinyCoefficient = 1e-12;
constexpr std::size_t kOracleMaxPoints = 2'000'000;

void check_samples(std::span<const double> samples, const char* name) {
  if (samples.empty()) {
    throw InvalidArgument(std::string(name) + " sample set is empty");
  }
  for (double a : samples) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw InvalidArgument(std::string(name) +
                            " samples must be positive and finite");
    }
  }
}

// Validates the shared envelope inputs and returns baseline power with
// values inside the tolerance band snapped onto the bounds.
std::vector<double> prepare_inputs(std::span<const double> p_plus,
                                   std::span<const double> p_minus,
                                   std::span<const double> baseline_power,
                                   std::span<const double> baseline_state,
                                   PowerBounds bounds, std::size_t k,
                                   std::size_t j, std::size_t horizon) {
  check_samples(p_plus, "P+");
  check_samples(p_minus, "P-");
  RiskLevel{j, p_plus.size() * p_minus.size()}.validate();
  if (k == 0) throw InvalidArgument("envelope: k must be >= 1");
  if (horizon == 0) throw InvalidArgument("envelope: horizon must be >= 1");
  if (!(bounds.lower <= bounds.upper) || !std::isfinite(bounds.lower) ||
      !std::isfinite(bounds.upper)) {
    throw InvalidArgument("envelope: invalid power bounds");
  }
  if (baseline_state.size() < horizon + k) {
    std::ostringstream msg;
    msg << "envelope: baseline state has " << baseline_state.size()
        << " values, need at least horizon + k = " << horizon + k;
    throw InvalidArgument(msg.str());
  }
  if (baseline_power.size() < horizon + k - 1) {
    std::ostringstream msg;
    msg << "envelope: baseline power has " << baseline_power.size()
        << " values, need at least horizon + k - 1 = " << horizon + k - 1;
    throw InvalidArgument(msg.str());
  }
  for (std::size_t t = 0; t < horizon + k; ++t) {
    const double f = baseline_state[t];
    if (!(f >= 0.0 && f <= 1.0)) {
      std::ostringstream msg;
      msg << "envelope: baseline state " << f << " at step " << t
          << " outside [0,1]";
      throw InvalidArgument(msg.str());
    }
  }
  std::vector<double> pb(baseline_power.begin(),
                         baseline_power.begin() +
                             static_cast<std::ptrdiff_t>(horizon + k - 1));
  for (std::size_t t = 0; t < pb.size(); ++t) {
    if (!std::isfinite(pb[t]) || pb[t] < bounds.lower - kBoundTol ||
        pb[t] > bounds.upper + kBoundTol) {
      std::ostringstream msg;
      msg << "envelope: baseline power " << pb[t] << " kW at step " << t
          << " outside [" << bounds.lower << ", " << bounds.upper << "]";
      throw InvalidArgument(msg.str());
    }
    pb[t] = std::clamp(pb[t], bounds.lower, bounds.upper);
  }
  return pb;
}

struct PairHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const {
    return std::hash<std::int64_t>{}(p.first) * 1000003u ^
           std::hash<std::int64_t>{}(p.second);
  }
};

}  // namespace

void RiskLevel::validate() const {
  if (n == 0 || j == 0 || j > n) {
    std::ostringstream msg;
    msg << "risk level: j = " << j << " must lie in 1.." << n;
    throw InvalidArgument(msg.str());
  }
}

RiskLevel RiskLevel::from_alpha(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("risk level: alpha must lie in (0, 1]");
  }
  if (n == 0) throw InvalidArgument("risk level: empty sample product");
  const auto j = static_cast<std::size_t>(
      std::llround(alpha * static_cast<double>(n)));
  return RiskLevel{std::clamp<std::size_t>(j, 1, n), n};
}

void FlexibilityEnvelope::validate() const {
  if (lower.size() != upper.size()) {
    throw InvalidArgument("envelope: bound series differ in length");
  }
  for (std::size_t t = 0; t < lower.size(); ++t) {
    if (!std::isfinite(lower[t]) || !std::isfinite(upper[t]) ||
        lower[t] > 0.0 || upper[t] < 0.0) {
      std::ostringstream msg;
      msg << "envelope: invalid bounds [" << lower[t] << ", " << upper[t]
          << "] at step " << t;
      throw InvalidArgument(msg.str());
    }
  }
}

double tail_average_max(std::span<const double> samples,
                        std::size_t multiplicity, std::size_t j) {
  const std::size_t total = samples.size() * multiplicity;
  if (j == 0 || j > total) {
    std::ostringstream msg;
    msg << "tail_average_max: j = " << j << " outside 1.." << total;
    throw InvalidArgument(msg.str());
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // Running minimum of the prefix means keeps the result non-increasing in j
  // under rounding.
  double sum = 0.0;
  double best = std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (double v : sorted) {
    for (std::size_t m = 0; m < multiplicity && count < j; ++m) {
      sum += v;
      ++count;
      best = std::min(best, sum / static_cast<double>(count));
    }
    if (count == j) break;
  }
  return best;
}

ExtremeCoefficients extreme_coefficients(std::span<const double> p_plus,
                                         std::span<const double> p_minus,
                                         std::size_t j) {
  return {tail_average_max(p_plus, p_minus.size(), j),
          tail_average_max(p_minus, p_plus.size(), j)};
}

FlexibilityEnvelope compute_envelope(std::span<const double> p_plus,
                                     std::span<const double> p_minus,
                                     std::span<const double> baseline_power,
                                     std::span<const double> baseline_state,
                                     PowerBounds bounds, std::size_t k,
                                     std::size_t j, std::size_t horizon) {
  const auto pb = prepare_inputs(p_plus, p_minus, baseline_power,
                                 baseline_state, bounds, k, j, horizon);
  const auto a = extreme_coefficients(p_plus, p_minus, j);
  const bool minus_binding = a.a_minus >= kTinyCoefficient;
  const bool plus_binding = a.a_plus >= kTinyCoefficient;

  FlexibilityEnvelope env;
  env.alpha = RiskLevel{j, p_plus.size() * p_minus.size()}.alpha();
  env.k = k;
  env.lower.resize(horizon);
  env.upper.resize(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t l = 1; l <= k; ++l) {
      const double f = baseline_state[t + l];
      const double dl = static_cast<double>(l);
      if (minus_binding) lo = std::max(lo, -f / (a.a_minus * dl));
      if (plus_binding) hi = std::min(hi, (1.0 - f) / (a.a_plus * dl));
    }
    for (std::size_t l = 0; l < k; ++l) {
      lo = std::max(lo, bounds.lower - pb[t + l]);
      hi = std::min(hi, bounds.upper - pb[t + l]);
    }
    env.lower[t] = lo;
    env.upper[t] = hi;
  }
  return env;
}

FlexibilityEnvelope compute_envelope(const StorageModel& model,
                                     std::span<const double> baseline_power,
                                     std::span<const double> baseline_state,
                                     PowerBounds bounds, std::size_t k,
                                     RiskLevel risk, std::size_t horizon) {
  if (risk.n != model.p_plus.size() * model.p_minus.size()) {
    throw InvalidArgument("envelope: risk level built for another sample set");
  }
  return compute_envelope(model.p_plus, model.p_minus, baseline_power,
                          baseline_state, bounds, k, risk.j, horizon);
}

FlexibilityEnvelope compute_envelope_oracle(
    std::span<const double> p_plus, std::span<const double> p_minus,
    std::span<const double> baseline_power,
    std::span<const double> baseline_state, PowerBounds bounds, std::size_t k,
    std::size_t j, std::size_t horizon) {
  const std::size_t n = p_plus.size() * p_minus.size();
  if (n > kOracleMaxTuples) {
    std::ostringstream msg;
    msg << "envelope oracle: " << n << " parameter tuples exceed the limit of "
        << kOracleMaxTuples;
    throw InvalidArgument(msg.str());
  }
  const auto pb = prepare_inputs(p_plus, p_minus, baseline_power,
                                 baseline_state, bounds, k, j, horizon);

  // Distinct coordinate sums of every c-subset of tuples, c = 0..j.
  std::vector<std::pair<double, double>> tuples;
  for (double ap : p_plus) {
    for (double am : p_minus) tuples.emplace_back(ap, am);
  }
  using Key = std::pair<std::int64_t, std::int64_t>;
  auto key_of = [](double x, double y) {
    return Key{std::llround(x * 1e12), std::llround(y * 1e12)};
  };
  std::vector<std::vector<std::pair<double, double>>> sums(j + 1);
  std::vector<std::unordered_set<Key, PairHash>> seen(j + 1);
  sums[0].emplace_back(0.0, 0.0);
  for (const auto& [ap, am] : tuples) {
    for (std::size_t c = j; c >= 1; --c) {
      const auto& prev = sums[c - 1];
      const std::size_t prev_size = prev.size();
      for (std::size_t i = 0; i < prev_size; ++i) {
        const double x = prev[i].first + ap;
        const double y = prev[i].second + am;
        if (seen[c].insert(key_of(x, y)).second) {
          sums[c].emplace_back(x, y);
          if (sums[c].size() > kOracleMaxPoints) {
            throw InvalidArgument(
                "envelope oracle: too many distinct averages to enumerate");
          }
        }
      }
    }
  }
  const double dj = static_cast<double>(j);

  FlexibilityEnvelope env;
  env.alpha = static_cast<double>(j) / static_cast<double>(n);
  env.k = k;
  env.lower.resize(horizon);
  env.upper.resize(horizon);
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < horizon; ++t) {
    // Feasible r for the decrease problem (a- constraints) and for the
    // increase problem (a+ constraints), both with the power bounds.
    double dec_lo = -inf, dec_hi = inf, inc_lo = -inf, inc_hi = inf;
    for (std::size_t l = 0; l < k; ++l) {
      const double rmin = bounds.lower - pb[t + l];
      const double rmax = bounds.upper - pb[t + l];
      dec_lo = std::max(dec_lo, rmin);
      dec_hi = std::min(dec_hi, rmax);
      inc_lo = std::max(inc_lo, rmin);
      inc_hi = std::min(inc_hi, rmax);
    }
    for (const auto& [sp, sm] : sums[j]) {
      const double ap = sp / dj;
      const double am = sm / dj;
      for (std::size_t l = 1; l <= k; ++l) {
        const double f = baseline_state[t + l];
        const double dl = static_cast<double>(l);
        // 0 <= l*a*r + f <= 1
        if (am >= kTinyCoefficient) {
          dec_lo = std::max(dec_lo, -f / (dl * am));
          dec_hi = std::min(dec_hi, (1.0 - f) / (dl * am));
        }
        if (ap >= kTinyCoefficient) {
          inc_lo = std::max(inc_lo, -f / (dl * ap));
          inc_hi = std::min(inc_hi, (1.0 - f) / (dl * ap));
        }
      }
    }
    if (dec_lo > dec_hi || inc_lo > inc_hi) {
      throw InvalidArgument("envelope oracle: empty feasible set");
    }
    env.lower[t] = dec_lo;
    env.upper[t] = inc_hi;
  }
  return env;
}

void write_envelope(const FlexibilityEnvelope& env,
                    const std::filesystem::path& path) {
  env.validate();
  csv::Writer out(path);
  out.meta("alpha", csv::format(env.alpha));
  out.meta("k", std::to_string(env.k));
  out.meta("asset", env.asset_id);
  out.header({"t", "lower_kw", "upper_kw"});
  for (std::size_t t = 0; t < env.horizon(); ++t) {
    const double row[] = {static_cast<double>(t), env.lower[t], env.upper[t]};
    out.row(row);
  }
  out.close();
}

FlexibilityEnvelope read_envelope(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  FlexibilityEnvelope env;
  env.lower = table.column("lower_kw");
  env.upper = table.column("upper_kw");
  try {
    if (auto it = table.meta.find("alpha"); it != table.meta.end()) {
      env.alpha = std::stod(it->second);
    }
    if (auto it = table.meta.find("k"); it != table.meta.end()) {
      env.k = static_cast<std::size_t>(std::stoul(it->second));
    }
  } catch (const std::exception&) {
    throw InvalidArgument("envelope '" + path.string() +
                          "': malformed alpha/k metadata");
  }
  if (auto it = table.meta.find("asset"); it != table.meta.end()) {
    env.asset_id = it->second;
  }
  env.validate();
  return env;
}

}  // namespace flexsched
