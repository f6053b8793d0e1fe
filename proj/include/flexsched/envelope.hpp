#pragma once

// Risk-aware flexibility envelopes of a virtual storage asset.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flexsched/storage_model.hpp"

namespace flexsched {

/// alpha = j / n with n = |P+| * |P-|.
struct RiskLevel {
  std::size_t j = 1;
  std::size_t n = 1;

  double alpha() const { return static_cast<double>(j) / static_cast<double>(n); }
  void validate() const;

  /// j = max(1, round(alpha * n)), capped at n.
  static RiskLevel from_alpha(double alpha, std::size_t n);
};

struct PowerBounds {
  double lower = 0.0;
  double upper = 0.0;
};

struct FlexibilityEnvelope {
  std::vector<double> lower;  // <= 0
  std::vector<double> upper;  // >= 0
  double alpha = 1.0;
  std::size_t k = 1;
  std::string asset_id;

  std::size_t horizon() const noexcept { return lower.size(); }
  /// Equal lengths, finite values, lower <= 0 <= upper.
  void validate() const;
};

/// Mean of the j largest values of the multiset in which every value of
/// `samples` appears `multiplicity` times.
double tail_average_max(std::span<const double> samples,
                        std::size_t multiplicity, std::size_t j);

/// Largest a+ and a- coordinates over all j-point averages of P+ x P-.
struct ExtremeCoefficients {
  double a_plus = 0.0;
  double a_minus = 0.0;
};
ExtremeCoefficients extreme_coefficients(std::span<const double> p_plus,
                                         std::span<const double> p_minus,
                                         std::size_t j);

/// Closed-form envelope for t = 0..horizon-1. baseline_state needs
/// horizon + k values (f at t+1..t+k), baseline_power horizon + k - 1.
FlexibilityEnvelope compute_envelope(std::span<const double> p_plus,
                                     std::span<const double> p_minus,
                                     std::span<const double> baseline_power,
                                     std::span<const double> baseline_state,
                                     PowerBounds bounds, std::size_t k,
                                     std::size_t j, std::size_t horizon);

FlexibilityEnvelope compute_envelope(const StorageModel& model,
                                     std::span<const double> baseline_power,
                                     std::span<const double> baseline_state,
                                     PowerBounds bounds, std::size_t k,
                                     RiskLevel risk, std::size_t horizon);

/// Largest product size accepted by the enumeration oracle.
inline constexpr std::size_t kOracleMaxTuples = 25;

/// Reference implementation: materializes every distinct j-point average of
/// P+ x P- and intersects the resulting scalar constraints on r for each t.
/// Throws InvalidArgument when |P+|*|P-| exceeds kOracleMaxTuples or the
/// average set grows beyond what can be held in memory.
FlexibilityEnvelope compute_envelope_oracle(
    std::span<const double> p_plus, std::span<const double> p_minus,
    std::span<const double> baseline_power,
    std::span<const double> baseline_state, PowerBounds bounds, std::size_t k,
    std::size_t j, std::size_t horizon);

/// CSV with columns t, lower_kw, upper_kw and metadata alpha, k, asset.
void write_envelope(const FlexibilityEnvelope& env,
                    const std::filesystem::path& path);
FlexibilityEnvelope read_envelope(const std::filesystem::path& path);

}  // namespace flexsched
