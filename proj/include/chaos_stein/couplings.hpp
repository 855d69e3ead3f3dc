#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "chaos_stein/distances.hpp"
#include "chaos_stein/rng.hpp"
#include "chaos_stein/stein.hpp"

namespace chaos_stein::couplings {

using distances::DistributionHandle;

struct SummandSpec {
  DistributionHandle law;
  double sigma2 = 0.0;  // Var X
  double gamma = 0.0;   // E|X|^3
  bool mean_zero = true;
};

/// Moments of law computed exactly for atomic laws and by quadrature for laws
/// with a density. Throws PreconditionError when the mean is not zero or a
/// moment is infinite.
SummandSpec make_summand(const DistributionHandle& law);

struct SummandCheck {
  double mean = 0.0, mean_se = 0.0;
  double sigma2 = 0.0, sigma2_se = 0.0;
  double gamma = 0.0, gamma_se = 0.0;
  bool pass = false;  // all three within 4 standard errors
};

/// Sample moments of the summand over `draws` draws against its declared moments.
SummandCheck check_summand(const SummandSpec& x, std::uint64_t seed, std::size_t draws = 100000);

/// W = sum of independent summands with sum sigma_i^2 = 1. Immutable.
struct IndependentSumModel {
  std::vector<SummandSpec> summands;
  std::vector<DistributionHandle> zero_bias;  // zero_bias[i] is the law of X_i^*
  std::vector<double> cumulative_sigma2;

  std::size_t size() const { return summands.size(); }
  double sum_gamma() const;
};

inline constexpr double kNormalizationTolerance = 1e-12;

/// Validates sum sigma_i^2 = 1 and builds every zero-bias law.
IndependentSumModel make_independent_sum(std::vector<SummandSpec> summands);

/// n copies of unit_law / sqrt(n); unit_law must have mean 0 and variance 1.
IndependentSumModel iid_model(const DistributionHandle& unit_law, int n);

struct ExchangeablePairModel {
  IndependentSumModel base;
  double lambda = 0.0;  // E[W' - W | W] = -lambda W
};

/// Resample-one pair; lambda = 1/n.
ExchangeablePairModel make_exchangeable_pair(IndependentSumModel base);

/// Law with density E[X 1(X > t)] / sigma^2. Piecewise uniform for atomic X;
/// tabulated prefix integrals plus in-cell quadrature otherwise.
DistributionHandle zero_bias_distribution(const SummandSpec& x);

struct CoupledDraw {
  double w = 0.0;
  double w_star = 0.0;
};

/// I with P(I = i) = sigma_i^2, all X_j, and X_I^* drawn independently;
/// returns (W, W - X_I + X_I^*).
CoupledDraw zero_bias_coupling_sample(const IndependentSumModel& model, Rng& rng);

struct MeanGapReport {
  double estimate = 0.0;  // Monte-Carlo E|W^* - W|
  double se = 0.0;
  double cap = 0.0;  // (3/2) sum gamma_i
  bool pass = false;  // estimate <= cap + 4 se
  std::size_t n = 0;
};

MeanGapReport mean_gap(const IndependentSumModel& model, std::size_t n, std::uint64_t seed);

/// Support above which the law of W is not enumerated.
inline constexpr std::size_t kMaxEnumeratedSupport = 1'000'000;

/// Exact law of W for atomic summands by successive convolution, merging
/// coincident sums. Empty when a summand is not atomic or the distinct
/// support exceeds max_support.
std::optional<DistributionHandle> exact_sum_law(const IndependentSumModel& model,
                                                std::size_t max_support = kMaxEnumeratedSupport);

/// Confidence level of every empirical tolerance below.
inline constexpr double kEmpiricalDelta = 1e-3;

struct CapCheck {
  double value = 0.0;
  double tolerance = 0.0;  // numerical error for exact routes, DKW-based for empirical ones
  bool exact = false;
  double cap = 0.0;
  bool pass = false;  // value <= cap + tolerance
};

struct WassersteinZeroBiasReport {
  CapCheck versus_mean_gap;  // cap 2 E|W^* - W|, estimated with 4 se slack
  CapCheck versus_gamma;     // cap 3 sum gamma_i
  MeanGapReport gap;
  bool pass() const { return versus_mean_gap.pass && versus_gamma.pass && gap.pass; }
};

/// d_W(L(W), N(0,1)), exact when exact_sum_law succeeds, else from n draws.
/// The empirical tolerance bounds d_W(empirical, L(W)) at level kEmpiricalDelta:
/// DKW inside the sample range, Cantelli tails outside it.
WassersteinZeroBiasReport wasserstein_zero_bias_check(const IndependentSumModel& model, std::size_t n,
                                                      std::uint64_t seed);

/// d_K(L(W), N(0,1)) against 7.1 sum gamma_i, exact or from n draws.
CapCheck berry_esseen_report(const IndependentSumModel& model, std::size_t n = 1'000'000,
                             std::uint64_t seed = kDefaultSeed);

struct ConcentrationReport {
  double estimate = 0.0;  // P(a <= W^{(i)} <= b)
  double se = 0.0;
  double cap = 0.0;  // (2 sqrt 2 / 3)(b - a) + (4 (sqrt 2 + 1) / 3) sum gamma_j
  bool vacuous = false;  // cap >= 1
  bool pass = false;     // estimate <= cap + 4 se
};

/// W^{(i)} = W - X_i with 0-based i.
ConcentrationReport concentration_check(const IndependentSumModel& model, std::size_t i, double a, double b,
                                        std::size_t n, std::uint64_t seed);

struct PairDraw {
  double w = 0.0;
  double w_prime = 0.0;
  double t1 = 0.0;  // (W' - W)^2 / (2 lambda)
};

/// Uniform I and an independent copy X_I'; W' = W - X_I + X_I'.
PairDraw exchangeable_pair_sample(const ExchangeablePairModel& model, Rng& rng);

struct PairStatistics {
  double slope = 0.0;  // least-squares E[W' - W | W] = slope W
  double slope_se = 0.0;
  double expected_slope = 0.0;  // -lambda
  double mean_t1 = 0.0;
  double t1_se = 0.0;
  double antisymmetry = 0.0;  // E[(W' - W)(W'^3 + W^3)], zero by exchangeability
  double antisymmetry_se = 0.0;
  stein::T1BoundReport tv;  // binned bound from (W, T1)
  std::size_t n = 0;
  /// Each statistic within 4 standard errors of its target.
  bool pass() const;
};

/// n draws of the pair, chunked and reproducible.
PairStatistics pair_statistics(const ExchangeablePairModel& model, std::size_t n, std::uint64_t seed, int bins = 11);

}  // namespace chaos_stein::couplings
