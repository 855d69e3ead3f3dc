#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "chaos_stein/distances.hpp"
#include "chaos_stein/hermite.hpp"
#include "chaos_stein/rng.hpp"

namespace chaos_stein::experiments {

/// Covariance of unit fBm increments at lag r: (|r+1|^2H + |r-1|^2H - 2|r|^2H) / 2.
/// Uses the binomial series in 1/r for |r| >= 8 to avoid cancellation.
double fbm_rho(double hurst, long long r);

enum class Family { fbm_increments, iid, custom };

struct StationaryGaussianSpec {
  std::function<double(long long)> rho;  // rho(0) = 1, rho(-r) = rho(r)
  Family family = Family::iid;
  double hurst = 0.5;     // fbm_increments only
  std::size_t n = 0;      // sequence length
  long long max_lag = 0;  // custom only: rho(r) = 0 for |r| > max_lag
};

/// Throws PreconditionError unless 0 < H < 1 and n >= 1.
StationaryGaussianSpec fbm_spec(double hurst, std::size_t n);
StationaryGaussianSpec iid_spec(std::size_t n);
/// Throws PreconditionError unless rho(0) = 1 and max_lag >= 0.
StationaryGaussianSpec custom_spec(std::function<double(long long)> rho, long long max_lag, std::size_t n);

/// R_ij = rho(i - j), n x n.
Eigen::MatrixXd toeplitz_covariance(const StationaryGaussianSpec& spec);

/// Lower factor L with L L^T = R: Cholesky, or the symmetric square root when
/// R is singular with smallest eigenvalue >= -kPsdTolerance. Throws
/// PreconditionError when R is not positive semidefinite.
Eigen::MatrixXd covariance_factor(const StationaryGaussianSpec& spec);
inline constexpr double kPsdTolerance = 1e-10;

/// Largest n simulated or traced by dense linear algebra.
inline constexpr std::size_t kMaxDenseLength = 4096;

/// N_paths x n matrix; row i is one realization with covariance R.
/// Throws CapabilityError for n > kMaxDenseLength.
Eigen::MatrixXd sample_stationary(const StationaryGaussianSpec& spec, std::size_t n_paths, std::uint64_t seed);

/// sum_{q >= d} q! a_q^2 sum_k rho(k)^q. Requires a_0 = 0 and d equal to the
/// Hermite rank. Throws SummabilityError when sum |rho(k)|^d diverges.
double bm_sigma2(const hermite::CoefficientSeries& series, const StationaryGaussianSpec& spec, int d);

/// E V_n^2 = sum_q q! a_q^2 sum_{|r| < n} rho(r)^q (1 - |r|/n), exact.
double bm_variance_n(const hermite::CoefficientSeries& series, const StationaryGaussianSpec& spec);

struct BMReport {
  double sigma2 = 0.0;
  double variance_n = 0.0;
  distances::DistanceReport kolmogorov;  // empirical V_n against N(0, sigma2)
  std::size_t n_paths = 0;
};

/// V_n = n^{-1/2} sum_k phi(X_k) over n_paths realizations.
BMReport bm_simulate(const hermite::CoefficientSeries& series, const StationaryGaussianSpec& spec,
                     std::size_t n_paths, std::uint64_t seed, double delta = 1e-3);

/// 2 sum_{|r| < n} (n - |r|) rho(r)^2 for fBm increments.
double qv_sigma_n_sq(double hurst, std::size_t n);

/// E F_n^4 - 3 = 48 tr(R^4) / sigma_n^4. Throws CapabilityError for n > max_n.
double qv_fourth_cumulant_exact(double hurst, std::size_t n, std::size_t max_n = kMaxDenseLength);

/// 48 n / sigma_n^4 (sum_{|k| < n} |rho(k)|^{4/3})^3.
double qv_fourth_cumulant_bound(double hurst, std::size_t n);

/// E F_n^3 = 8 tr(R^3) / sigma_n^3. Throws CapabilityError for n > max_n.
double qv_third_moment(double hurst, std::size_t n, std::size_t max_n = kMaxDenseLength);

struct QVReport {
  double hurst = 0.0;
  std::size_t n = 0;
  double sigma_n_sq = 0.0;
  double fourth_cumulant_exact = 0.0;
  double fourth_cumulant_bound = 0.0;
  double third_moment = 0.0;
  double m_stat = 0.0;  // max(fourth_cumulant_exact, |third_moment|)
};

/// One R^2 product serves both traces.
QVReport qv_report(double hurst, std::size_t n, std::size_t max_n = kMaxDenseLength);

struct RateFit {
  double hurst = 0.0;
  double sqrt_cumulant_slope = 0.0;
  double m_stat_slope = 0.0;
  double expected_sqrt_cumulant_slope = 0.0;  // NaN where the rate carries a log factor
  double expected_m_stat_slope = 0.0;         // NaN where the rate carries a log factor
  // sqrt(fourth cumulant) * ln n over the n list.
  double log_scaled_min = 0.0;
  double log_scaled_max = 0.0;
};

struct RateTable {
  std::vector<QVReport> rows;
  std::vector<RateFit> fits;
};

/// Least-squares log-log slopes over n_list (powers of two, at least two).
/// Throws PreconditionError for H outside (0, 3/4].
RateTable qv_rate_table(const std::vector<double>& hurst_list, const std::vector<std::size_t>& n_list);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Columns H,n,sigma_n_sq,k4_exact,k4_bound,m3,m_stat; 17 significant digits.
void write_qv_csv(std::ostream& out, const std::vector<QVReport>& rows);

/// General-format rendering with 17 significant digits, locale independent.
std::string format_double(double x);

}  // namespace chaos_stein::experiments
