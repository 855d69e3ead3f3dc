#include "chaos_stein/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <utility>

#include "chaos_stein/error.hpp"

namespace chaos_stein::experiments {

namespace {

constexpr std::uint64_t kStreamSample = 0xE501;
constexpr std::uint64_t kStreamBreuerMajor = 0xE502;
constexpr long long kMaxLag = 1'000'000;
constexpr double kRhoCutoff = 1e-12;
constexpr std::size_t kBlockRows = 1024;

bool identity_covariance(const StationaryGaussianSpec& spec) {
  return spec.family == Family::iid || (spec.family == Family::fbm_increments && spec.hurst == 0.5) ||
         (spec.family == Family::custom && spec.max_lag == 0);
}

// rho(r)^q summed over r in [lo, hi].
double power_sum(const StationaryGaussianSpec& spec, int q, long long lo, long long hi,
                 const std::function<double(long long)>& weight) {
  double s = 0.0;
  for (long long r = lo; r <= hi; ++r) s += std::pow(spec.rho(r), q) * weight(r);
  return s;
}

void require_fbm_hurst(double h) {
  if (!(h > 0.0 && h < 1.0)) throw PreconditionError("Hurst index must lie in (0, 1)");
}

// Draws rows [b, e) of standard normals row by row and applies L^T.
template <class Sink>
void correlated_rows(const Eigen::MatrixXd& factor, bool identity, std::size_t n, std::size_t b, std::size_t e,
                     Rng& rng, Sink&& sink) {
  std::normal_distribution<double> n01;
  for (std::size_t start = b; start < e; start += kBlockRows) {
    const std::size_t rows = std::min(kBlockRows, e - start);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = n01(rng);
    if (identity) {
      sink(start, z);
    } else {
      const Eigen::MatrixXd x = z * factor.transpose();
      sink(start, x);
    }
  }
}

struct Traces {
  double tr3 = 0.0;
  double tr4 = 0.0;
};

Traces fbm_traces(double hurst, std::size_t n, std::size_t max_n) {
  if (n > max_n) throw CapabilityError("dense Toeplitz traces are capped at n = " + std::to_string(max_n));
  const Eigen::MatrixXd r = toeplitz_covariance(fbm_spec(hurst, n));
  const Eigen::MatrixXd r2 = r * r;
  return {r2.cwiseProduct(r).sum(), r2.squaredNorm()};
}

}  // namespace

double fbm_rho(double hurst, long long r) {
  require_fbm_hurst(hurst);
  const double a = 2.0 * hurst;
  const double x = std::abs(static_cast<double>(r));
  if (x < 8.0) return 0.5 * (std::pow(x + 1.0, a) + std::pow(std::abs(x - 1.0), a) - 2.0 * std::pow(x, a));
  // rho = r^a sum_{j >= 1} C(a, 2j) r^{-2j}.
  const double inv2 = 1.0 / (x * x);
  double binom = 1.0;  // C(a, m)
  double power = 1.0;
  double s = 0.0;
  for (int m = 1; m < 80; ++m) {
    binom *= (a - m + 1.0) / m;
    if (m % 2 == 1) continue;
    power *= inv2;
    const double term = binom * power;
    s += term;
    if (std::abs(term) <= 1e-18 * std::abs(s)) break;
  }
  return std::pow(x, a) * s;
}

StationaryGaussianSpec fbm_spec(double hurst, std::size_t n) {
  require_fbm_hurst(hurst);
  if (n < 1) throw PreconditionError("fbm_spec: n must be positive");
  StationaryGaussianSpec s;
  s.rho = [hurst](long long r) { return fbm_rho(hurst, r); };
  s.family = Family::fbm_increments;
  s.hurst = hurst;
  s.n = n;
  return s;
}

StationaryGaussianSpec iid_spec(std::size_t n) {
  if (n < 1) throw PreconditionError("iid_spec: n must be positive");
  StationaryGaussianSpec s;
  s.rho = [](long long r) { return r == 0 ? 1.0 : 0.0; };
  s.family = Family::iid;
  s.n = n;
  return s;
}

StationaryGaussianSpec custom_spec(std::function<double(long long)> rho, long long max_lag, std::size_t n) {
  if (n < 1) throw PreconditionError("custom_spec: n must be positive");
  if (max_lag < 0) throw PreconditionError("custom_spec: max_lag must be non-negative");
  if (rho(0) != 1.0) throw PreconditionError("custom_spec: rho(0) must equal 1");
  StationaryGaussianSpec s;
  s.rho = [rho = std::move(rho), max_lag](long long r) { return std::abs(r) > max_lag ? 0.0 : rho(std::abs(r)); };
  s.family = Family::custom;
  s.max_lag = max_lag;
  s.n = n;
  return s;
}

Eigen::MatrixXd toeplitz_covariance(const StationaryGaussianSpec& spec) {
  const auto n = static_cast<Eigen::Index>(spec.n);
  std::vector<double> lag(spec.n);
  for (std::size_t r = 0; r < spec.n; ++r) lag[r] = spec.rho(static_cast<long long>(r));
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = lag[static_cast<std::size_t>(std::abs(i - j))];
  return m;
}

Eigen::MatrixXd covariance_factor(const StationaryGaussianSpec& spec) {
  const Eigen::MatrixXd r = toeplitz_covariance(spec);
  Eigen::LLT<Eigen::MatrixXd> llt(r);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -kPsdTolerance)
    throw PreconditionError("covariance matrix is not positive semidefinite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

Eigen::MatrixXd sample_stationary(const StationaryGaussianSpec& spec, std::size_t n_paths, std::uint64_t seed) {
  if (spec.n > kMaxDenseLength) throw CapabilityError("sample_stationary: n exceeds the dense simulation cap");
  const bool identity = identity_covariance(spec);
  const Eigen::MatrixXd factor = identity ? Eigen::MatrixXd() : covariance_factor(spec);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n_paths), static_cast<Eigen::Index>(spec.n));
  for_each_chunk(n_paths, seed, kStreamSample, [&](std::size_t, std::size_t b, std::size_t e, Rng& rng) {
    correlated_rows(factor, identity, spec.n, b, e, rng, [&](std::size_t start, const Eigen::MatrixXd& x) {
      out.middleRows(static_cast<Eigen::Index>(start), x.rows()) = x;
    });
  });
  return out;
}

double bm_sigma2(const hermite::CoefficientSeries& series, const StationaryGaussianSpec& spec, int d) {
  if (!series.coeffs.empty() && std::abs(series.coeffs[0]) > hermite::kCoefficientCutoff)
    throw PreconditionError("bm_sigma2: phi must have mean zero (a_0 = 0)");
  if (d != hermite::hermite_rank(series)) throw PreconditionError("bm_sigma2: d must equal the Hermite rank");

  long long cutoff = 0;
  double c = 0.0;  // rho(r) ~ c r^{2H-2}
  bool tail = false;
  if (spec.family == Family::custom) {
    cutoff = spec.max_lag;
  } else if (spec.family == Family::fbm_increments && spec.hurst != 0.5) {
    const double h = spec.hurst;
    if (d * (2.0 - 2.0 * h) <= 1.0)
      throw SummabilityError("bm_sigma2: sum |rho(k)|^d diverges for this Hurst index and rank");
    c = h * (2.0 * h - 1.0);
    while (cutoff < kMaxLag && std::abs(spec.rho(cutoff + 1)) >= kRhoCutoff) ++cutoff;
    tail = cutoff == kMaxLag;
  }

  std::vector<double> lags(static_cast<std::size_t>(cutoff));
  for (long long r = 1; r <= cutoff; ++r) lags[static_cast<std::size_t>(r - 1)] = spec.rho(r);
  double total = 0.0;
  for (std::size_t q = 1; q < series.coeffs.size(); ++q) {
    const double a = series.coeffs[q];
    if (a == 0.0) continue;
    const int qi = static_cast<int>(q);
    double s = 0.0;
    for (double v : lags) s += std::pow(v, qi);
    s = 1.0 + 2.0 * s;
    if (tail) {
      // sum_{r > K} (c r^{2H-2})^q ~ int_{K+1/2}^inf.
      const double e = qi * (2.0 - 2.0 * spec.hurst) - 1.0;
      s += 2.0 * std::pow(c, qi) * std::pow(static_cast<double>(cutoff) + 0.5, -e) / e;
    }
    total += hermite::factorial(qi) * a * a * s;
  }
  return std::max(0.0, total);
}

double bm_variance_n(const hermite::CoefficientSeries& series, const StationaryGaussianSpec& spec) {
  const auto n = static_cast<long long>(spec.n);
  double total = 0.0;
  for (std::size_t q = 1; q < series.coeffs.size(); ++q) {
    const double a = series.coeffs[q];
    if (a == 0.0) continue;
    const double s = 1.0 + 2.0 * power_sum(spec, static_cast<int>(q), 1, n - 1, [n](long long r) {
                       return 1.0 - static_cast<double>(r) / static_cast<double>(n);
                     });
    total += hermite::factorial(static_cast<int>(q)) * a * a * s;
  }
  return total;
}

BMReport bm_simulate(const hermite::CoefficientSeries& series, const StationaryGaussianSpec& spec,
                     std::size_t n_paths, std::uint64_t seed, double delta) {
  if (spec.n > kMaxDenseLength) throw CapabilityError("bm_simulate: n exceeds the dense simulation cap");
  BMReport rep;
  rep.sigma2 = bm_sigma2(series, spec, hermite::hermite_rank(series));
  if (!(rep.sigma2 > 0.0)) throw PreconditionError("bm_simulate: limiting variance is zero");
  rep.variance_n = bm_variance_n(series, spec);
  rep.n_paths = n_paths;

  const bool identity = identity_covariance(spec);
  const Eigen::MatrixXd factor = identity ? Eigen::MatrixXd() : covariance_factor(spec);
  const double scale = 1.0 / std::sqrt(static_cast<double>(spec.n));
  std::vector<double> v(n_paths);
  for_each_chunk(n_paths, seed, kStreamBreuerMajor, [&](std::size_t, std::size_t b, std::size_t e, Rng& rng) {
    correlated_rows(factor, identity, spec.n, b, e, rng, [&](std::size_t start, const Eigen::MatrixXd& x) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < x.cols(); ++j) s += series(x(i, j));
        v[start + static_cast<std::size_t>(i)] = s * scale;
      }
    });
  });
  rep.kolmogorov = distances::empirical_kolmogorov(v, distances::normal(0.0, std::sqrt(rep.sigma2)), delta);
  return rep;
}

double qv_sigma_n_sq(double hurst, std::size_t n) {
  require_fbm_hurst(hurst);
  const auto nn = static_cast<double>(n);
  double s = nn;
  for (std::size_t r = 1; r < n; ++r) {
    const double p = fbm_rho(hurst, static_cast<long long>(r));
    s += 2.0 * (nn - static_cast<double>(r)) * p * p;
  }
  return 2.0 * s;
}

double qv_fourth_cumulant_exact(double hurst, std::size_t n, std::size_t max_n) {
  const double s2 = qv_sigma_n_sq(hurst, n);
  return 48.0 * fbm_traces(hurst, n, max_n).tr4 / (s2 * s2);
}

double qv_fourth_cumulant_bound(double hurst, std::size_t n) {
  const double s2 = qv_sigma_n_sq(hurst, n);
  double s = 1.0;
  for (std::size_t k = 1; k < n; ++k) s += 2.0 * std::pow(std::abs(fbm_rho(hurst, static_cast<long long>(k))), 4.0 / 3.0);
  return 48.0 * static_cast<double>(n) / (s2 * s2) * s * s * s;
}

double qv_third_moment(double hurst, std::size_t n, std::size_t max_n) {
  const double s2 = qv_sigma_n_sq(hurst, n);
  return 8.0 * fbm_traces(hurst, n, max_n).tr3 / std::pow(s2, 1.5);
}

QVReport qv_report(double hurst, std::size_t n, std::size_t max_n) {
  QVReport r;
  r.hurst = hurst;
  r.n = n;
  r.sigma_n_sq = qv_sigma_n_sq(hurst, n);
  const Traces t = fbm_traces(hurst, n, max_n);
  r.fourth_cumulant_exact = 48.0 * t.tr4 / (r.sigma_n_sq * r.sigma_n_sq);
  r.third_moment = 8.0 * t.tr3 / std::pow(r.sigma_n_sq, 1.5);
  r.fourth_cumulant_bound = qv_fourth_cumulant_bound(hurst, n);
  r.m_stat = std::max(r.fourth_cumulant_exact, std::abs(r.third_moment));
  return r;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("loglog_slope: need two or more matched points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw PreconditionError("loglog_slope: values must be positive");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw PreconditionError("loglog_slope: x values must differ");
  return sxy / sxx;
}

RateTable qv_rate_table(const std::vector<double>& hurst_list, const std::vector<std::size_t>& n_list) {
  if (n_list.size() < 2) throw PreconditionError("qv_rate_table: need at least two n values");
  for (std::size_t n : n_list)
    if (n < 2 || (n & (n - 1)) != 0) throw PreconditionError("qv_rate_table: n values must be powers of two");
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  RateTable table;
  for (double h : hurst_list) {
    if (!(h > 0.0 && h <= 0.75))
      throw PreconditionError("qv_rate_table: H must lie in (0, 3/4]; beyond 3/4 the limit is not Gaussian");
    std::vector<double> ns, root, mstat;
    RateFit fit;
    fit.hurst = h;
    fit.log_scaled_min = std::numeric_limits<double>::infinity();
    fit.log_scaled_max = -fit.log_scaled_min;
    for (std::size_t n : n_list) {
      const QVReport row = qv_report(h, n);
      table.rows.push_back(row);
      ns.push_back(static_cast<double>(n));
      root.push_back(std::sqrt(row.fourth_cumulant_exact));
      mstat.push_back(row.m_stat);
      const double scaled = root.back() * std::log(static_cast<double>(n));
      fit.log_scaled_min = std::min(fit.log_scaled_min, scaled);
      fit.log_scaled_max = std::max(fit.log_scaled_max, scaled);
    }
    fit.sqrt_cumulant_slope = loglog_slope(ns, root);
    fit.m_stat_slope = loglog_slope(ns, mstat);
    fit.expected_sqrt_cumulant_slope = h < 0.625 ? -0.5 : (h > 0.625 && h < 0.75 ? 4.0 * h - 3.0 : nan);
    fit.expected_m_stat_slope = h < 2.0 / 3.0 ? -0.5 : (h > 2.0 / 3.0 && h < 0.75 ? 6.0 * h - 4.5 : nan);
    table.fits.push_back(fit);
  }
  return table;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_qv_csv(std::ostream& out, const std::vector<QVReport>& rows) {
  out << "H,n,sigma_n_sq,k4_exact,k4_bound,m3,m_stat\n";
  for (const auto& r : rows)
    out << format_double(r.hurst) << ',' << r.n << ',' << format_double(r.sigma_n_sq) << ','
        << format_double(r.fourth_cumulant_exact) << ',' << format_double(r.fourth_cumulant_bound) << ','
        << format_double(r.third_moment) << ',' << format_double(r.m_stat) << '\n';
}

}  // namespace chaos_stein::experiments
