// Law of sum_j lambda_j (Z_j^2 - 1).
//
// m >= 3 eigenvalues: Gil-Pelaez inversion of the characteristic function
//   phi(t) = prod_j (1 - 2 i lambda_j t)^{-1/2} exp(-i lambda_j t)
// by the midpoint rule with step h = pi / (8 R), where R bounds the law's
// range up to a Chernoff tail of 1e-15. Terms run until |phi(T)| / T < 1e-10
// and then on, up to 2^20 terms, until the density tail bound
//   |phi(T)| * T / ((m/2 - 1) pi)
// is below 1e-9. Both tail bounds hold because |phi(t)| t^{m/2} is increasing.
// The sums are evaluated once on a grid of 2^18 points over [-8R, 8R) by one
// FFT each (terms folded modulo the grid size), then interpolated: cubic
// Hermite for the cdf with the density as slope, four-point Lagrange for the
// density. The interpolation error is measured against direct sums at fixed
// probe points, including points next to the singular point -sum(lambda), and
// added to the reported error.
//
// m <= 2: the inversion integrand decays too slowly to be practical. The
// density has closed forms in Bessel functions. The cdf for m = 2 uses polar
// coordinates: with Z_1 = R cos(theta), Z_2 = R sin(theta), R^2 ~ Exp(1/2)
// independent of theta, so conditionally on theta the law is a scaled
// exponential and the cdf is one integral over theta.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/special_functions/bessel.hpp>
#include <unsupported/Eigen/FFT>

#include "chaos_stein/distances.hpp"
#include "chaos_stein/error.hpp"
#include "chaos_stein/normal.hpp"
#include "quadrature.hpp"

namespace chaos_stein::distances {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTailTarget = 1e-15;
constexpr double kCdfTruncation = 1e-10;
constexpr double kDensityTruncation = 1e-9;
constexpr std::size_t kMaxTerms = std::size_t{1} << 20;

// Chernoff bound on P(sum lambda_j (Z_j^2 - 1) > u).
double upper_tail_bound(std::span<const double> lambdas, double u) {
  double lmax = 0.0;
  double neg_sum = 0.0;
  for (double l : lambdas) {
    lmax = std::max(lmax, l);
    if (l < 0.0) neg_sum += -l;
  }
  if (lmax <= 0.0) return u >= neg_sum ? 0.0 : 1.0;
  const double theta_max = 1.0 / (2.0 * lmax);
  double best = 1.0;
  for (int i = 1; i < 200; ++i) {
    const double theta = theta_max * i / 200.0;
    double log_mgf = 0.0;
    for (double l : lambdas) log_mgf += -0.5 * std::log1p(-2.0 * l * theta) - l * theta;
    best = std::min(best, std::exp(log_mgf - theta * u));
  }
  return best;
}

double abs_phi(std::span<const double> lambdas, double t) {
  double log_mod = 0.0;
  for (double l : lambdas) log_mod += -0.25 * std::log1p(4.0 * l * l * t * t);
  return std::exp(log_mod);
}

// (1 - 2 i l t)^{-1/2} = (1 + 4 l^2 t^2)^{-1/4} exp(i atan(2 l t) / 2).
std::complex<double> phi(std::span<const double> lambdas, double t) {
  double log_mod = 0.0;
  double arg = 0.0;
  for (double l : lambdas) {
    log_mod += -0.25 * std::log1p(4.0 * l * l * t * t);
    arg += 0.5 * std::atan(2.0 * l * t) - l * t;
  }
  return std::polar(std::exp(log_mod), arg);
}

class SecondChaosLaw {
 public:
  explicit SecondChaosLaw(std::vector<double> lambdas) : lambdas_(std::move(lambdas)) {
    shift_ = 0.0;
    double pos = 0.0, neg = 0.0, sum_sq = 0.0;
    for (double l : lambdas_) {
      shift_ += l;
      sum_sq += l * l;
      (l > 0.0 ? pos : neg) += std::abs(l);
    }
    // F >= -pos and F <= neg hold only when the opposite sign is absent.
    if (neg == 0.0) support_.lo = -pos;
    if (pos == 0.0) support_.hi = neg;

    const double sd = std::sqrt(2.0 * sum_sq);
    std::vector<double> mirrored(lambdas_.size());
    std::transform(lambdas_.begin(), lambdas_.end(), mirrored.begin(), [](double l) { return -l; });
    range_ = sd;
    while (upper_tail_bound(lambdas_, range_) + upper_tail_bound(mirrored, range_) > kTailTarget) range_ *= 1.25;

    angular_ = lambdas_.size() <= 2;
    if (angular_) {
      singular_.push_back(-shift_);
      cdf_error_ = lambdas_.size() == 1 ? 1e-15 : 1e-11;
      density_error_ = 1e-13;
      return;
    }

    const double m = static_cast<double>(lambdas_.size());
    step_ = kPi / (8.0 * range_);
    const auto cdf_trunc = [&](double t) { return abs_phi(lambdas_, t) * 2.0 / (m * kPi); };
    const auto dens_trunc = [&](double t) { return abs_phi(lambdas_, t) * t / ((0.5 * m - 1.0) * kPi); };
    std::size_t terms = 64;
    while (terms < kMaxTerms && abs_phi(lambdas_, step_ * static_cast<double>(terms)) /
                                        (step_ * static_cast<double>(terms)) >= kCdfTruncation)
      terms *= 2;
    while (terms < kMaxTerms && dens_trunc(step_ * static_cast<double>(terms)) > kDensityTruncation) terms *= 2;
    terms = std::min(terms, kMaxTerms);
    const double t_end = step_ * static_cast<double>(terms);
    // Aliases sit at least 15 R away from any |x| <= R.
    const double alias = 2.0 * (upper_tail_bound(lambdas_, 15.0 * range_) + upper_tail_bound(mirrored, 15.0 * range_));

    weights_re_.resize(terms);
    weights_im_.resize(terms);
    inv_t_.resize(terms);
    for (std::size_t k = 0; k < terms; ++k) {
      const double t = (static_cast<double>(k) + 0.5) * step_;
      const auto v = phi(lambdas_, t) * (step_ / kPi);
      weights_re_[k] = v.real();
      weights_im_[k] = v.imag();
      inv_t_[k] = 1.0 / t;
    }
    build_table();

    // Interpolation error at probe points off the grid: spread over the bulk
    // and within 5 cells of the singular point, where the law is least smooth.
    double bulk_cdf = 0.0, bulk_density = 0.0, near_cdf = 0.0, near_density = 0.0;
    const auto probe = [&](double x, double& pc, double& pd) {
      if (x < support_.lo || x > support_.hi) return;
      pc = std::max(pc, std::abs(table_cdf(x) - direct_cdf(x)));
      pd = std::max(pd, std::abs(table_density(x) - direct_density(x)));
    };
    for (int i = 0; i < 8; ++i)
      probe(-1.5 * range_ / 4.0 + (i + 0.37) * (3.0 * range_ / 4.0) / 8.0, bulk_cdf, bulk_density);
    for (double cells : {10.5, 20.5}) {
      probe(-shift_ + cells * dx_, bulk_cdf, bulk_density);
      probe(-shift_ - cells * dx_, bulk_cdf, bulk_density);
    }
    for (double cells : {0.5, 1.5, 2.5, 4.5}) {
      probe(-shift_ + cells * dx_, near_cdf, near_density);
      probe(-shift_ - cells * dx_, near_cdf, near_density);
    }
    // The raw terms are only needed to build and probe the table.
    weights_re_ = {};
    weights_im_ = {};
    inv_t_ = {};
    const double cdf_base = cdf_trunc(t_end) + alias + 2.0 * bulk_cdf + 1e-13;
    const double density_base = dens_trunc(t_end) + alias + 2.0 * bulk_density + 1e-13;
    cdf_error_ = cdf_base + 2.0 * near_cdf;
    density_error_ = density_base + 2.0 * near_density;
    // Densities vanish beyond +-4R; the near-singular excess spans 10 cells.
    density_error_l1_ = density_base * 8.0 * range_ + 2.0 * near_density * 10.0 * dx_;
  }

  double cdf(double x) const {
    if (x < support_.lo) return 0.0;
    if (x >= support_.hi) return 1.0;
    if (angular_) return angular_cdf(x);
    if (x < -4.0 * range_) return 0.0;
    if (x > 4.0 * range_) return 1.0;
    return std::clamp(table_cdf(x), 0.0, 1.0);
  }

  double density(double x) const {
    if (x < support_.lo || x > support_.hi) return 0.0;
    if (angular_) return angular_density(x);
    if (std::abs(x) > 4.0 * range_) return 0.0;
    return std::max(0.0, table_density(x));
  }

  double quantile(double u) const {
    if (u <= 0.0) return std::max(support_.lo, -4.0 * range_);
    if (u >= 1.0) return std::min(support_.hi, 4.0 * range_);
    double lo = std::max(support_.lo, -4.0 * range_);
    double hi = std::min(support_.hi, 4.0 * range_);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) >= u ? hi : lo) = mid;
    }
    return hi;
  }

  double sample(Rng& rng) const {
    std::normal_distribution<double> z;
    double s = 0.0;
    for (double l : lambdas_) {
      const double v = z(rng);
      s += l * (v * v - 1.0);
    }
    return s;
  }

  Interval support() const { return support_; }
  const std::vector<double>& singular_points() const { return singular_; }
  double cdf_error() const { return cdf_error_; }
  double density_error() const { return density_error_; }
  double density_error_l1() const { return density_error_l1_; }

 private:
  static constexpr std::size_t kGrid = std::size_t{1} << 18;
  double direct_cdf(double x) const {
    double s = 0.0;
    accumulate(x, [&](std::size_t k, double c, double sn) {
      s += (weights_im_[k] * c - weights_re_[k] * sn) * inv_t_[k];
    });
    return 0.5 - s;
  }

  double direct_density(double x) const {
    double s = 0.0;
    accumulate(x, [&](std::size_t k, double c, double sn) { s += weights_re_[k] * c + weights_im_[k] * sn; });
    return s;
  }

  // S_j = sum_k a_k exp(-i t_k x_j) on x_j = x0 + j dx, h dx = 2 pi / N:
  // exp(-i t_k x_j) = exp(-i t_k x0) exp(-i pi j / N) exp(-2 pi i k j / N).
  void build_table() {
    const std::size_t n = kGrid;
    x0_ = -8.0 * range_;
    dx_ = 16.0 * range_ / static_cast<double>(n);
    std::vector<std::complex<double>> a_cdf(n), a_den(n);
    for (std::size_t k = 0; k < weights_re_.size(); ++k) {
      const double t = (static_cast<double>(k) + 0.5) * step_;
      const std::complex<double> w{weights_re_[k], weights_im_[k]};
      const std::complex<double> v = w * std::polar(1.0, -t * x0_);
      a_den[k % n] += v;
      a_cdf[k % n] += v * inv_t_[k];
    }
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> s_cdf, s_den;
    fft.fwd(s_cdf, a_cdf);
    fft.fwd(s_den, a_den);
    grid_cdf_.resize(n);
    grid_density_.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      const std::complex<double> twist = std::polar(1.0, -kPi * static_cast<double>(j) / static_cast<double>(n));
      grid_cdf_[j] = 0.5 - (twist * s_cdf[j]).imag();
      grid_density_[j] = (twist * s_den[j]).real();
    }
  }

  // Cell index j with x in [x_j, x_{j+1}) and the offset u in [0, 1).
  std::pair<std::size_t, double> locate(double x) const {
    const double pos = (x - x0_) / dx_;
    const auto j = static_cast<std::size_t>(std::clamp(std::floor(pos), 1.0, static_cast<double>(kGrid) - 3.0));
    return {j, pos - static_cast<double>(j)};
  }

  double table_cdf(double x) const {
    const auto [j, u] = locate(x);
    const double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
    const double h10 = u * (1.0 - u) * (1.0 - u);
    const double h01 = u * u * (3.0 - 2.0 * u);
    const double h11 = u * u * (u - 1.0);
    return h00 * grid_cdf_[j] + h10 * dx_ * grid_density_[j] + h01 * grid_cdf_[j + 1] +
           h11 * dx_ * grid_density_[j + 1];
  }

  double table_density(double x) const {
    const auto [j, u] = locate(x);
    const double* p = &grid_density_[j - 1];
    // Lagrange basis on nodes -1, 0, 1, 2.
    const double l0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
    const double l1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
    const double l2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
    const double l3 = (u + 1.0) * u * (u - 1.0) / 6.0;
    return l0 * p[0] + l1 * p[1] + l2 * p[2] + l3 * p[3];
  }

  // Calls f(k, cos(t_k x), sin(t_k x)) for every grid point, rotating the
  // phase incrementally and re-anchoring it periodically.
  template <class F>
  void accumulate(double x, F&& f) const {
    const double dc = std::cos(step_ * x);
    const double ds = std::sin(step_ * x);
    double c = 0.0, s = 0.0;
    for (std::size_t k = 0; k < weights_re_.size(); ++k) {
      if (k % 1024 == 0) {
        const double th = (static_cast<double>(k) + 0.5) * step_ * x;
        c = std::cos(th);
        s = std::sin(th);
      }
      f(k, c, s);
      const double nc = c * dc - s * ds;
      s = s * dc + c * ds;
      c = nc;
    }
  }

  double coefficient(double theta) const {
    const double c2 = std::cos(theta) * std::cos(theta);
    const double l2 = lambdas_.size() > 1 ? lambdas_[1] : 0.0;
    return lambdas_[0] * c2 + l2 * (1.0 - c2);
  }

  // Panels of [0, pi/2] split where the conditional scale changes sign.
  std::vector<double> angular_panels() const {
    std::vector<double> cuts{0.0};
    const double l1 = lambdas_[0];
    const double l2 = lambdas_.size() > 1 ? lambdas_[1] : 0.0;
    if (l1 * l2 < 0.0) cuts.push_back(std::atan(std::sqrt(-l1 / l2)));
    cuts.push_back(0.5 * kPi);
    return cuts;
  }

  template <class G>
  double angular_integral(G&& g) const {
    const auto cuts = angular_panels();
    double total = 0.0;
    constexpr int pieces = 8;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      for (int k = 0; k < pieces; ++k) {
        const double a = cuts[i] + (cuts[i + 1] - cuts[i]) * k / pieces;
        const double b = k + 1 == pieces ? cuts[i + 1] : cuts[i] + (cuts[i + 1] - cuts[i]) * (k + 1) / pieces;
        total += detail::integrate(g, a, b, 1e-13, 12).value;
      }
    return 2.0 * total / kPi;
  }

  double angular_cdf(double x) const {
    const double y = x + shift_;
    if (lambdas_.size() == 1) {
      const double r = y / lambdas_[0];
      const double inside = r > 0.0 ? std::erf(std::sqrt(0.5 * r)) : 0.0;  // P(Z^2 <= r)
      return lambdas_[0] > 0.0 ? inside : 1.0 - inside;
    }
    const double v = angular_integral([&](double theta) {
      const double c = coefficient(theta);
      if (c > 0.0) return y > 0.0 ? -std::expm1(-y / (2.0 * c)) : 0.0;
      if (c < 0.0) return y < 0.0 ? std::exp(-y / (2.0 * c)) : 1.0;
      return y >= 0.0 ? 1.0 : 0.0;
    });
    return std::clamp(v, 0.0, 1.0);
  }

  // Closed forms with y = x + sum(lambda):
  //   m = 1:            exp(-y / (2 l)) / sqrt(2 pi l y)
  //   m = 2, same sign: exp(-y (a + b) / (4ab)) I0(y |b - a| / (4ab)) / (2 sqrt(ab))
  //   m = 2, a > 0 > b: exp(-y (1/a - 1/|b|) / 4) K0(|y| (1/a + 1/|b|) / 4) / (2 pi sqrt(a |b|))
  double angular_density(double x) const {
    double y = x + shift_;
    if (y == 0.0) return std::numeric_limits<double>::infinity();
    double a = lambdas_[0];
    if (lambdas_.size() == 1) {
      if (a < 0.0) { a = -a; y = -y; }
      return y > 0.0 ? std::exp(-y / (2.0 * a)) / std::sqrt(2.0 * kPi * a * y) : 0.0;
    }
    double b = lambdas_[1];
    if (a * b > 0.0) {
      if (a < 0.0) { a = -a; b = -b; y = -y; }
      if (y <= 0.0) return 0.0;
      const double z = y * std::abs(b - a) / (4.0 * a * b);
      const double decay = y * (a + b) / (4.0 * a * b);
      // exp(-decay) I0(z) without overflow; z < decay always.
      const double scaled_i0 = z < 500.0 ? boost::math::cyl_bessel_i(0, z) * std::exp(-z)
                                         : (1.0 + 1.0 / (8.0 * z) + 9.0 / (128.0 * z * z)) / std::sqrt(2.0 * kPi * z);
      return std::exp(z - decay) * scaled_i0 / (2.0 * std::sqrt(a * b));
    }
    const double p = std::max(a, b);
    const double n = -std::min(a, b);
    const double z = std::abs(y) * (1.0 / p + 1.0 / n) / 4.0;
    if (z > 700.0) return 0.0;
    return std::exp(-y * (1.0 / p - 1.0 / n) / 4.0) * boost::math::cyl_bessel_k(0, z) / (2.0 * kPi * std::sqrt(p * n));
  }

  std::vector<double> lambdas_;
  double shift_ = 0.0;
  double range_ = 1.0;
  Interval support_;
  bool angular_ = false;
  std::vector<double> singular_;
  double step_ = 0.0;
  std::vector<double> weights_re_, weights_im_, inv_t_;
  double x0_ = 0.0;
  double dx_ = 0.0;
  std::vector<double> grid_cdf_, grid_density_;
  double cdf_error_ = 0.0;
  double density_error_ = 0.0;
  double density_error_l1_ = -1.0;
};

}  // namespace

DistributionHandle second_chaos_distribution(std::span<const double> lambdas) {
  if (lambdas.empty() || lambdas.size() > 64)
    throw PreconditionError("second_chaos_distribution: need between 1 and 64 eigenvalues");
  for (double l : lambdas)
    if (l == 0.0 || !std::isfinite(l))
      throw PreconditionError("second_chaos_distribution: eigenvalues must be finite and non-zero");

  auto law = std::make_shared<const SecondChaosLaw>(std::vector<double>(lambdas.begin(), lambdas.end()));
  DistributionHandle d;
  std::ostringstream label;
  label << "second_chaos(m=" << lambdas.size() << ")";
  d.label = label.str();
  d.cdf = [law](double x) { return law->cdf(x); };
  d.quantile = [law](double u) { return law->quantile(u); };
  d.density = [law](double x) { return law->density(x); };
  d.sampler = [law](Rng& rng) { return law->sample(rng); };
  d.support = law->support();
  d.singular_points = law->singular_points();
  d.cdf_error = law->cdf_error();
  d.density_error = law->density_error();
  d.density_error_l1 = law->density_error_l1();
  return d;
}

}  // namespace chaos_stein::distances
