// End-to-end acceptance battery. One PASS/FAIL line per criterion; the exit
// status is non-zero when any criterion fails.

#include <Eigen/Dense>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "chaos_stein/chaos.hpp"
#include "chaos_stein/couplings.hpp"
#include "chaos_stein/distances.hpp"
#include "chaos_stein/experiments.hpp"
#include "chaos_stein/hermite.hpp"
#include "chaos_stein/malliavin.hpp"
#include "chaos_stein/rng.hpp"
#include "chaos_stein/stein.hpp"

using namespace chaos_stein;

namespace {

// Tolerances, pinned.
constexpr double kProductTol = 1e-8;
constexpr double kProductSeconds = 60.0;
constexpr double kIdentityTol = 1e-8;
constexpr double kCanonicalTol = 1e-12;
constexpr double kQuadratureErrorCap = 1e-4;
constexpr double kTheoremSeconds = 300.0;
constexpr double kBerryEsseenLo = 0.2, kBerryEsseenHi = 1.0;
constexpr double kClosedFormTol = 1e-8;
constexpr double kSlopeTol = 0.05;
constexpr double kMSlopeTolHigh = 0.07;
constexpr double kLogBandFactor = 2.0;
constexpr double kQvSeconds = 600.0;
constexpr double kVarianceRel = 0.02;
constexpr double kBreuerMajorDk = 0.05;
constexpr double kLogVarianceRel = 0.10;
constexpr double kSeSlack = 4.0;

constexpr std::uint64_t kSeed = kDefaultSeed;

struct Line {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += " [fail: " + what + "]";
    }
  }
  void note(const std::string& s) { detail += " " + s; }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

chaos::SymmetricKernel half_square() {
  return chaos::scaled(chaos::basis_power(1, 2, 1), 1.0 / std::numbers::sqrt2);
}

Line product_formula() {
  Line l;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_rng(kSeed, 0xA1);
  std::uniform_int_distribution<int> order(1, 3), dim(1, 5);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int n = dim(rng);
    const auto a = chaos::integral(chaos::random_kernel(order(rng), n, rng));
    const auto b = chaos::integral(chaos::random_kernel(order(rng), n, rng));
    worst = std::max(worst, chaos::product_deviation(a, b, 1000, rng));
  }
  const double secs = seconds_since(t0);
  l.note("max_rel_dev=" + fmt(worst) + " seconds=" + fmt(secs));
  l.require(worst < kProductTol, "deviation");
  l.require(secs < kProductSeconds, "runtime");
  return l;
}

Line fourth_moment_identity() {
  Line l;
  Rng rng = make_rng(kSeed, 0xA2);
  std::uniform_int_distribution<int> order(1, 3), dim(1, 5);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto f = chaos::random_kernel(order(rng), dim(rng), rng);
    const double exact = chaos::moment(chaos::integral(f), 4);
    worst = std::max(worst, std::abs(malliavin::fourth_moment_identity(f) - exact) / exact);
  }
  const double e4 = malliavin::fourth_moment_identity(half_square());
  const double var_t = malliavin::variance(malliavin::gamma_T(chaos::integral(half_square())));
  l.note("max_rel_dev=" + fmt(worst) + " EF4=" + fmt(e4) + " VarT=" + fmt(var_t));
  l.require(worst < kIdentityTol, "identity");
  l.require(std::abs(e4 - 15.0) < kCanonicalTol, "E F^4 = 15");
  l.require(std::abs(var_t - 2.0) < kCanonicalTol, "Var T = 2");
  return l;
}

Line fourth_moment_theorem() {
  Line l;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_rng(kSeed, 0xA3);
  std::uniform_int_distribution<int> dim(8, 16);
  double min_slack = 1e300, max_err = 0.0;
  for (int i = 0; i < 10; ++i) {
    auto f = chaos::random_kernel(2, dim(rng), rng);
    f = chaos::scaled(f, 1.0 / std::sqrt(2.0 * f.norm_squared()));
    const auto r = malliavin::fourth_moment_tv_bound(f);
    min_slack = std::min(min_slack, r.tv.slack);
    max_err = std::max(max_err, r.tv.quantity_error);
    l.require(r.tv.slack >= 0.0 && r.tv.quantity + r.tv.quantity_error <= r.tv.cap, "cap");
  }
  const double secs = seconds_since(t0);
  l.note("min_slack=" + fmt(min_slack) + " max_quadrature_error=" + fmt(max_err) + " seconds=" + fmt(secs));
  l.require(max_err < kQuadratureErrorCap, "quadrature error");
  l.require(secs < kTheoremSeconds, "runtime");
  return l;
}

Line berry_esseen() {
  Line l;
  for (int n : {4, 16, 64, 256}) {
    const auto model = couplings::iid_model(distances::rademacher(), n);
    const auto law = couplings::exact_sum_law(model);
    l.require(law.has_value(), "enumeration n=" + std::to_string(n));
    if (!law) continue;
    const auto d = distances::kolmogorov_distance(*law, distances::standard_normal());
    const double scaled = d.value * std::sqrt(n);
    l.note("n=" + std::to_string(n) + ":dK=" + fmt(d.value) + ",dK*sqrt(n)=" + fmt(scaled));
    l.require(d.value + d.error_bound <= 7.1 / std::sqrt(n), "cap n=" + std::to_string(n));
    l.require(scaled >= kBerryEsseenLo && scaled <= kBerryEsseenHi, "rate band n=" + std::to_string(n));
  }
  return l;
}

Line zero_bias() {
  Line l;
  for (int n : {4, 16, 64, 256}) {
    const auto model = couplings::iid_model(distances::rademacher(), n);
    const auto w = couplings::wasserstein_zero_bias_check(model, 1'000'000, kSeed + static_cast<std::uint64_t>(n));
    l.note("n=" + std::to_string(n) + ":dW=" + fmt(w.versus_gamma.value) + ",gap=" + fmt(w.gap.estimate));
    l.require(w.versus_gamma.exact && w.versus_gamma.pass, "d_W <= 3 sum gamma, n=" + std::to_string(n));
    l.require(w.gap.estimate <= 1.5 * model.sum_gamma() + kSeSlack * w.gap.se, "mean gap n=" + std::to_string(n));
  }
  return l;
}

Line stein_bounds() {
  Line l;
  const stein::Grid grid{-8.0, 8.0, 1e-3};
  std::vector<stein::TestFunction> hs;
  for (int j = 0; j < 20; ++j) {
    const double a = 0.5 + 0.15 * j, b = -1.0 + 0.1 * j;
    switch (j % 4) {
      case 0: hs.push_back(stein::bounded([a, b](double w) { return std::sin(a * w + b); }, 1.0, "sin")); break;
      case 1: hs.push_back(stein::bounded([a](double w) { return std::tanh(a * w); }, 1.0, "tanh")); break;
      case 2: hs.push_back(stein::bounded([a, b](double w) { return std::exp(-a * (w - b) * (w - b)); }, 1.0, "bump")); break;
      default:
        hs.push_back(stein::bounded([a, b](double w) { return std::clamp(a * (w - b), -1.0, 1.0); }, 1.0, "clip",
                                    {b - 1.0 / a, b + 1.0 / a}));
    }
  }
  for (int j = 0; j < 20; ++j) {
    const double a = 0.5 + 0.15 * j, b = -1.0 + 0.1 * j;
    switch (j % 4) {
      case 0: hs.push_back(stein::lipschitz([a, b](double w) { return std::sin(a * w + b) / a; }, 1.0, "sin")); break;
      case 1: hs.push_back(stein::lipschitz([b](double w) { return std::abs(w - b); }, 1.0, "abs", {b})); break;
      case 2: hs.push_back(stein::lipschitz([a](double w) { return std::tanh(a * w) / a; }, 1.0, "tanh")); break;
      default: hs.push_back(stein::lipschitz([a, b](double w) { return std::atan(a * w) - b * w; }, a + std::abs(b), "atan"));
    }
  }
  std::vector<double> xs;
  for (int j = 0; j < 20; ++j) xs.push_back(-3.0 + 6.0 * j / 19.0);
  for (double x : xs) hs.push_back(stein::indicator(x));

  int failures = 0;
  for (const auto& h : hs)
    if (!stein::verify_solution_bounds(h, grid).all_pass()) ++failures;
  double closed = 0.0;
  for (double x : xs) {
    const auto s = stein::solve_stein(stein::indicator(x));
    for (int i = 0; i <= 16000; ++i) {
      const double w = grid.lo + grid.step * i;
      closed = std::max(closed, std::abs(s(w) - stein::indicator_solution_closed_form(x, w)));
    }
  }
  l.note("functions=" + std::to_string(hs.size()) + " failures=" + std::to_string(failures) +
         " closed_form_dev=" + fmt(closed));
  l.require(failures == 0, "caps");
  l.require(closed < kClosedFormTol, "closed form");
  return l;
}

Line integration_by_parts() {
  Line l;
  Rng rng = make_rng(kSeed, 0xA7);
  std::uniform_int_distribution<int> order(1, 3), dim(1, 4);
  std::normal_distribution<double> n01;
  int ibp_fail = 0, stein_fail = 0;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int n = dim(rng);
    auto f = chaos::constant_vector(n01(rng), n);
    auto g = chaos::constant_vector(n01(rng), n);
    for (int k = 1, top = order(rng); k <= top; ++k) f = f + chaos::integral(chaos::random_kernel(k, n, rng));
    for (int k = 1, top = order(rng); k <= top; ++k) g = g + chaos::integral(chaos::random_kernel(k, n, rng));
    const auto r = malliavin::integration_by_parts_check(f, g);
    worst = std::max(worst, r.discrepancy / std::max(1.0, std::abs(r.lhs)));
    ibp_fail += r.pass ? 0 : 1;
    const std::vector<std::vector<double>> polys{
        {0.0, 1.0}, {1.0, 0.0, 1.0}, {0.0, 0.0, 0.0, 1.0}, {n01(rng), n01(rng), n01(rng)}, {0.2, -0.5, 0.0, 0.3, 0.1}};
    for (const auto& p : polys) {
      const auto s = malliavin::stein_identity_check(f, p);
      worst = std::max(worst, s.discrepancy / std::max(1.0, std::abs(s.lhs)));
      stein_fail += s.pass ? 0 : 1;
    }
  }
  l.note("ibp_failures=" + std::to_string(ibp_fail) + " stein_failures=" + std::to_string(stein_fail) +
         " max_rel_discrepancy=" + fmt(worst));
  l.require(ibp_fail == 0 && stein_fail == 0, "equalities at 1e-9");
  return l;
}

Line fbm_rates() {
  Line l;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> ns{256, 512, 1024, 2048, 4096};
  const auto table = experiments::qv_rate_table({0.3, 0.55, 0.7, 0.75}, ns);
  bool ordered = true;
  for (const auto& r : table.rows) ordered = ordered && r.fourth_cumulant_exact <= r.fourth_cumulant_bound;
  const auto& f03 = table.fits[0];
  const auto& f055 = table.fits[1];
  const auto& f07 = table.fits[2];
  const auto& f075 = table.fits[3];
  l.note("H=0.3:sqrtk4_slope=" + fmt(f03.sqrt_cumulant_slope) + " H=0.7:sqrtk4_slope=" + fmt(f07.sqrt_cumulant_slope) +
         " H=0.75:sqrtk4*ln(n)=[" + fmt(f075.log_scaled_min) + "," + fmt(f075.log_scaled_max) + "]" +
         " H=0.55:M_slope=" + fmt(f055.m_stat_slope) + " H=0.7:M_slope=" + fmt(f07.m_stat_slope));
  l.require(std::abs(f03.sqrt_cumulant_slope + 0.5) <= kSlopeTol, "H=0.3 slope");
  l.require(std::abs(f07.sqrt_cumulant_slope + 0.2) <= kSlopeTol, "H=0.7 slope");
  l.require(f075.log_scaled_max <= kLogBandFactor * f075.log_scaled_min, "H=0.75 log band");
  l.require(std::abs(f055.m_stat_slope + 0.5) <= kSlopeTol, "H=0.55 M slope");
  l.require(std::abs(f07.m_stat_slope + 0.3) <= kMSlopeTolHigh, "H=0.7 M slope");
  l.require(ordered, "exact <= bound");
  const double secs = seconds_since(t0);
  l.note("seconds=" + fmt(secs));
  l.require(secs < kQvSeconds, "runtime");
  return l;
}

Line breuer_major() {
  Line l;
  const auto h2 = hermite::pure_hermite(2);
  for (double h : {0.5, 0.6}) {
    const double sigma2 = experiments::bm_sigma2(h2, experiments::fbm_spec(h, 2), 2);
    const double var_n = experiments::bm_variance_n(h2, experiments::fbm_spec(h, 4096));
    const auto sim = experiments::bm_simulate(h2, experiments::fbm_spec(h, 1024), 100000, kSeed);
    const double padded = sim.kolmogorov.value + sim.kolmogorov.error_bound;
    l.note("H=" + fmt(h) + ":var_rel=" + fmt(var_n / sigma2 - 1.0) + ",dK+eps=" + fmt(padded));
    l.require(std::abs(var_n / sigma2 - 1.0) <= kVarianceRel, "variance H=" + fmt(h));
    l.require(padded < kBreuerMajorDk, "d_K H=" + fmt(h));
  }
  const double n = 16384.0;
  const double ratio = experiments::qv_sigma_n_sq(0.75, 16384) / (n * std::log(n)) / (9.0 / 16.0);
  l.note("H=0.75:sigma_n^2/(n ln n)/(9/16)=" + fmt(ratio));
  l.require(std::abs(ratio - 1.0) <= kLogVarianceRel, "9/16 limit at n=2^14");
  return l;
}

Line exchangeable_pair() {
  Line l;
  const auto pair = couplings::make_exchangeable_pair(couplings::iid_model(distances::rademacher(), 50));
  const auto s = couplings::pair_statistics(pair, 1'000'000, kSeed);
  l.note("slope=" + fmt(s.slope) + "+-" + fmt(s.slope_se) + " T1=" + fmt(s.mean_t1) + "+-" + fmt(s.t1_se) +
         " antisym=" + fmt(s.antisymmetry) + "+-" + fmt(s.antisymmetry_se));
  l.require(std::abs(s.slope + 1.0 / 50.0) <= kSeSlack * s.slope_se, "slope");
  l.require(std::abs(s.mean_t1 - 1.0) <= kSeSlack * s.t1_se, "T1");
  l.require(std::abs(s.antisymmetry) <= kSeSlack * s.antisymmetry_se, "antisymmetry");
  return l;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Line()>>> criteria{
      {"product formula", product_formula},
      {"fourth moment identity", fourth_moment_identity},
      {"fourth moment theorem", fourth_moment_theorem},
      {"Berry-Esseen", berry_esseen},
      {"zero-bias bounds", zero_bias},
      {"Stein solution bounds", stein_bounds},
      {"integration by parts and Stein identity", integration_by_parts},
      {"fBm quadratic variation rates", fbm_rates},
      {"Breuer-Major", breuer_major},
      {"exchangeable pair", exchangeable_pair},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Line l;
    try {
      l = criteria[i].second();
    } catch (const std::exception& e) {
      l.pass = false;
      l.detail = std::string(" [exception: ") + e.what() + "]";
    }
    failed += l.pass ? 0 : 1;
    std::printf("criterion %zu (%s): %s%s\n", i + 1, criteria[i].first, l.pass ? "PASS" : "FAIL", l.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
