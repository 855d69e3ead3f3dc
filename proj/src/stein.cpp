#include "chaos_stein/stein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "chaos_stein/error.hpp"
#include "chaos_stein/normal.hpp"
#include "chaos_stein/rng.hpp"
#include "quadrature.hpp"

namespace chaos_stein::stein {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kQuadTol = 1e-13;
constexpr double kAcceptedError = 1e-7;

double checked(const detail::QuadResult& r, const char* what) {
  if (!std::isfinite(r.value) || r.error > kAcceptedError * (1.0 + std::abs(r.value)))
    throw EvaluationError(std::string(what) + ": quadrature did not converge");
  return r.value;
}

// Integral over [0, inf) split at the given interior points. Points within
// 1e-9 of the origin are dropped: such panels carry no mass but defeat the
// error estimate.
template <class F>
double half_line(F&& g, std::vector<double> cuts, const char* what) {
  std::erase_if(cuts, [](double c) { return !(c > 1e-9) || !std::isfinite(c); });
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  double lo = 0.0;
  for (double c : cuts) {
    total += checked(detail::integrate(g, lo, c, kQuadTol), what);
    lo = c;
  }
  return total + checked(detail::integrate(g, lo, kInf, kQuadTol), what);
}

std::vector<double> singular_points(const TestFunction& h) {
  std::vector<double> pts = h.kinks;
  if (h.kind == TestKind::indicator) pts.push_back(h.x);
  return pts;
}

}  // namespace

std::string to_string(TestKind kind) {
  switch (kind) {
    case TestKind::bounded_continuous: return "bounded_continuous";
    case TestKind::lipschitz: return "lipschitz";
    case TestKind::indicator: return "indicator";
  }
  return "unknown";
}

TestFunction bounded(std::function<double(double)> h, double sup_norm, std::string label,
                     std::vector<double> kinks) {
  if (!h) throw PreconditionError("bounded: empty callable");
  if (!(sup_norm >= 0.0) || !std::isfinite(sup_norm)) throw PreconditionError("bounded: sup norm must be finite");
  for (int i = -10000; i <= 10000; ++i) {
    const double v = h(i * 1e-3);
    if (!(std::abs(v) <= sup_norm * (1.0 + 1e-12) + 1e-300))
      throw PreconditionError("bounded: |h| exceeds the declared sup norm");
  }
  return {TestKind::bounded_continuous, std::move(h), sup_norm, 0.0, std::move(label), std::move(kinks)};
}

TestFunction lipschitz(std::function<double(double)> h, double lip, std::string label,
                       std::vector<double> kinks) {
  if (!h) throw PreconditionError("lipschitz: empty callable");
  if (!(lip >= 0.0) || !std::isfinite(lip)) throw PreconditionError("lipschitz: constant must be finite");
  constexpr double step = 1e-3;
  double prev = h(-10.0);
  for (int i = -9999; i <= 10000; ++i) {
    const double v = h(i * step);
    if (!(std::abs(v - prev) / step <= lip * (1.0 + 1e-8) + 1e-12))
      throw PreconditionError("lipschitz: difference quotient exceeds the declared constant");
    prev = v;
  }
  return {TestKind::lipschitz, std::move(h), lip, 0.0, std::move(label), std::move(kinks)};
}

TestFunction indicator(double x) {
  if (!std::isfinite(x)) throw PreconditionError("indicator: threshold must be finite");
  return {TestKind::indicator, [x](double w) { return w <= x ? 1.0 : 0.0; }, 1.0, x, "indicator", {}};
}

double gaussian_expectation(const TestFunction& h) {
  if (h.kind == TestKind::indicator) return std_normal_cdf(h.x);
  std::vector<double> cuts = singular_points(h);
  cuts.push_back(0.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const auto g = [&](double t) { return h(t) * std_normal_pdf(t); };
  double total = checked(detail::integrate(g, -kInf, cuts.front(), kQuadTol), "gaussian_expectation");
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
    total += checked(detail::integrate(g, cuts[i], cuts[i + 1], kQuadTol), "gaussian_expectation");
  return total + checked(detail::integrate(g, cuts.back(), kInf, kQuadTol), "gaussian_expectation");
}

double indicator_solution_closed_form(double x, double w) {
  const double lo = std_normal_cdf(std::min(w, x));
  const double hi = std_normal_sf(std::max(w, x));
  if (lo <= 0.0 || hi <= 0.0) return 0.0;
  return std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * w * w + std::log(lo) + std::log(hi));
}

SteinSolution solve_stein(const TestFunction& h) {
  if (!h.eval) throw PreconditionError("solve_stein: empty test function");
  SteinSolution sol;
  sol.h = h;
  sol.eh_z = gaussian_expectation(h);
  const double c = sol.eh_z;
  const std::vector<double> marks = singular_points(h);
  const auto fn = h.eval;

  sol.eval = [fn, c, marks](double w) {
    std::vector<double> cuts(marks.size());
    if (w <= 0.0) {
      // int_{-inf}^w (h - c) phi / phi(w), with t = w - s.
      std::transform(marks.begin(), marks.end(), cuts.begin(), [w](double p) { return w - p; });
      const auto g = [&](double s) { return (fn(w - s) - c) * std::exp(w * s - 0.5 * s * s); };
      return half_line(g, std::move(cuts), "solve_stein");
    }
    // -int_w^inf (h - c) phi / phi(w), with t = w + s.
    std::transform(marks.begin(), marks.end(), cuts.begin(), [w](double p) { return p - w; });
    const auto g = [&](double s) { return (fn(w + s) - c) * std::exp(-w * s - 0.5 * s * s); };
    return -half_line(g, std::move(cuts), "solve_stein");
  };
  const auto f = sol.eval;
  sol.deriv = [fn, c, f](double w) { return fn(w) - c + w * f(w); };
  return sol;
}

bool BoundsReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.pass; });
}

BoundsReport verify_solution_bounds(const TestFunction& h, const Grid& grid) {
  return verify_solution_bounds(solve_stein(h), grid);
}

BoundsReport verify_solution_bounds(const SteinSolution& sol, const Grid& grid) {
  if (!(grid.lo >= -10.0 && grid.hi <= 10.0 && grid.lo < grid.hi && grid.step > 0.0))
    throw PreconditionError("verify_solution_bounds: grid must lie in [-10, 10] with positive step");
  const auto n = static_cast<std::size_t>(std::floor((grid.hi - grid.lo) / grid.step + 1e-9)) + 1;
  const TestFunction& h = sol.h;
  BoundsReport report;
  report.kind = h.kind;

  std::vector<double> ws(n), fs(n), ds(n);
  for (std::size_t i = 0; i < n; ++i) {
    ws[i] = std::min(grid.lo + static_cast<double>(i) * grid.step, grid.hi);
    fs[i] = sol.eval(ws[i]);
    ds[i] = h(ws[i]) - sol.eh_z + ws[i] * fs[i];
  }
  const auto sup_abs = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  };
  const auto add = [&](std::string q, double observed, double cap, double tol, std::string note = {}) {
    report.checks.push_back({std::move(q), observed, cap, observed <= cap + tol, std::move(note)});
  };
  const double sup_f = sup_abs(fs);
  const double sup_d = sup_abs(ds);

  switch (h.kind) {
    case TestKind::bounded_continuous: {
      const double cap = std::sqrt(2.0 * std::numbers::pi) * h.bound;
      if (sup_f <= cap + kBoundSlack) {
        add("sup|f|", sup_f, cap, kBoundSlack);
      } else {
        // Between sqrt(2 pi) and sqrt(2 pi e) times sup|h| is reported, not failed.
        const double loose = std::sqrt(2.0 * std::numbers::pi * std::numbers::e) * h.bound;
        report.checks.push_back({"sup|f|", sup_f, cap, sup_f <= loose + kBoundSlack,
                                 "exceeds sqrt(2 pi) sup|h|; compared against sqrt(2 pi e) sup|h|"});
      }
      add("sup|f'|", sup_d, 4.0 * h.bound, kBoundSlack);
      break;
    }
    case TestKind::lipschitz: {
      double sup_dd = 0.0;
      for (double w : ws) {
        const double dd = (sol.deriv(w + kFiniteDifferenceStep) - sol.deriv(w - kFiniteDifferenceStep)) /
                          (2.0 * kFiniteDifferenceStep);
        sup_dd = std::max(sup_dd, std::abs(dd));
      }
      add("sup|f|", sup_f, 2.0 * h.bound, kBoundSlack);
      add("sup|f'|", sup_d, std::sqrt(2.0 / std::numbers::pi) * h.bound, kBoundSlack);
      // Quadrature noise ~1e-12 divided by the step.
      add("sup|f''|", sup_dd, 2.0 * h.bound, 1e-6, "central differences, step 1e-5");
      break;
    }
    case TestKind::indicator: {
      const double min_f = *std::min_element(fs.begin(), fs.end());
      report.checks.push_back({"min f", min_f, 0.0, min_f > 0.0, "must be positive"});
      add("sup f", *std::max_element(fs.begin(), fs.end()), std::sqrt(2.0 * std::numbers::pi) / 4.0, kBoundSlack);
      double sup_wf = 0.0;
      for (std::size_t i = 0; i < n; ++i) sup_wf = std::max(sup_wf, std::abs(ws[i] * fs[i]));
      add("sup|w f|", sup_wf, 1.0, kBoundSlack);
      add("sup|f'|", sup_d, 1.0, kBoundSlack);
      const auto [dmin, dmax] = std::minmax_element(ds.begin(), ds.end());
      add("sup|f'(w) - f'(v)|", *dmax - *dmin, 1.0, kBoundSlack);

      // Two-point inequality on seeded triples; observed is the worst ratio.
      Rng rng = make_rng(kDefaultSeed, 0x57E1);
      std::uniform_real_distribution<double> uw(grid.lo, grid.hi);
      std::uniform_real_distribution<double> uuv(-2.0, 2.0);
      const double c = std::sqrt(2.0 * std::numbers::pi) / 4.0;
      double worst = 0.0;
      for (int k = 0; k < 4000; ++k) {
        const double w = uw(rng);
        const double u = uuv(rng);
        const double v = uuv(rng);
        const double lhs = std::abs((w + u) * sol.eval(w + u) - (w + v) * sol.eval(w + v));
        const double rhs = (std::abs(w) + c) * (std::abs(u) + std::abs(v));
        if (rhs > 0.0) worst = std::max(worst, lhs / rhs);
      }
      add("two-point ratio", worst, 1.0, kBoundSlack, "4000 seeded (w,u,v) triples, u,v in [-2,2]");
      break;
    }
  }
  return report;
}

namespace {

struct T1Stats {
  double mean_term = 0.0;
  double var_term = 0.0;
};

// t1 values sorted by w; bins of near-equal count.
T1Stats t1_statistics(const std::vector<double>& t1, int bins) {
  const std::size_t n = t1.size();
  const double nd = static_cast<double>(n);
  std::vector<double> means(bins), weights(bins), noise(bins);
  for (int b = 0; b < bins; ++b) {
    const std::size_t lo = n * static_cast<std::size_t>(b) / static_cast<std::size_t>(bins);
    const std::size_t hi = n * static_cast<std::size_t>(b + 1) / static_cast<std::size_t>(bins);
    RunningStats s;
    for (std::size_t i = lo; i < hi; ++i) s.add(t1[i]);
    means[b] = s.mean;
    weights[b] = static_cast<double>(hi - lo) / nd;
    noise[b] = s.count > 1 ? s.variance() : 0.0;
  }
  T1Stats out;
  // Centred on the first bin mean so that equal means give exactly zero.
  double first = 0.0;
  double second = 0.0;
  double bias = 0.0;
  for (int b = 0; b < bins; ++b) {
    out.mean_term += weights[b] * std::abs(1.0 - means[b]);
    const double d = means[b] - means[0];
    first += weights[b] * d;
    second += weights[b] * d * d;
    bias += noise[b] * (1.0 - weights[b]) / nd;
  }
  const double between = second - first * first;
  out.mean_term *= 2.0;
  out.var_term = 2.0 * std::sqrt(std::max(0.0, between - bias));
  return out;
}

}  // namespace

T1BoundReport tv_bound_from_T1(std::span<const std::pair<double, double>> pairs, int bins) {
  if (pairs.size() < 1000) throw PreconditionError("tv_bound_from_T1: need at least 1000 pairs");
  if (bins < 10) throw PreconditionError("tv_bound_from_T1: need at least 10 bins");
  if (static_cast<std::size_t>(bins) * 2 > pairs.size())
    throw PreconditionError("tv_bound_from_T1: fewer than two pairs per bin");
  for (const auto& [w, t] : pairs)
    if (!std::isfinite(w) || !std::isfinite(t)) throw PreconditionError("tv_bound_from_T1: non-finite input");

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pairs[i].first < pairs[j].first; });
  if (pairs[order.front()].first == pairs[order.back()].first)
    throw BinningError("tv_bound_from_T1: all w values are equal");

  std::vector<double> t1;
  t1.reserve(pairs.size());
  for (std::size_t i : order) t1.push_back(pairs[i].second);
  const T1Stats full = t1_statistics(t1, bins);

  // Delete-a-group jackknife; group of pair i is i mod G.
  const int groups = kJackknifeGroups;
  std::vector<T1Stats> partial(groups);
  for (int g = 0; g < groups; ++g) {
    std::vector<double> kept;
    kept.reserve(pairs.size());
    for (std::size_t i : order)
      if (static_cast<int>(i % groups) != g) kept.push_back(pairs[i].second);
    partial[g] = t1_statistics(kept, bins);
  }
  const auto se = [&](auto field) {
    double avg = 0.0;
    for (const auto& p : partial) avg += field(p);
    avg /= groups;
    double ss = 0.0;
    for (const auto& p : partial) ss += (field(p) - avg) * (field(p) - avg);
    return std::sqrt((groups - 1.0) / groups * ss);
  };

  T1BoundReport r;
  r.bound_mean = full.mean_term;
  r.bound_var = full.var_term;
  r.se_mean = se([](const T1Stats& s) { return s.mean_term; });
  r.se_var = se([](const T1Stats& s) { return s.var_term; });
  r.bins = bins;
  r.n = pairs.size();
  return r;
}

}  // namespace chaos_stein::stein
