#include "chaos_stein/distances.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "chaos_stein/error.hpp"
#include "chaos_stein/normal.hpp"
#include "quadrature.hpp"

namespace chaos_stein::distances {

namespace {

// Integral of Phi from -inf to z.
double std_normal_cdf_integral(double z) { return z * std_normal_cdf(z) + std_normal_pdf(z); }

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

bool is_finite(double x) { return std::isfinite(x); }

double left_limit(const DistributionHandle& d, double x) {
  return d.cdf(std::nextafter(x, -kInf));
}

// Integral of |c - F| over [a, b] for monotone F with a known antiderivative.
double abs_gap_integral(const DistributionHandle& d, const std::function<double(double)>& antideriv, double c,
                        double a, double b) {
  const auto signed_part = [&](double lo, double hi) {
    // integral of (F - c) over [lo, hi]
    return (antideriv(hi) - antideriv(lo)) - c * (hi - lo);
  };
  if (!(b > a)) return 0.0;
  const double fa = d.cdf(a);
  const double fb = d.cdf(b);
  if (fb <= c) return -signed_part(a, b);
  if (fa >= c) return signed_part(a, b);
  const double q = std::clamp(d.quantile(c), a, b);
  return -signed_part(a, q) + signed_part(q, b);
}

// [lo, hi] carrying all but ~2 eps of the mass of both laws.
std::pair<double, double> common_window(const DistributionHandle& a, const DistributionHandle& b, double eps) {
  const auto lower = [eps](const DistributionHandle& d) {
    double q = d.quantile(eps);
    if (!is_finite(q)) q = d.support.lo;
    return std::max(q, d.support.lo);
  };
  const auto upper = [eps](const DistributionHandle& d) {
    double q = d.quantile(1.0 - eps);
    if (!is_finite(q)) q = d.support.hi;
    return std::min(q, d.support.hi);
  };
  double lo = std::min(lower(a), lower(b));
  double hi = std::max(upper(a), upper(b));
  if (a.atoms && !a.atoms->empty()) {
    lo = std::min(lo, a.atoms->front().location);
    hi = std::max(hi, a.atoms->back().location);
  }
  if (b.atoms && !b.atoms->empty()) {
    lo = std::min(lo, b.atoms->front().location);
    hi = std::max(hi, b.atoms->back().location);
  }
  if (!is_finite(lo) || !is_finite(hi)) throw EvaluationError("distance window is not finite");
  if (hi <= lo) hi = lo + 1.0;
  return {lo, hi};
}

std::vector<double> breakpoints_within(const DistributionHandle& a, const DistributionHandle& b, double lo,
                                       double hi) {
  std::vector<double> pts{lo, hi};
  const auto add = [&](double x) {
    if (is_finite(x) && x > lo && x < hi) pts.push_back(x);
  };
  for (const auto* d : {&a, &b}) {
    add(d->support.lo);
    add(d->support.hi);
    for (double s : d->singular_points) add(s);
    if (d->atoms)
      for (const Atom& at : *d->atoms) add(at.location);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

bool touches_singularity(const DistributionHandle& d, double x) {
  if (x == d.support.lo || x == d.support.hi) return true;
  return std::find(d.singular_points.begin(), d.singular_points.end(), x) != d.singular_points.end();
}

}  // namespace

bool DistributionHandle::is_atomic() const {
  if (!atoms || atoms->empty()) return false;
  double total = 0.0;
  for (const Atom& a : *atoms) total += a.mass;
  return std::abs(total - 1.0) < 1e-9;
}

DistributionHandle normal(double mean, double sd) {
  if (!(sd > 0.0)) throw PreconditionError("normal: sd must be positive");
  DistributionHandle d;
  d.label = "normal(" + fmt_num(mean) + "," + fmt_num(sd) + ")";
  d.cdf = [=](double x) { return std_normal_cdf((x - mean) / sd); };
  d.quantile = [=](double u) { return mean + sd * std_normal_quantile(u); };
  d.density = [=](double x) { return std_normal_pdf((x - mean) / sd) / sd; };
  d.sampler = [=](Rng& rng) { return std::normal_distribution<double>(mean, sd)(rng); };
  d.lower_tail_integral = [=](double x) { return sd * std_normal_cdf_integral((x - mean) / sd); };
  d.upper_tail_integral = [=](double x) { return sd * std_normal_cdf_integral(-(x - mean) / sd); };
  return d;
}

DistributionHandle uniform(double a, double b) {
  if (!(b > a)) throw PreconditionError("uniform: empty interval");
  DistributionHandle d;
  d.label = "uniform(" + fmt_num(a) + "," + fmt_num(b) + ")";
  d.cdf = [=](double x) { return std::clamp((x - a) / (b - a), 0.0, 1.0); };
  d.quantile = [=](double u) { return a + std::clamp(u, 0.0, 1.0) * (b - a); };
  d.density = [=](double x) { return (x >= a && x <= b) ? 1.0 / (b - a) : 0.0; };
  d.sampler = [=](Rng& rng) { return std::uniform_real_distribution<double>(a, b)(rng); };
  d.support = {a, b};
  d.lower_tail_integral = [=](double x) {
    if (x <= a) return 0.0;
    if (x >= b) return 0.5 * (b - a) + (x - b);
    return (x - a) * (x - a) / (2.0 * (b - a));
  };
  d.upper_tail_integral = [=](double x) {
    if (x >= b) return 0.0;
    if (x <= a) return 0.5 * (b - a) + (a - x);
    return (b - x) * (b - x) / (2.0 * (b - a));
  };
  return d;
}

DistributionHandle discrete(std::vector<Atom> atoms, std::string label) {
  if (atoms.empty()) throw PreconditionError("discrete: no atoms");
  std::sort(atoms.begin(), atoms.end(), [](const Atom& x, const Atom& y) { return x.location < y.location; });
  std::vector<Atom> merged;
  for (const Atom& a : atoms) {
    if (a.mass < 0.0 || !std::isfinite(a.location)) throw PreconditionError("discrete: invalid atom");
    if (!merged.empty() && merged.back().location == a.location)
      merged.back().mass += a.mass;
    else
      merged.push_back(a);
  }
  std::vector<double> locs(merged.size());
  std::vector<double> cum(merged.size());
  double total = 0.0;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    locs[i] = merged[i].location;
    total += merged[i].mass;
    cum[i] = total;
  }
  if (std::abs(total - 1.0) > 1e-9) throw PreconditionError("discrete: masses do not sum to one");
  cum.back() = 1.0;

  DistributionHandle d;
  d.label = std::move(label);
  d.cdf = [locs, cum](double x) {
    const auto it = std::upper_bound(locs.begin(), locs.end(), x);
    if (it == locs.begin()) return 0.0;
    return std::min(1.0, cum[static_cast<std::size_t>(it - locs.begin()) - 1]);
  };
  d.quantile = [locs, cum](double u) {
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) return locs.back();
    return locs[static_cast<std::size_t>(it - cum.begin())];
  };
  d.sampler = [locs, cum](Rng& rng) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) return locs.back();
    return locs[static_cast<std::size_t>(it - cum.begin())];
  };
  d.support = {locs.front(), locs.back()};
  d.atoms = std::move(merged);
  return d;
}

DistributionHandle point_mass(double x) { return discrete({{x, 1.0}}, "point(" + fmt_num(x) + ")"); }

DistributionHandle rademacher(double scale) {
  if (!(scale > 0.0)) throw PreconditionError("rademacher: scale must be positive");
  DistributionHandle d = discrete({{-scale, 0.5}, {scale, 0.5}}, "rademacher(" + fmt_num(scale) + ")");
  d.sampler = [scale](Rng& rng) { return (rng() >> 63) ? scale : -scale; };
  return d;
}

DistributionHandle standardized_binomial(int n, double p) {
  if (n < 1 || !(p > 0.0 && p < 1.0)) throw PreconditionError("standardized_binomial: bad parameters");
  const double mu = n * p;
  const double sd = std::sqrt(n * p * (1.0 - p));
  std::vector<Atom> atoms;
  for (int k = 0; k <= n; ++k) {
    const double logp = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                        k * std::log(p) + (n - k) * std::log1p(-p);
    atoms.push_back({(k - mu) / sd, std::exp(logp)});
  }
  double total = 0.0;
  for (const Atom& a : atoms) total += a.mass;
  for (Atom& a : atoms) a.mass /= total;
  return discrete(std::move(atoms), "std_binomial(" + std::to_string(n) + "," + fmt_num(p) + ")");
}

DistributionHandle scaled(const DistributionHandle& d, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw PreconditionError("scaled: factor must be positive and finite");
  DistributionHandle s;
  s.label = "scaled(" + d.label + "," + fmt_num(c) + ")";
  s.cdf = [f = d.cdf, c](double x) { return f(x / c); };
  s.quantile = [q = d.quantile, c](double u) { return c * q(u); };
  if (d.density) s.density = [p = d.density, c](double x) { return p(x / c) / c; };
  s.sampler = [g = d.sampler, c](Rng& rng) { return c * g(rng); };
  s.support = {c * d.support.lo, c * d.support.hi};
  if (d.atoms) {
    std::vector<Atom> atoms = *d.atoms;
    for (Atom& a : atoms) a.location *= c;
    s.atoms = std::move(atoms);
  }
  for (double x : d.singular_points) s.singular_points.push_back(c * x);
  if (d.lower_tail_integral)
    s.lower_tail_integral = [f = d.lower_tail_integral, c](double x) { return c * f(x / c); };
  if (d.upper_tail_integral)
    s.upper_tail_integral = [f = d.upper_tail_integral, c](double x) { return c * f(x / c); };
  s.cdf_error = d.cdf_error;
  s.density_error = d.density_error / c;
  s.density_error_l1 = d.density_error_l1;
  return s;
}

std::string to_string(Metric m) {
  switch (m) {
    case Metric::kolmogorov: return "K";
    case Metric::wasserstein: return "W";
    case Metric::total_variation: return "TV";
  }
  return "?";
}

std::string to_string(Method m) {
  switch (m) {
    case Method::exact_jumps: return "exact_jumps";
    case Method::grid_bracket: return "grid_bracket";
    case Method::quantile_integral: return "quantile_integral";
    case Method::density_integral: return "density_integral";
    case Method::empirical_dkw: return "empirical_dkw";
  }
  return "?";
}

DistanceReport kolmogorov_distance(const DistributionHandle& a, const DistributionHandle& b) {
  const bool a_atomic = a.is_atomic();
  const bool b_atomic = b.is_atomic();
  const bool a_free = !a.atoms || a.atoms->empty();
  const bool b_free = !b.atoms || b.atoms->empty();
  if (!((a_atomic && (b_free || b_atomic)) || (b_atomic && a_free)))
    return kolmogorov_distance_grid(a, b);

  std::vector<double> jumps;
  for (const auto* d : {&a, &b})
    if (d->atoms)
      for (const Atom& at : *d->atoms) jumps.push_back(at.location);
  std::sort(jumps.begin(), jumps.end());
  jumps.erase(std::unique(jumps.begin(), jumps.end()), jumps.end());

  // Between consecutive jumps one side is constant and the other monotone, so
  // the supremum is attained at a jump or approached from its left.
  double best = 0.0;
  for (double x : jumps) {
    best = std::max(best, std::abs(a.cdf(x) - b.cdf(x)));
    best = std::max(best, std::abs(left_limit(a, x) - left_limit(b, x)));
  }
  return {Metric::kolmogorov, best, a.cdf_error + b.cdf_error, Method::exact_jumps};
}

DistanceReport kolmogorov_distance_grid(const DistributionHandle& a, const DistributionHandle& b,
                                        GridOptions options) {
  const auto [lo, hi] = common_window(a, b, 1e-14);

  std::vector<double> xs;
  constexpr int kInitial = 1024;
  for (int i = 0; i <= kInitial; ++i) xs.push_back(lo + (hi - lo) * i / kInitial);
  for (const auto* d : {&a, &b}) {
    if (d->atoms)
      for (const Atom& at : *d->atoms) {
        xs.push_back(at.location);
        xs.push_back(std::nextafter(at.location, -kInf));
      }
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  struct Point {
    double x, fa, fb;
  };
  std::vector<Point> pts;
  pts.reserve(xs.size());
  for (double x : xs) pts.push_back({x, a.cdf(x), b.cdf(x)});

  const double tail_upper = std::max({a.cdf(std::nextafter(lo, -kInf)), b.cdf(std::nextafter(lo, -kInf)),
                                      1.0 - a.cdf(hi), 1.0 - b.cdf(hi)});
  double lower = 0.0;
  double upper = 0.0;
  for (;;) {
    lower = 0.0;
    for (const Point& p : pts) lower = std::max(lower, std::abs(p.fa - p.fb));
    upper = std::max(lower, tail_upper);
    std::vector<Point> next;
    next.reserve(pts.size() * 2);
    bool refined = false;
    for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
      const Point& p = pts[j];
      const Point& q = pts[j + 1];
      const double ub = std::max(std::abs(q.fa - p.fb), std::abs(p.fa - q.fb));
      upper = std::max(upper, ub);
      next.push_back(p);
      const double mid = 0.5 * (p.x + q.x);
      if (ub > lower + options.tolerance && mid > p.x && mid < q.x && pts.size() < options.max_points) {
        next.push_back({mid, a.cdf(mid), b.cdf(mid)});
        refined = true;
      }
    }
    next.push_back(pts.back());
    if (!refined) break;
    pts = std::move(next);
    if (pts.size() >= options.max_points) {
      // One last pass to refresh the bracket on the final grid.
      lower = 0.0;
      for (const Point& p : pts) lower = std::max(lower, std::abs(p.fa - p.fb));
      upper = std::max(lower, tail_upper);
      for (std::size_t j = 0; j + 1 < pts.size(); ++j)
        upper = std::max({upper, std::abs(pts[j + 1].fa - pts[j].fb), std::abs(pts[j].fa - pts[j + 1].fb)});
      break;
    }
  }
  const double err = std::max(upper - lower + a.cdf_error + b.cdf_error, std::numeric_limits<double>::epsilon());
  return {Metric::kolmogorov, lower, err, Method::grid_bracket};
}

DistanceReport wasserstein_distance(const DistributionHandle& a, const DistributionHandle& b) {
  if (a.is_atomic() && b.is_atomic()) {
    std::vector<double> xs;
    for (const Atom& at : *a.atoms) xs.push_back(at.location);
    for (const Atom& at : *b.atoms) xs.push_back(at.location);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
      total += std::abs(a.cdf(xs[i]) - b.cdf(xs[i])) * (xs[i + 1] - xs[i]);
    return {Metric::wasserstein, total, 0.0, Method::exact_jumps};
  }

  // Atomic against a law with closed-form tail integrals: exact segment sums.
  const auto exact_mixed = [](const DistributionHandle& atomic,
                              const DistributionHandle& cont) -> std::optional<DistanceReport> {
    if (!atomic.is_atomic() || !cont.lower_tail_integral || !cont.upper_tail_integral) return std::nullopt;
    if (cont.atoms && !cont.atoms->empty()) return std::nullopt;
    const auto& atoms = *atomic.atoms;
    double total = cont.lower_tail_integral(atoms.front().location);
    double level = 0.0;
    for (std::size_t i = 0; i + 1 < atoms.size(); ++i) {
      level += atoms[i].mass;
      total += abs_gap_integral(cont, cont.lower_tail_integral, std::min(level, 1.0), atoms[i].location,
                                atoms[i + 1].location);
    }
    total += cont.upper_tail_integral(atoms.back().location);
    const double span = atoms.back().location - atoms.front().location + 1.0;
    const double err = cont.cdf_error * span + 64.0 * std::numeric_limits<double>::epsilon() *
                                                   static_cast<double>(atoms.size()) * std::max(1.0, total);
    return DistanceReport{Metric::wasserstein, total, err, Method::exact_jumps};
  };
  if (auto r = exact_mixed(a, b)) return *r;
  if (auto r = exact_mixed(b, a)) return *r;

  const auto gap = [&](double x) { return std::abs(a.cdf(x) - b.cdf(x)); };
  const auto [lo, hi] = common_window(a, b, 1e-12);
  std::vector<double> pts = breakpoints_within(a, b, lo, hi);
  double total = 0.0;
  double err = 0.0;
  constexpr int kMinPanels = 256;
  constexpr unsigned kDepth = 6;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const int pieces = std::max(1, static_cast<int>(kMinPanels * (pts[i + 1] - pts[i]) / (hi - lo)));
    for (int k = 0; k < pieces; ++k) {
      const double x0 = pts[i] + (pts[i + 1] - pts[i]) * k / pieces;
      const double x1 = k + 1 == pieces ? pts[i + 1] : pts[i] + (pts[i + 1] - pts[i]) * (k + 1) / pieces;
      const auto r = detail::integrate(gap, x0, x1, 1e-12, kDepth);
      total += r.value;
      err += r.error;
    }
  }
  // Tails by doubling panels. A finite first moment makes the panel sequence
  // decay; four consecutive panels shrinking by less than 3/4 each while still
  // above round-off is read as a divergent tail.
  const double w = hi - lo;
  for (int side : {-1, 1}) {
    bool converged = false;
    int stalled = 0;
    double previous = 0.0;
    double inner = side < 0 ? lo : hi;
    double width = w;
    for (int k = 0; k < 64 && !converged; ++k) {
      const double outer = inner + side * width;
      const auto r = side < 0 ? detail::integrate(gap, outer, inner, 1e-10, kDepth)
                              : detail::integrate(gap, inner, outer, 1e-10, kDepth);
      if (!std::isfinite(r.value)) break;
      total += r.value;
      err += r.error;
      const bool negligible = r.value <= 1e-13 * (1.0 + total);
      stalled = (k >= 1 && !negligible && r.value > 0.75 * previous) ? stalled + 1 : 0;
      if (stalled >= 4) break;
      converged = k >= 1 && r.value <= 1e-15 * (1.0 + total);
      previous = r.value;
      inner = outer;
      width *= 2.0;
    }
    if (!converged) throw InfiniteMomentError("wasserstein_distance: tail integral does not converge");
  }
  err += (a.cdf_error + b.cdf_error) * w;
  return {Metric::wasserstein, total, err, Method::quantile_integral};
}

double dkw_epsilon(std::size_t n, double delta) {
  if (n == 0) throw PreconditionError("dkw_epsilon: empty sample");
  if (!(delta > 0.0 && delta < 1.0)) throw PreconditionError("dkw_epsilon: delta must lie in (0,1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(n)));
}

DistanceReport empirical_kolmogorov(std::span<const double> samples, const DistributionHandle& b, double delta) {
  if (samples.empty()) throw PreconditionError("empirical_kolmogorov: empty input");
  if (samples.size() < 100) throw PreconditionError("empirical_kolmogorov: need at least 100 samples");
  std::vector<double> xs(samples.begin(), samples.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = b.cdf(xs[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return {Metric::kolmogorov, d, dkw_epsilon(xs.size(), delta), Method::empirical_dkw};
}

double empirical_wasserstein(std::span<const double> samples, const DistributionHandle& b) {
  if (samples.empty()) throw PreconditionError("empirical_wasserstein: empty input");
  std::vector<double> xs(samples.begin(), samples.end());
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  if (b.lower_tail_integral && b.upper_tail_integral) {
    double total = b.lower_tail_integral(xs.front());
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
      total += abs_gap_integral(b, b.lower_tail_integral, static_cast<double>(i + 1) / n, xs[i], xs[i + 1]);
    return total + b.upper_tail_integral(xs.back());
  }
  const auto lower = detail::integrate([&](double x) { return b.cdf(x); }, -kInf, xs.front(), 1e-10);
  const auto upper = detail::integrate([&](double x) { return 1.0 - b.cdf(x); }, xs.back(), kInf, 1e-10);
  double total = lower.value + upper.value;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double level = static_cast<double>(i + 1) / n;
    total += detail::integrate([&](double x) { return std::abs(level - b.cdf(x)); }, xs[i], xs[i + 1], 1e-8).value;
  }
  return total;
}

DistanceReport total_variation_density(const DistributionHandle& a, const DistributionHandle& b) {
  if (!a.has_density() || !b.has_density())
    throw CapabilityError("total_variation_density: both laws need a density (use d_K <= d_TV instead)");
  const auto [lo, hi] = common_window(a, b, 1e-13);
  const std::vector<double> pts = breakpoints_within(a, b, lo, hi);
  // Node rounding can land on an integrable pole; a single point carries no mass.
  const auto gap = [&](double x) {
    const double g = std::abs(a.density(x) - b.density(x));
    return std::isfinite(g) ? g : 0.0;
  };

  double total = 0.0;
  double err = 0.0;
  constexpr int kMinPanels = 64;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double x0 = pts[i];
    const double x1 = pts[i + 1];
    const int pieces = std::max(1, static_cast<int>(kMinPanels * (x1 - x0) / (hi - lo)));
    for (int k = 0; k < pieces; ++k) {
      const double p0 = x0 + (x1 - x0) * k / pieces;
      const double p1 = k + 1 == pieces ? x1 : x0 + (x1 - x0) * (k + 1) / pieces;
      const bool singular = (k == 0 && (touches_singularity(a, p0) || touches_singularity(b, p0))) ||
                            (k + 1 == pieces && (touches_singularity(a, p1) || touches_singularity(b, p1)));
      const auto r = singular ? detail::integrate_endpoint_singular(gap, p0, p1, 1e-10)
                              : detail::integrate_absolute(gap, p0, p1, 1e-11);
      if (!std::isfinite(r.value)) throw EvaluationError("total_variation_density: quadrature failed");
      total += r.value;
      err += r.error;
    }
  }
  const double mass_out = a.cdf(lo) + (1.0 - a.cdf(hi)) + b.cdf(lo) + (1.0 - b.cdf(hi));
  const auto integrated = [&](const DistributionHandle& d) {
    return d.density_error_l1 >= 0.0 ? d.density_error_l1 : d.density_error * (hi - lo);
  };
  const double density_err = integrated(a) + integrated(b);
  const double bound = 0.5 * (err + std::max(0.0, mass_out) + density_err + 2.0 * (a.cdf_error + b.cdf_error));
  return {Metric::total_variation, 0.5 * total, bound, Method::density_integral};
}

}  // namespace chaos_stein::distances
