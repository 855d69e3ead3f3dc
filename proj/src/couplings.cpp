#include "chaos_stein/couplings.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "chaos_stein/error.hpp"
#include "quadrature.hpp"

namespace chaos_stein::couplings {

using distances::Atom;
using distances::kInf;

namespace {

constexpr std::uint64_t kStreamSummand = 0xC0C1;
constexpr std::uint64_t kStreamGap = 0xC0C2;
constexpr std::uint64_t kStreamW = 0xC0C3;
constexpr std::uint64_t kStreamConcentration = 0xC0C4;
constexpr std::uint64_t kStreamPairs = 0xC0C5;

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

// Integral of x p, x^2 p or |x|^3 p (k = 1, 2, 3) over [a, b], split at 0 and at the singular points.
double moment_piece(const DistributionHandle& law, int k, double a, double b) {
  std::vector<double> cuts{a, b};
  if (a < 0.0 && 0.0 < b) cuts.push_back(0.0);
  for (double s : law.singular_points)
    if (a < s && s < b) cuts.push_back(s);
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const auto r = detail::integrate(
        [&](double x) {
          const double p = law.density(x);
          if (p == 0.0) return 0.0;
          return (k == 1 ? x : k == 2 ? x * x : std::abs(x) * x * x) * p;
        },
        cuts[i], cuts[i + 1], 1e-13, 15);
    if (!std::isfinite(r.value) || r.error > 1e-8 * (1.0 + std::abs(r.value)))
      throw PreconditionError("moment of " + law.label + " is not finite");
    total += r.value;
  }
  return total;
}

struct Moments {
  double mean, second, third;
};

Moments moments(const DistributionHandle& law) {
  Moments m{0.0, 0.0, 0.0};
  if (law.is_atomic()) {
    for (const Atom& a : *law.atoms) {
      m.mean += a.location * a.mass;
      m.second += a.location * a.location * a.mass;
      m.third += std::abs(a.location) * a.location * a.location * a.mass;
    }
    return m;
  }
  if (!law.has_density()) throw PreconditionError(law.label + ": summand law needs atoms or a density");
  m.mean = moment_piece(law, 1, law.support.lo, law.support.hi);
  m.second = moment_piece(law, 2, law.support.lo, law.support.hi);
  m.third = moment_piece(law, 3, law.support.lo, law.support.hi);
  return m;
}

void require_mean_zero(double mean, double second, const std::string& label) {
  if (std::abs(mean) > 1e-9 * std::sqrt(second)) throw PreconditionError(label + ": mean is not zero");
}

// Piecewise-uniform zero-bias law of an atomic summand: density
// sum_{j > k} x_j p_j / sigma^2 on [x_k, x_{k+1}).
DistributionHandle atomic_zero_bias(const SummandSpec& x) {
  const auto& atoms = *x.law.atoms;
  if (atoms.size() < 2) throw PreconditionError("zero_bias_distribution: degenerate summand");
  const std::size_t m = atoms.size() - 1;
  std::vector<double> breaks(m + 1), dens(m), cum(m + 1, 0.0);
  for (std::size_t k = 0; k <= m; ++k) breaks[k] = atoms[k].location;
  double tail = 0.0;
  for (std::size_t k = m; k-- > 0;) {
    tail += atoms[k + 1].location * atoms[k + 1].mass;
    dens[k] = std::max(0.0, tail) / x.sigma2;
  }
  for (std::size_t k = 0; k < m; ++k) cum[k + 1] = cum[k] + dens[k] * (breaks[k + 1] - breaks[k]);
  if (std::abs(cum[m] - 1.0) > 1e-9) throw PreconditionError("zero_bias_distribution: sigma2 does not match the law");
  for (double& d : dens) d /= cum[m];
  for (double& c : cum) c /= cum[m];
  cum[m] = 1.0;

  const auto segment = [breaks](double t) {
    const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
    return static_cast<std::size_t>(it - breaks.begin()) - 1;
  };
  // Integral of the cdf from the left end up to each break.
  std::vector<double> icdf(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k)
    icdf[k + 1] = icdf[k] + 0.5 * (cum[k] + cum[k + 1]) * (breaks[k + 1] - breaks[k]);

  DistributionHandle d;
  d.label = "zero_bias(" + x.law.label + ")";
  d.support = {breaks.front(), breaks.back()};
  d.cdf = [=](double t) {
    if (t <= breaks.front()) return 0.0;
    if (t >= breaks.back()) return 1.0;
    const std::size_t k = segment(t);
    return std::min(1.0, cum[k] + dens[k] * (t - breaks[k]));
  };
  d.density = [=](double t) {
    if (t < breaks.front() || t >= breaks.back()) return 0.0;
    return dens[segment(t)];
  };
  d.quantile = [=](double u) {
    if (u <= 0.0) return breaks.front();
    if (u >= 1.0) return breaks.back();
    auto it = std::upper_bound(cum.begin(), cum.end(), u);
    std::size_t k = static_cast<std::size_t>(it - cum.begin()) - 1;
    k = std::min(k, m - 1);
    while (dens[k] == 0.0 && k + 1 < m) ++k;
    return std::clamp(breaks[k] + (u - cum[k]) / dens[k], breaks[k], breaks[k + 1]);
  };
  d.sampler = [q = d.quantile](Rng& rng) { return q(uniform01(rng)); };
  d.lower_tail_integral = [=](double t) {
    if (t <= breaks.front()) return 0.0;
    if (t >= breaks.back()) return icdf[m] + (t - breaks.back());
    const std::size_t k = segment(t);
    const double s = t - breaks[k];
    return icdf[k] + cum[k] * s + 0.5 * dens[k] * s * s;
  };
  d.upper_tail_integral = [=, lower = d.lower_tail_integral](double t) {
    // int_t^inf (1 - F) = (b - t) - (icdf(b) - icdf(t)) for t <= b.
    if (t >= breaks.back()) return 0.0;
    if (t <= breaks.front()) return (breaks.back() - t) - icdf[m];
    return (breaks.back() - t) - (icdf[m] - lower(t));
  };
  for (std::size_t k = 1; k < m; ++k) d.singular_points.push_back(breaks[k]);
  return d;
}

// Zero-bias law of a summand with a density. Prefix integrals of x p and
// x^2 p are tabulated on a grid; values between nodes add one in-cell
// quadrature. The sampler inverts a cubic Hermite interpolant of the cdf.
struct ContinuousZeroBias {
  std::function<double(double)> p;
  double sigma2 = 1.0;
  std::vector<double> nodes;
  std::vector<double> below1, below2;  // int_{-inf}^{node} x p, x^2 p
  std::vector<double> above1, above2;  // int_{node}^{inf} x p, x^2 p
  std::vector<double> cdf_at, dens_at;
  double error = 0.0;

  double piece(int k, double a, double b) const {
    if (a == b) return 0.0;
    const auto r = detail::integrate([&](double x) { return (k == 1 ? x : x * x) * p(x); }, a, b, 1e-14, 10);
    return r.value;
  }
  std::size_t cell(double t) const {
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
    return std::min(static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - nodes.begin() - 1, 0)), nodes.size() - 2);
  }
  // E[X 1(X > t)] and E[X^2 1(X <= t)] or E[X^2 1(X > t)], from the nearer side.
  double upper_first(double t) const {
    if (t <= nodes.front()) return -(below1.front() - piece(1, t, nodes.front()));
    if (t >= nodes.back()) return above1.back() - piece(1, nodes.back(), t);
    const std::size_t k = cell(t);
    return t <= 0.0 ? -(below1[k] + piece(1, nodes[k], t)) : above1[k + 1] + piece(1, t, nodes[k + 1]);
  }
  double density(double t) const { return std::max(0.0, upper_first(t)) / sigma2; }
  double cdf(double t) const {
    const double a = upper_first(t);
    double value;
    if (t <= 0.0) {
      double b2;
      if (t <= nodes.front()) b2 = below2.front() - piece(2, t, nodes.front());
      else {
        const std::size_t k = cell(t);
        b2 = below2[k] + piece(2, nodes[k], t);
      }
      value = (b2 + t * a) / sigma2;
    } else {
      double a2;
      if (t >= nodes.back()) a2 = above2.back() - piece(2, nodes.back(), t);
      else {
        const std::size_t k = cell(t);
        a2 = above2[k + 1] + piece(2, t, nodes[k + 1]);
      }
      value = 1.0 - (a2 - t * a) / sigma2;
    }
    return std::clamp(value, 0.0, 1.0);
  }
  // Inverse of the Hermite interpolant through (node, cdf, density).
  double hermite_inverse(double u) const {
    if (u <= cdf_at.front()) return nodes.front();
    if (u >= cdf_at.back()) return nodes.back();
    const auto it = std::upper_bound(cdf_at.begin(), cdf_at.end(), u);
    const std::size_t k = std::min(static_cast<std::size_t>(it - cdf_at.begin()) - 1, nodes.size() - 2);
    const double h = nodes[k + 1] - nodes[k];
    const double f0 = cdf_at[k], f1 = cdf_at[k + 1], d0 = dens_at[k] * h, d1 = dens_at[k + 1] * h;
    double lo = 0.0, hi = 1.0, s = (f1 > f0) ? std::clamp((u - f0) / (f1 - f0), 0.0, 1.0) : 0.5;
    for (int iter = 0; iter < 60; ++iter) {
      const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
      const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
      const double g = h00 * f0 + h10 * d0 + h01 * f1 + h11 * d1 - u;
      if (g > 0.0) hi = s;
      else lo = s;
      const double slope = (6 * s * s - 6 * s) * (f0 - f1) + (3 * s * s - 4 * s + 1) * d0 + (3 * s * s - 2 * s) * d1;
      double next = slope > 0.0 ? s - g / slope : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - s) < 1e-15) break;
      s = next;
    }
    return nodes[k] + s * h;
  }
};

constexpr std::size_t kZeroBiasCells = 1 << 14;

DistributionHandle continuous_zero_bias(const SummandSpec& x) {
  const DistributionHandle& law = x.law;
  auto t = std::make_shared<ContinuousZeroBias>();
  t->p = law.density;
  t->sigma2 = x.sigma2;
  double lo = std::max(law.support.lo, law.quantile(1e-16));
  double hi = std::min(law.support.hi, law.quantile(1.0 - 1e-16));
  if (!std::isfinite(lo)) lo = law.support.lo;
  if (!std::isfinite(hi)) hi = law.support.hi;
  if (!(std::isfinite(lo) && std::isfinite(hi) && hi > lo))
    throw PreconditionError("zero_bias_distribution: cannot bound the support of " + law.label);
  auto& nodes = t->nodes;
  for (std::size_t i = 0; i <= kZeroBiasCells; ++i)
    nodes.push_back(lo + (hi - lo) * static_cast<double>(i) / kZeroBiasCells);
  nodes.back() = hi;
  for (double s : law.singular_points)
    if (s > lo && s < hi) nodes.push_back(s);
  if (lo < 0.0 && hi > 0.0) nodes.push_back(0.0);
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  const std::size_t n = nodes.size();
  const auto tail = [&](int k, double a, double b) {
    if (a == b) return detail::QuadResult{};
    return detail::integrate([&](double v) { return (k == 1 ? v : v * v) * t->p(v); }, a, b, 1e-14, 12);
  };
  std::vector<double> cell1(n - 1), cell2(n - 1);
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto r1 = detail::integrate_absolute([&](double v) { return v * t->p(v); }, nodes[i], nodes[i + 1], 1e-17);
    const auto r2 =
        detail::integrate_absolute([&](double v) { return v * v * t->p(v); }, nodes[i], nodes[i + 1], 1e-17);
    cell1[i] = r1.value;
    cell2[i] = r2.value;
    err += r1.error + r2.error;
  }
  const auto left1 = tail(1, law.support.lo, lo), left2 = tail(2, law.support.lo, lo);
  const auto right1 = tail(1, hi, law.support.hi), right2 = tail(2, hi, law.support.hi);
  err += left1.error + left2.error + right1.error + right2.error;
  t->below1.assign(n, 0.0);
  t->below2.assign(n, 0.0);
  t->above1.assign(n, 0.0);
  t->above2.assign(n, 0.0);
  t->below1[0] = left1.value;
  t->below2[0] = left2.value;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    t->below1[i + 1] = t->below1[i] + cell1[i];
    t->below2[i + 1] = t->below2[i] + cell2[i];
  }
  t->above1[n - 1] = right1.value;
  t->above2[n - 1] = right2.value;
  for (std::size_t i = n - 1; i-- > 0;) {
    t->above1[i] = t->above1[i + 1] + cell1[i];
    t->above2[i] = t->above2[i + 1] + cell2[i];
  }
  const double mean = t->below1.back() + right1.value;
  const double second = t->below2.back() + right2.value;
  require_mean_zero(mean, second, law.label);
  if (std::abs(second - x.sigma2) > 1e-8 * second)
    throw PreconditionError("zero_bias_distribution: sigma2 does not match the law");
  t->error = err / x.sigma2 + 1e-15;

  // Node values use the prefix tables directly.
  t->cdf_at.resize(n);
  t->dens_at.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = nodes[i];
    const double a = v <= 0.0 ? -t->below1[i] : t->above1[i];
    t->dens_at[i] = std::max(0.0, a) / x.sigma2;
    const double c = v <= 0.0 ? (t->below2[i] + v * a) / x.sigma2 : 1.0 - (t->above2[i] - v * a) / x.sigma2;
    t->cdf_at[i] = std::clamp(c, 0.0, 1.0);
  }
  for (std::size_t i = 1; i < n; ++i) t->cdf_at[i] = std::max(t->cdf_at[i], t->cdf_at[i - 1]);

  std::shared_ptr<const ContinuousZeroBias> table = t;
  DistributionHandle d;
  d.label = "zero_bias(" + law.label + ")";
  d.support = law.support;
  d.cdf = [table](double v) { return table->cdf(v); };
  d.density = [table](double v) { return table->density(v); };
  d.quantile = [table, support = law.support](double u) {
    if (u <= 0.0) return support.lo;
    if (u >= 1.0) return support.hi;
    double v = table->hermite_inverse(u);
    for (int k = 0; k < 2; ++k) {
      const double dens = table->density(v);
      if (!(dens > 0.0)) break;
      v -= (table->cdf(v) - u) / dens;
    }
    return v;
  };
  // Mass outside the tabulated window (below 1e-14) is not sampled.
  d.sampler = [table](Rng& rng) { return table->hermite_inverse(uniform01(rng)); };
  d.cdf_error = t->error;
  d.density_error = t->error;
  return d;
}

std::vector<double> draw_w(const IndependentSumModel& model, std::size_t n, std::uint64_t seed) {
  std::vector<double> out(n);
  for_each_chunk(n, seed, kStreamW, [&](std::size_t, std::size_t b, std::size_t e, Rng& rng) {
    for (std::size_t i = b; i < e; ++i) {
      double w = 0.0;
      for (const auto& s : model.summands) w += s.law.sampler(rng);
      out[i] = w;
    }
  });
  return out;
}

// Integral of min(eps, 1/(1+x^2)) over (-inf, m]: Cantelli's bound for a
// unit-variance law combined with the DKW band.
double cantelli_tail(double m, double eps) {
  if (eps >= 1.0) return kInf;
  const double xc = -std::sqrt(1.0 / eps - 1.0);
  if (m <= xc) return std::atan(m) + 0.5 * std::numbers::pi;
  return std::atan(xc) + 0.5 * std::numbers::pi + eps * (m - xc);
}

IndependentSumModel assemble(std::vector<SummandSpec> summands, std::vector<DistributionHandle> zero_bias) {
  IndependentSumModel model;
  double total = 0.0;
  for (const auto& s : summands) {
    total += s.sigma2;
    model.cumulative_sigma2.push_back(total);
  }
  if (std::abs(total - 1.0) > kNormalizationTolerance)
    throw PreconditionError("independent sum: variances must sum to one");
  model.cumulative_sigma2.back() = 1.0;
  model.summands = std::move(summands);
  model.zero_bias = std::move(zero_bias);
  return model;
}

}  // namespace

SummandSpec make_summand(const DistributionHandle& law) {
  const Moments m = moments(law);
  if (!(m.second > 0.0) || !std::isfinite(m.third)) throw PreconditionError(law.label + ": degenerate summand");
  require_mean_zero(m.mean, m.second, law.label);
  return {law, m.second, m.third, true};
}

SummandCheck check_summand(const SummandSpec& x, std::uint64_t seed, std::size_t draws) {
  if (draws < 2) throw PreconditionError("check_summand: need at least two draws");
  std::vector<std::array<RunningStats, 3>> parts(chunk_count(draws));
  for_each_chunk(draws, seed, kStreamSummand, [&](std::size_t c, std::size_t b, std::size_t e, Rng& rng) {
    for (std::size_t i = b; i < e; ++i) {
      const double v = x.law.sampler(rng);
      parts[c][0].add(v);
      parts[c][1].add(v * v);
      parts[c][2].add(std::abs(v) * v * v);
    }
  });
  std::array<RunningStats, 3> s;
  for (const auto& p : parts)
    for (int k = 0; k < 3; ++k) s[k].merge(p[k]);
  SummandCheck r;
  r.mean = s[0].mean;
  r.mean_se = std::sqrt(x.sigma2 / static_cast<double>(draws));
  r.sigma2 = s[1].mean;
  r.sigma2_se = s[1].std_error();
  r.gamma = s[2].mean;
  r.gamma_se = s[2].std_error();
  r.pass = std::abs(r.mean) <= 4.0 * r.mean_se && std::abs(r.sigma2 - x.sigma2) <= 4.0 * r.sigma2_se + 1e-12 &&
           std::abs(r.gamma - x.gamma) <= 4.0 * r.gamma_se + 1e-12;
  return r;
}

double IndependentSumModel::sum_gamma() const {
  double g = 0.0;
  for (const auto& s : summands) g += s.gamma;
  return g;
}

IndependentSumModel make_independent_sum(std::vector<SummandSpec> summands) {
  if (summands.empty()) throw PreconditionError("independent sum: no summands");
  std::vector<DistributionHandle> zb;
  zb.reserve(summands.size());
  for (const auto& s : summands) zb.push_back(zero_bias_distribution(s));
  return assemble(std::move(summands), std::move(zb));
}

IndependentSumModel iid_model(const DistributionHandle& unit_law, int n) {
  if (n < 1) throw PreconditionError("iid_model: n must be positive");
  const SummandSpec unit = make_summand(unit_law);
  if (std::abs(unit.sigma2 - 1.0) > kNormalizationTolerance)
    throw PreconditionError("iid_model: unit law must have variance one");
  const double c = 1.0 / std::sqrt(static_cast<double>(n));
  SummandSpec s{distances::scaled(unit_law, c), 1.0 / n, unit.gamma * c * c * c, true};
  const DistributionHandle zb = zero_bias_distribution(s);
  return assemble(std::vector<SummandSpec>(static_cast<std::size_t>(n), s),
                  std::vector<DistributionHandle>(static_cast<std::size_t>(n), zb));
}

ExchangeablePairModel make_exchangeable_pair(IndependentSumModel base) {
  const double lambda = 1.0 / static_cast<double>(base.size());
  return {std::move(base), lambda};
}

DistributionHandle zero_bias_distribution(const SummandSpec& x) {
  if (!x.mean_zero) throw PreconditionError("zero_bias_distribution: summand is not mean-zero");
  if (!(x.sigma2 > 0.0) || !std::isfinite(x.gamma)) throw PreconditionError("zero_bias_distribution: bad moments");
  if (x.law.is_atomic()) {
    double mean = 0.0, second = 0.0;
    for (const Atom& a : *x.law.atoms) {
      mean += a.location * a.mass;
      second += a.location * a.location * a.mass;
    }
    require_mean_zero(mean, second, x.law.label);
    return atomic_zero_bias(x);
  }
  if (!x.law.has_density()) throw PreconditionError(x.law.label + ": summand law needs atoms or a density");
  return continuous_zero_bias(x);
}

CoupledDraw zero_bias_coupling_sample(const IndependentSumModel& model, Rng& rng) {
  const double u = uniform01(rng);
  const auto& cum = model.cumulative_sigma2;
  const std::size_t i =
      std::min(static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()), cum.size() - 1);
  double w = 0.0, xi = 0.0;
  for (std::size_t j = 0; j < model.size(); ++j) {
    const double v = model.summands[j].law.sampler(rng);
    w += v;
    if (j == i) xi = v;
  }
  const double star = model.zero_bias[i].sampler(rng);
  return {w, w - xi + star};
}

MeanGapReport mean_gap(const IndependentSumModel& model, std::size_t n, std::uint64_t seed) {
  const RunningStats s = mc_mean(n, seed, kStreamGap, [&](Rng& rng) {
    const auto d = zero_bias_coupling_sample(model, rng);
    return std::abs(d.w_star - d.w);
  });
  MeanGapReport r;
  r.estimate = s.mean;
  r.se = s.std_error();
  r.cap = 1.5 * model.sum_gamma();
  r.pass = r.estimate <= r.cap + 4.0 * r.se;
  r.n = n;
  return r;
}

std::optional<DistributionHandle> exact_sum_law(const IndependentSumModel& model, std::size_t max_support) {
  for (const auto& s : model.summands)
    if (!s.law.is_atomic()) return std::nullopt;
  std::vector<Atom> current{{0.0, 1.0}};
  double scale = 0.0;
  for (const auto& s : model.summands) {
    const auto& atoms = *s.law.atoms;
    double reach = 0.0;
    for (const Atom& a : atoms) reach = std::max(reach, std::abs(a.location));
    scale += reach;
    if (current.size() * atoms.size() > 64 * max_support) return std::nullopt;
    std::vector<Atom> next;
    next.reserve(current.size() * atoms.size());
    for (const Atom& c : current)
      for (const Atom& a : atoms) next.push_back({c.location + a.location, c.mass * a.mass});
    std::sort(next.begin(), next.end(), [](const Atom& p, const Atom& q) { return p.location < q.location; });
    // Sums that differ only by rounding are one atom.
    const double tol = 1e-12 * std::max(1.0, scale);
    current.clear();
    for (const Atom& a : next) {
      if (!current.empty() && a.location - current.back().location <= tol)
        current.back().mass += a.mass;
      else
        current.push_back(a);
    }
    if (current.size() > max_support) return std::nullopt;
  }
  double total = 0.0;
  for (const Atom& a : current) total += a.mass;
  for (Atom& a : current) a.mass /= total;
  return distances::discrete(std::move(current), "sum of " + std::to_string(model.size()) + " atomic summands");
}

WassersteinZeroBiasReport wasserstein_zero_bias_check(const IndependentSumModel& model, std::size_t n,
                                                      std::uint64_t seed) {
  WassersteinZeroBiasReport r;
  r.gap = mean_gap(model, n, seed);
  double value = 0.0, tol = 0.0;
  bool exact = false;
  if (const auto law = exact_sum_law(model)) {
    const auto d = distances::wasserstein_distance(*law, distances::standard_normal());
    value = d.value;
    tol = d.error_bound;
    exact = true;
  } else {
    auto ws = draw_w(model, n, seed);
    value = distances::empirical_wasserstein(ws, distances::standard_normal());
    const auto [mn, mx] = std::minmax_element(ws.begin(), ws.end());
    const double eps = distances::dkw_epsilon(n, kEmpiricalDelta);
    tol = eps * (*mx - *mn) + cantelli_tail(*mn, eps) + cantelli_tail(-*mx, eps);
  }
  r.versus_mean_gap = {value, tol, exact, 2.0 * (r.gap.estimate + 4.0 * r.gap.se), false};
  r.versus_gamma = {value, tol, exact, 3.0 * model.sum_gamma(), false};
  for (CapCheck* c : {&r.versus_mean_gap, &r.versus_gamma}) c->pass = c->value <= c->cap + c->tolerance;
  return r;
}

CapCheck berry_esseen_report(const IndependentSumModel& model, std::size_t n, std::uint64_t seed) {
  CapCheck c;
  c.cap = 7.1 * model.sum_gamma();
  if (const auto law = exact_sum_law(model)) {
    const auto d = distances::kolmogorov_distance(*law, distances::standard_normal());
    c.value = d.value;
    c.tolerance = d.error_bound;
    c.exact = true;
  } else {
    const auto ws = draw_w(model, n, seed);
    const auto d = distances::empirical_kolmogorov(ws, distances::standard_normal(), kEmpiricalDelta);
    c.value = d.value;
    c.tolerance = d.error_bound;
  }
  c.pass = c.value <= c.cap + c.tolerance;
  return c;
}

ConcentrationReport concentration_check(const IndependentSumModel& model, std::size_t i, double a, double b,
                                        std::size_t n, std::uint64_t seed) {
  if (i >= model.size()) throw PreconditionError("concentration_check: summand index out of range");
  if (!(a <= b)) throw PreconditionError("concentration_check: need a <= b");
  const RunningStats s = mc_mean(n, seed, kStreamConcentration, [&](Rng& rng) {
    double w = 0.0;
    for (std::size_t j = 0; j < model.size(); ++j) {
      const double v = model.summands[j].law.sampler(rng);
      if (j != i) w += v;
    }
    return (a <= w && w <= b) ? 1.0 : 0.0;
  });
  ConcentrationReport r;
  r.estimate = s.mean;
  r.se = s.std_error();
  r.cap = 2.0 * std::numbers::sqrt2 / 3.0 * (b - a) + 4.0 * (std::numbers::sqrt2 + 1.0) / 3.0 * model.sum_gamma();
  r.vacuous = r.cap >= 1.0;
  r.pass = r.estimate <= r.cap + 4.0 * r.se;
  return r;
}

PairDraw exchangeable_pair_sample(const ExchangeablePairModel& model, Rng& rng) {
  const std::size_t n = model.base.size();
  const std::size_t i = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  double w = 0.0, xi = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = model.base.summands[j].law.sampler(rng);
    w += v;
    if (j == i) xi = v;
  }
  const double fresh = model.base.summands[i].law.sampler(rng);
  const double wp = w - xi + fresh;
  return {w, wp, (wp - w) * (wp - w) / (2.0 * model.lambda)};
}

bool PairStatistics::pass() const {
  return std::abs(slope - expected_slope) <= 4.0 * slope_se && std::abs(mean_t1 - 1.0) <= 4.0 * t1_se &&
         std::abs(antisymmetry) <= 4.0 * antisymmetry_se;
}

PairStatistics pair_statistics(const ExchangeablePairModel& model, std::size_t n, std::uint64_t seed, int bins) {
  if (n < 2) throw PreconditionError("pair_statistics: need at least two draws");
  std::vector<PairDraw> d(n);
  for_each_chunk(n, seed, kStreamPairs, [&](std::size_t, std::size_t b, std::size_t e, Rng& rng) {
    for (std::size_t i = b; i < e; ++i) d[i] = exchangeable_pair_sample(model, rng);
  });
  PairStatistics s;
  s.n = n;
  s.expected_slope = -model.lambda;
  double sww = 0.0, swd = 0.0;
  for (const auto& p : d) {
    sww += p.w * p.w;
    swd += p.w * (p.w_prime - p.w);
  }
  if (sww == 0.0) throw PreconditionError("pair_statistics: W is identically zero");
  s.slope = swd / sww;
  double rss = 0.0;
  RunningStats t1, anti;
  for (const auto& p : d) {
    rss += std::pow(p.w_prime - p.w - s.slope * p.w, 2);
    t1.add(p.t1);
    anti.add((p.w_prime - p.w) * (std::pow(p.w_prime, 3) + std::pow(p.w, 3)));
  }
  s.slope_se = std::sqrt(rss / static_cast<double>(n - 1) / sww);
  s.mean_t1 = t1.mean;
  s.t1_se = t1.std_error();
  s.antisymmetry = anti.mean;
  s.antisymmetry_se = anti.std_error();
  std::vector<std::pair<double, double>> wt(n);
  for (std::size_t i = 0; i < n; ++i) wt[i] = {d[i].w, d[i].t1};
  s.tv = stein::tv_bound_from_T1(wt, bins);
  return s;
}

}  // namespace chaos_stein::couplings
