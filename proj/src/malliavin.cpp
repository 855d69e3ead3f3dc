#include "chaos_stein/malliavin.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "chaos_stein/distances.hpp"
#include "chaos_stein/error.hpp"
#include "chaos_stein/hermite.hpp"
#include "chaos_stein/stein.hpp"

namespace chaos_stein::malliavin {

using chaos::MultiIndex;

namespace {

constexpr std::uint64_t kStreamFourthMoment = 0x4A11;
constexpr std::uint64_t kStreamGammaTv = 0x4A12;

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

// Horner evaluation of sum coeffs[i] x^i in the chaos algebra.
ChaosVector polynomial_of(const ChaosVector& f, const std::vector<double>& coeffs) {
  ChaosVector acc = chaos::constant_vector(coeffs.empty() ? 0.0 : coeffs.back(), f.basis_dim);
  for (std::size_t i = coeffs.size(); i-- > 1;)
    acc = chaos::multiply(acc, f) + chaos::constant_vector(coeffs[i - 1], f.basis_dim);
  return acc;
}

EqualityReport compare(double lhs, double rhs) {
  EqualityReport r{lhs, rhs, std::abs(lhs - rhs), false};
  r.pass = r.discrepancy <= kEqualityTolerance * std::max(1.0, std::abs(lhs));
  return r;
}

// sum_{r=1}^{k-1} weight(r) ||f (x)~_r f||^2.
template <class Weight>
double contraction_sum(const SymmetricKernel& f, Weight weight) {
  double s = 0.0;
  for (int r = 1; r < f.order; ++r) s += weight(r) * chaos::symmetrize(chaos::contract(f, f, r)).norm_squared();
  return s;
}

std::vector<double> sample_values(const ChaosVector& f, std::size_t n, std::uint64_t seed, std::uint64_t stream,
                                  const ChaosVector* second, std::vector<double>* second_out) {
  std::vector<double> out(n);
  if (second_out) second_out->resize(n);
  for_each_chunk(n, seed, stream, [&](std::size_t, std::size_t b, std::size_t e, Rng& rng) {
    std::normal_distribution<double> n01;
    std::vector<double> z(static_cast<std::size_t>(f.basis_dim));
    for (std::size_t i = b; i < e; ++i) {
      for (double& v : z) v = n01(rng);
      out[i] = chaos::evaluate(f, z);
      if (second) (*second_out)[i] = chaos::evaluate(*second, z);
    }
  });
  return out;
}

}  // namespace

GradientVector derivative(const ChaosVector& f) {
  GradientVector g;
  g.components.assign(static_cast<std::size_t>(f.basis_dim), chaos::constant_vector(0.0, f.basis_dim));
  for (const auto& [k, kernel] : f.kernels) {
    // f_k(., j) at beta is f_k at beta + {j}; each (alpha, j in alpha) gives one beta.
    std::vector<SymmetricKernel> slices(static_cast<std::size_t>(f.basis_dim),
                                        chaos::make_kernel(k - 1, f.basis_dim));
    for (const auto& [alpha, v] : kernel.coeffs) {
      for (std::size_t i = 0; i < alpha.size(); ++i) {
        if (i > 0 && alpha[i] == alpha[i - 1]) continue;
        MultiIndex beta = alpha;
        beta.erase(beta.begin() + static_cast<std::ptrdiff_t>(i));
        slices[alpha[i] - 1].coeffs[beta] = k * v;
      }
    }
    for (int j = 0; j < f.basis_dim; ++j) {
      if (slices[j].coeffs.empty()) continue;
      auto& comp = g.components[j];
      if (k == 1) comp.constant += slices[j].coeffs.begin()->second;
      else comp = comp + chaos::integral(slices[j]);
    }
  }
  return g;
}

ChaosVector ou_generator(const ChaosVector& f) {
  ChaosVector out = chaos::constant_vector(0.0, f.basis_dim);
  for (const auto& [k, kernel] : f.kernels) out.kernels.emplace(k, chaos::scaled(kernel, -static_cast<double>(k)));
  return out;
}

ChaosVector ou_pseudo_inverse(const ChaosVector& f) {
  ChaosVector out = chaos::constant_vector(0.0, f.basis_dim);
  for (const auto& [k, kernel] : f.kernels) out.kernels.emplace(k, chaos::scaled(kernel, -1.0 / k));
  return out;
}

ChaosVector gamma_T(const ChaosVector& f) {
  const GradientVector df = derivative(f);
  const GradientVector dl = derivative(ou_pseudo_inverse(f));
  ChaosVector t = chaos::constant_vector(0.0, f.basis_dim);
  for (std::size_t j = 0; j < df.components.size(); ++j)
    t = t - chaos::multiply(df.components[j], dl.components[j]);
  return t;
}

double variance(const ChaosVector& f) { return chaos::chaos_inner(f, f) - f.constant * f.constant; }

EqualityReport integration_by_parts_check(const ChaosVector& f, const ChaosVector& g) {
  const double lhs = chaos::chaos_inner(ou_generator(f), g);
  const GradientVector df = derivative(f), dg = derivative(g);
  double rhs = 0.0;
  for (std::size_t j = 0; j < df.components.size(); ++j)
    rhs -= chaos::chaos_inner(df.components[j], dg.components[j]);
  return compare(lhs, rhs);
}

EqualityReport stein_identity_check(const ChaosVector& f, const std::vector<double>& coeffs) {
  std::vector<double> deriv;
  for (std::size_t i = 1; i < coeffs.size(); ++i) deriv.push_back(static_cast<double>(i) * coeffs[i]);
  ChaosVector centered = f;
  centered.constant = 0.0;
  const double lhs = chaos::chaos_inner(centered, polynomial_of(f, coeffs));
  const double rhs = chaos::chaos_inner(polynomial_of(f, deriv), gamma_T(f));
  return compare(lhs, rhs);
}

double variance_T_formula(const SymmetricKernel& f) {
  const int k = f.order;
  return contraction_sum(f, [k](int r) {
    const double rf = hermite::factorial(r);
    return static_cast<double>(r * r) / (k * k) * rf * rf * std::pow(binomial(k, r), 4) *
           hermite::factorial(2 * k - 2 * r);
  });
}

double fourth_moment_identity(const SymmetricKernel& f) {
  const int k = f.order;
  const double second = hermite::factorial(k) * f.norm_squared();
  return 3.0 * second * second + 3.0 / k * contraction_sum(f, [k](int r) {
           const double rf = hermite::factorial(r);
           return r * rf * rf * std::pow(binomial(k, r), 4) * hermite::factorial(2 * k - 2 * r);
         });
}

FourthMomentReport fourth_moment_tv_bound(const SymmetricKernel& f, std::size_t n, std::uint64_t seed) {
  const int k = f.order;
  if (k < 1) throw PreconditionError("fourth_moment_tv_bound: order must be positive");
  const double second = hermite::factorial(k) * f.norm_squared();
  if (std::abs(second - 1.0) > 1e-9) throw PreconditionError("fourth_moment_tv_bound: E F^2 must be 1");
  FourthMomentReport r;
  r.order = k;
  r.fourth_moment = fourth_moment_identity(f);
  const double excess = r.fourth_moment - 3.0;
  if (excess < -1e-12) throw ConsistencyError("fourth_moment_tv_bound: E F^4 < 3 for a chaos element");
  r.var_T = variance_T_formula(f);
  r.var_T_cap = (k - 1.0) / (3.0 * k) * std::max(0.0, excess);
  r.var_inequality = r.var_T <= r.var_T_cap * (1.0 + 1e-12) + 1e-15;
  r.tv.cap = 2.0 * std::sqrt((k - 1.0) / (3.0 * k)) * std::sqrt(std::max(0.0, excess));

  if (k == 1) {
    r.tv.quantity = 0.0;
    r.tv.method = "first chaos: exactly normal";
  } else if (k == 2) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(chaos::kernel_to_matrix(f), Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    std::vector<double> lambdas;
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      if (std::abs(ev(i)) > 1e-12 * scale) lambdas.push_back(ev(i));
    const auto law = distances::second_chaos_distribution(lambdas);
    const auto d = distances::total_variation_density(law, distances::standard_normal());
    r.tv.quantity = d.value;
    r.tv.quantity_error = d.error_bound;
    r.tv.method = "second chaos d_TV by inversion";
  } else {
    const auto xs = sample_values(chaos::integral(f), n, seed, kStreamFourthMoment, nullptr, nullptr);
    const auto d = distances::empirical_kolmogorov(xs, distances::standard_normal(), 1e-3);
    r.tv.quantity = std::max(0.0, d.value - d.error_bound);
    r.tv.quantity_error = d.error_bound;
    r.tv.method = "empirical d_K lower bound";
  }
  r.tv.slack = r.tv.cap - r.tv.quantity;
  return r;
}

GammaTvReport tv_bound_from_gamma(const ChaosVector& f, std::size_t n, std::uint64_t seed, int bins) {
  const ChaosVector t = gamma_T(f);
  GammaTvReport r;
  r.mean_T = t.constant;
  r.var_T = std::max(0.0, variance(t));
  r.conservative_cap = 2.0 * std::sqrt(r.var_T);
  std::vector<double> ts;
  const auto fs = sample_values(f, n, seed, kStreamGammaTv, &t, &ts);
  std::vector<std::pair<double, double>> pairs(n);
  for (std::size_t i = 0; i < n; ++i) pairs[i] = {fs[i], ts[i]};
  const auto b = stein::tv_bound_from_T1(pairs, bins);
  r.bound_mean = b.bound_mean;
  r.bound_var = b.bound_var;
  r.se_mean = b.se_mean;
  r.se_var = b.se_var;
  r.ordering = r.bound_var <= r.conservative_cap + 4.0 * r.se_var;
  return r;
}

double m_statistic(const SymmetricKernel& f) {
  return std::max(fourth_moment_identity(f) - 3.0, std::abs(chaos::moment(chaos::integral(f), 3)));
}

}  // namespace chaos_stein::malliavin
