#pragma once

// Internal adaptive quadrature wrappers shared by the numerical modules.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

namespace chaos_stein::detail {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

// Finite intervals are mapped onto [-1, 1] here: the library's recursion
// compares an unscaled error estimate against a scaled tolerance, which on
// short intervals never terminates.

/// Adaptive 61-point Gauss-Kronrod; a or b may be infinite.
template <class F>
QuadResult integrate(F&& f, double a, double b, double tol = 1e-12, unsigned depth = 18) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  QuadResult r;
  if (a == b) return r;
  double l1 = 0.0;
  if (std::isfinite(a) && std::isfinite(b)) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const auto g = [&](double x) { return f(mid + half * x); };
    r.value = half * Rule::integrate(g, -1.0, 1.0, depth, tol, &r.error, &l1);
    r.error *= std::abs(half);
    return r;
  }
  r.value = Rule::integrate(f, a, b, depth, tol, &r.error, &l1);
  return r;
}

/// Bisection on fixed 61-point Gauss-Kronrod panels until each panel's
/// error estimate is below its share of abs_tol. a and b must be finite.
template <class F>
QuadResult integrate_absolute(F&& f, double a, double b, double abs_tol, unsigned depth = 12) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
  if (a == b) return {};
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  const auto g = [&](double x) { return f(mid + half * x); };
  double err = 0.0;
  const double v = half * Rule::integrate(g, -1.0, 1.0, 0, 0.0, &err);
  err *= std::abs(half);
  if (err <= abs_tol || depth == 0 || !std::isfinite(v)) return {v, err};
  const QuadResult left = integrate_absolute(f, a, mid, 0.5 * abs_tol, depth - 1);
  const QuadResult right = integrate_absolute(f, mid, b, 0.5 * abs_tol, depth - 1);
  return {left.value + right.value, left.error + right.error};
}

/// Double-exponential rule for panels with an endpoint singularity.
template <class F>
QuadResult integrate_endpoint_singular(F&& f, double a, double b, double tol = 1e-12) {
  QuadResult r;
  if (a == b) return r;
  static thread_local boost::math::quadrature::tanh_sinh<double> rule(12);
  double l1 = 0.0;
  r.value = rule.integrate(f, a, b, tol, &r.error, &l1);
  return r;
}

}  // namespace chaos_stein::detail
