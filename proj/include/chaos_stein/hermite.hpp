#pragma once

#include <functional>
#include <vector>

namespace chaos_stein::hermite {

/// Largest degree accepted by hermite_eval.
inline constexpr int kMaxDegree = 64;

/// Probabilists' Hermite polynomial He_k(x) by the three-term recurrence.
/// Throws CapabilityError for k > kMaxDegree.
double hermite_eval(int k, double x);

/// He_0(x) ... He_max_k(x) in one pass.
std::vector<double> hermite_all(int max_k, double x);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// m-point Gauss rule for the standard normal weight (Golub-Welsch on the
/// Jacobi matrix). Nodes ascending, weights sum to one. Requires 2 <= m <= 256.
QuadratureRule gauss_hermite_rule(int m);

/// Truncated expansion phi = sum a_q He_q in L2 of the standard Gaussian.
struct CoefficientSeries {
  std::vector<double> coeffs;  // a_0 .. a_Q
  int truncation_order = 0;
  double tail_bound = 0.0;  // L2 mass not captured by a_0..a_Q

  double operator()(double x) const;
  /// sum q! a_q^2 over the retained terms.
  double captured_norm2() const;
};

inline constexpr double kCoefficientCutoff = 1e-12;
inline constexpr double kRankTolerance = 1e-10;
inline constexpr int kDefaultQuadraturePoints = 160;

/// a_q = E[phi(Z) He_q(Z)] / q! by Gauss-Hermite quadrature. Coefficients
/// below tol in magnitude are set to zero.
CoefficientSeries chaos_coefficients(const std::function<double(double)>& phi, int max_order,
                                     double tol = kCoefficientCutoff,
                                     int quadrature_points = kDefaultQuadraturePoints);

/// Smallest q with |a_q| > tol.
int hermite_rank(const CoefficientSeries& series, double tol = kRankTolerance);

/// Series whose only non-zero coefficient is a_q = 1.
CoefficientSeries pure_hermite(int q);

double factorial(int k);

}  // namespace chaos_stein::hermite
