#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chaos_stein/chaos.hpp"
#include "chaos_stein/rng.hpp"

namespace chaos_stein::malliavin {

using chaos::ChaosVector;
using chaos::SymmetricKernel;

/// components[j - 1] is D_j F.
struct GradientVector {
  std::vector<ChaosVector> components;
};

/// D_j F = sum_k k I_{k-1}(f_k(., j)).
GradientVector derivative(const ChaosVector& f);

/// L F: the order-k kernel times -k; the constant is dropped.
ChaosVector ou_generator(const ChaosVector& f);
/// L^{-1} F: the order-k kernel times -1/k; the constant is dropped.
ChaosVector ou_pseudo_inverse(const ChaosVector& f);

/// T = sum_j D_j F (-D_j L^{-1} F), exact in the chaos algebra.
ChaosVector gamma_T(const ChaosVector& f);

/// E F^2 - (E F)^2.
double variance(const ChaosVector& f);

struct BoundReport {
  double quantity = 0.0;
  double cap = 0.0;
  double slack = 0.0;  // cap - quantity, never clipped
  double quantity_error = 0.0;
  std::string method;
};

struct EqualityReport {
  double lhs = 0.0;
  double rhs = 0.0;
  double discrepancy = 0.0;
  bool pass = false;  // discrepancy <= kEqualityTolerance * max(1, |lhs|)
};

inline constexpr double kEqualityTolerance = 1e-9;

/// E[(L F) G] against -sum_j E[D_j F D_j G].
EqualityReport integration_by_parts_check(const ChaosVector& f, const ChaosVector& g);

/// E[(F - E F) p(F)] against E[p'(F) T] for p(x) = sum_i coeffs[i] x^i.
EqualityReport stein_identity_check(const ChaosVector& f, const std::vector<double>& coeffs);

/// Var T for F = I_k(f) from the contraction norms ||f (x)~_r f||^2.
double variance_T_formula(const SymmetricKernel& f);

/// E F^4 for F = I_k(f) from the contraction norms.
double fourth_moment_identity(const SymmetricKernel& f);

struct FourthMomentReport {
  int order = 0;
  double fourth_moment = 0.0;
  BoundReport tv;          // d_TV (k <= 2) or an empirical d_K lower bound (k >= 3) against the cap
  double var_T = 0.0;      // variance_T_formula
  double var_T_cap = 0.0;  // (k - 1)/(3k) (E F^4 - 3)
  bool var_inequality = false;
};

/// Requires k! ||f||^2 = 1 within 1e-9. For k >= 3 the d_K lower bound uses
/// n draws of F at level 1e-3. Throws ConsistencyError when E F^4 < 3.
FourthMomentReport fourth_moment_tv_bound(const SymmetricKernel& f, std::size_t n = 200000,
                                          std::uint64_t seed = kDefaultSeed);

struct GammaTvReport {
  double mean_T = 0.0;
  double var_T = 0.0;
  double conservative_cap = 0.0;  // 2 sqrt(Var T)
  // Binned estimates from n draws of (F, T).
  double bound_mean = 0.0;  // 2 E|1 - E[T|F]|
  double bound_var = 0.0;   // 2 sqrt(Var E[T|F])
  double se_mean = 0.0;
  double se_var = 0.0;
  bool ordering = false;  // bound_var <= conservative_cap + 4 se_var
};

GammaTvReport tv_bound_from_gamma(const ChaosVector& f, std::size_t n, std::uint64_t seed, int bins = 50);

/// max(E F^4 - 3, |E F^3|) for F = I_k(f); meant for E F^2 = 1.
double m_statistic(const SymmetricKernel& f);

}  // namespace chaos_stein::malliavin
