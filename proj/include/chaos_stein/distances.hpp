#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaos_stein/rng.hpp"

namespace chaos_stein::distances {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lo = -kInf;
  double hi = kInf;
};

struct Atom {
  double location;
  double mass;
};

/// One-dimensional law. Immutable after construction; samplers draw from a
/// caller-owned engine so a handle may be shared across threads.
struct DistributionHandle {
  std::string label;
  std::function<double(double)> cdf;
  std::function<double(double)> quantile;
  std::function<double(double)> density;  // empty when the law has no density
  std::function<double(Rng&)> sampler;
  Interval support;
  std::optional<std::vector<Atom>> atoms;  // sorted by location
  // Points where the density is non-smooth or unbounded.
  std::vector<double> singular_points;
  // Optional closed forms of int_{-inf}^x F(t) dt and int_x^inf (1 - F(t)) dt.
  std::function<double(double)> lower_tail_integral;
  std::function<double(double)> upper_tail_integral;
  // Numerical accuracy of cdf and density (sup-norm); zero for closed forms.
  double cdf_error = 0.0;
  double density_error = 0.0;
  // Bound on the integrated density error; negative when only the sup-norm is known.
  double density_error_l1 = -1.0;

  bool has_density() const { return static_cast<bool>(density); }
  /// True when the atoms carry all of the mass.
  bool is_atomic() const;
};

DistributionHandle normal(double mean = 0.0, double sd = 1.0);
inline DistributionHandle standard_normal() { return normal(0.0, 1.0); }
DistributionHandle uniform(double a, double b);
/// Atoms at equal locations are merged; masses must sum to one.
DistributionHandle discrete(std::vector<Atom> atoms, std::string label = "discrete");
DistributionHandle point_mass(double x);
/// +-scale with probability 1/2 each.
DistributionHandle rademacher(double scale = 1.0);
/// (Binomial(n, p) - np) / sqrt(np(1-p)).
DistributionHandle standardized_binomial(int n, double p);
/// Law of c X for c > 0.
DistributionHandle scaled(const DistributionHandle& d, double c);

enum class Metric { kolmogorov, wasserstein, total_variation };
enum class Method { exact_jumps, grid_bracket, quantile_integral, density_integral, empirical_dkw };

struct DistanceReport {
  Metric metric;
  double value = 0.0;
  double error_bound = 0.0;
  Method method;
};

std::string to_string(Metric m);
std::string to_string(Method m);

/// sup_x |F_A(x) - F_B(x)|. Exact over jump points when one side is purely
/// atomic and the other has no atoms (or both are atomic); otherwise a
/// bracketing grid whose error_bound is always reported as non-zero.
DistanceReport kolmogorov_distance(const DistributionHandle& a, const DistributionHandle& b);

struct GridOptions {
  double tolerance = 1e-7;
  std::size_t max_points = std::size_t{1} << 22;
};

/// The bracketing-grid route on its own, for any pair of laws.
DistanceReport kolmogorov_distance_grid(const DistributionHandle& a, const DistributionHandle& b,
                                        GridOptions options = {});

/// Integral of |F_A - F_B| over the line. Throws InfiniteMomentError when the
/// tail integrals do not converge.
DistanceReport wasserstein_distance(const DistributionHandle& a, const DistributionHandle& b);

/// sup |F_hat - F_B| over the sorted samples with a DKW error bound at level
/// delta. Requires at least 100 samples.
DistanceReport empirical_kolmogorov(std::span<const double> samples, const DistributionHandle& b,
                                    double delta);

/// Integral of |F_hat - F_B| for an empirical sample (exact for the normal
/// reference and by quadrature otherwise).
double empirical_wasserstein(std::span<const double> samples, const DistributionHandle& b);

/// sqrt(ln(2/delta) / (2N)).
double dkw_epsilon(std::size_t n, double delta);

/// (1/2) * integral |p_A - p_B|. Throws CapabilityError when either handle has
/// no density.
DistanceReport total_variation_density(const DistributionHandle& a, const DistributionHandle& b);

/// Law of sum_j lambda_j (Z_j^2 - 1) for i.i.d. standard normals Z_j.
/// Requires 1 <= |lambdas| <= 64 and every lambda_j non-zero.
DistributionHandle second_chaos_distribution(std::span<const double> lambdas);

}  // namespace chaos_stein::distances
