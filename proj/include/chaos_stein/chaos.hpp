#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chaos_stein/rng.hpp"

namespace chaos_stein::chaos {

inline constexpr int kMaxOrder = 32;

/// Nondecreasing basis indices, each in [1, basis_dim].
using MultiIndex = std::vector<int>;

/// Number of distinct orderings of the index: p! / prod(multiplicity!).
double multiplicity(const MultiIndex& index);

/// Symmetric function on [basis_dim]^order stored by sorted index.
/// ||f||^2 = sum multiplicity(a) f_a^2.
struct SymmetricKernel {
  int order = 1;
  int basis_dim = 1;
  std::map<MultiIndex, double> coeffs;

  /// Value at any ordering of the index; zero when absent.
  double coefficient(MultiIndex index) const;
  /// Sorts and range-checks the index.
  void set(MultiIndex index, double value);
  double norm_squared() const;
  double norm() const;
};

SymmetricKernel make_kernel(int order, int basis_dim);
/// e_j tensor power k.
SymmetricKernel basis_power(int j, int order, int basis_dim);
/// Symmetric matrix as an order-2 kernel (entry (i, j) is f(i+1, j+1)).
SymmetricKernel kernel_from_matrix(const Eigen::MatrixXd& a);
Eigen::MatrixXd kernel_to_matrix(const SymmetricKernel& f);
/// Independent N(0, 1) coefficient at every sorted index.
SymmetricKernel random_kernel(int order, int basis_dim, Rng& rng);

SymmetricKernel scaled(const SymmetricKernel& f, double c);
/// <f, g> = sum multiplicity(a) f_a g_a.
double inner(const SymmetricKernel& f, const SymmetricKernel& g);

/// Function on [basis_dim]^order stored by full (unsorted) index.
struct RawTensor {
  int order = 0;
  int basis_dim = 1;
  std::map<std::vector<int>, double> entries;

  double norm_squared() const;
};

/// Tensor product of two coordinate vectors (0-based storage, 1-based indices).
RawTensor outer(std::span<const double> u, std::span<const double> v);

/// Average over permutations; throws ConsistencyError if ||f~|| > ||raw||.
SymmetricKernel symmetrize(const RawTensor& raw);

/// f (x)_r g, symmetric separately in its first order(f) - r slots and its
/// last order(g) - r slots; stored by the pair of sorted slot groups.
struct ContractionTensor {
  int left_order = 0;
  int right_order = 0;
  int basis_dim = 1;
  std::map<std::pair<MultiIndex, MultiIndex>, double> blocks;

  int order() const { return left_order + right_order; }
  double norm_squared() const;
  RawTensor to_raw() const;
};

/// Sums f(s, c) g(t, c) over the r shared slots c. Requires 0 <= r <=
/// min(order f, order g) and a common basis_dim.
ContractionTensor contract(const SymmetricKernel& f, const SymmetricKernel& g, int r);
SymmetricKernel symmetrize(const ContractionTensor& c);

/// F = constant + sum_k I_k(f_k); every kernel of order >= 1 shares basis_dim.
struct ChaosVector {
  double constant = 0.0;
  int basis_dim = 1;
  std::map<int, SymmetricKernel> kernels;

  int max_order() const;
};

ChaosVector constant_vector(double c, int basis_dim);
/// I_k(f).
ChaosVector integral(const SymmetricKernel& f);

ChaosVector operator+(const ChaosVector& a, const ChaosVector& b);
ChaosVector operator-(const ChaosVector& a, const ChaosVector& b);
ChaosVector operator*(double c, const ChaosVector& a);

/// Product formula over all kernel pairs. Throws CapabilityError when the
/// combined order exceeds kMaxOrder.
ChaosVector multiply(const ChaosVector& f, const ChaosVector& g);

/// F at a realization z of the basis coordinates (z[j-1] is Z_j).
double evaluate(const ChaosVector& f, std::span<const double> z);

/// Largest |evaluate(F G) - F G| / max(1, |F G|) over `points` standard Gaussian draws.
double product_deviation(const ChaosVector& f, const ChaosVector& g, std::size_t points, Rng& rng);

/// E[FG].
double chaos_inner(const ChaosVector& f, const ChaosVector& g);

/// Exact E[F^m] for m in 1..4. Requires m * max_order <= kMaxOrder.
double moment(const ChaosVector& f, int m);

struct HypercontractivityReport {
  int order = 0;
  double fourth_moment = 0.0;
  double cap = 0.0;  // (3^k k!)^4 ||f||^4
  bool pass = false;
};

HypercontractivityReport hypercontractivity_check(const SymmetricKernel& f);

struct SampleMoment {
  double estimate = 0.0;
  double se = 0.0;
};

/// Mean of F(Z)^m over n standard Gaussian points.
SampleMoment sample_moment(const ChaosVector& f, int m, std::size_t n, std::uint64_t seed);

/// {"order", "basis_dim", "entries": [[[indices...], value], ...]} with 1-based indices.
std::string kernel_to_json(const SymmetricKernel& f);
SymmetricKernel kernel_from_json(const std::string& text);

}  // namespace chaos_stein::chaos
