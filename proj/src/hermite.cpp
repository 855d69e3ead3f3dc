#include "chaos_stein/hermite.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "chaos_stein/error.hpp"

namespace chaos_stein::hermite {

double factorial(int k) { return std::tgamma(static_cast<double>(k) + 1.0); }

double hermite_eval(int k, double x) {
  if (k < 0) throw PreconditionError("hermite_eval: negative degree");
  if (k > kMaxDegree)
    throw CapabilityError("hermite_eval: degree " + std::to_string(k) + " exceeds " +
                          std::to_string(kMaxDegree));
  if (k == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = x * cur - j * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

std::vector<double> hermite_all(int max_k, double x) {
  if (max_k < 0) return {};
  if (max_k > kMaxDegree) throw CapabilityError("hermite_all: degree exceeds guard");
  std::vector<double> h(static_cast<std::size_t>(max_k) + 1);
  h[0] = 1.0;
  if (max_k >= 1) h[1] = x;
  for (int j = 1; j < max_k; ++j) h[j + 1] = x * h[j] - j * h[j - 1];
  return h;
}

QuadratureRule gauss_hermite_rule(int m) {
  if (m < 2 || m > 256) throw PreconditionError("gauss_hermite_rule: m must lie in [2, 256]");
  // Jacobi matrix of the monic He recurrence: zero diagonal, sqrt(k) off it.
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd sub(m - 1);
  for (int k = 1; k < m; ++k) sub(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw EvaluationError("gauss_hermite_rule: eigen-solve failed");

  // Orthonormal recurrence p_k = He_k / sqrt(k!) stays in range for m <= 256.
  const auto orthonormal = [m](double x) {
    double prev = 0.0, cur = 1.0;
    for (int k = 0; k < m - 1; ++k) {
      const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(k + 1.0);
      prev = cur;
      cur = next;
    }
    // cur = p_{m-1}, prev = p_{m-2}
    const double pm = (x * cur - std::sqrt(m - 1.0) * prev) / std::sqrt(static_cast<double>(m));
    return std::pair{pm, cur};
  };

  QuadratureRule rule;
  rule.nodes.resize(m);
  rule.weights.resize(m);
  for (int i = 0; i < m; ++i) {
    double x = solver.eigenvalues()(i);
    // Newton polish on p_m, using p_m' = sqrt(m) p_{m-1}.
    for (int it = 0; it < 3; ++it) {
      const auto [pm, pm1] = orthonormal(x);
      x -= pm / (std::sqrt(static_cast<double>(m)) * pm1);
    }
    const auto [pm, pm1] = orthonormal(x);
    (void)pm;
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / (m * pm1 * pm1);
  }
  // The exact rule is symmetric about zero.
  for (int i = 0; i < m / 2; ++i) {
    const int j = m - 1 - i;
    const double node = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double w = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -node;
    rule.nodes[j] = node;
    rule.weights[i] = rule.weights[j] = w;
  }
  if (m % 2 == 1) rule.nodes[m / 2] = 0.0;
  const double total = std::accumulate(rule.weights.begin(), rule.weights.end(), 0.0);
  for (double& w : rule.weights) w /= total;
  return rule;
}

double CoefficientSeries::operator()(double x) const {
  if (coeffs.empty()) return 0.0;
  const auto h = hermite_all(static_cast<int>(coeffs.size()) - 1, x);
  double s = 0.0;
  for (std::size_t q = 0; q < coeffs.size(); ++q) s += coeffs[q] * h[q];
  return s;
}

double CoefficientSeries::captured_norm2() const {
  double s = 0.0;
  for (std::size_t q = 0; q < coeffs.size(); ++q)
    s += factorial(static_cast<int>(q)) * coeffs[q] * coeffs[q];
  return s;
}

CoefficientSeries chaos_coefficients(const std::function<double(double)>& phi, int max_order, double tol,
                                     int quadrature_points) {
  if (max_order < 0 || max_order > kMaxDegree)
    throw CapabilityError("chaos_coefficients: truncation order outside [0, 64]");
  const QuadratureRule rule = gauss_hermite_rule(quadrature_points);

  CoefficientSeries series;
  series.truncation_order = max_order;
  series.coeffs.assign(static_cast<std::size_t>(max_order) + 1, 0.0);
  double norm2 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    const double v = phi(x);
    if (!std::isfinite(v)) throw EvaluationError("chaos_coefficients: phi is not finite at a node");
    norm2 += rule.weights[i] * v * v;
    const auto h = hermite_all(max_order, x);
    for (int q = 0; q <= max_order; ++q) series.coeffs[q] += rule.weights[i] * v * h[q];
  }
  for (int q = 0; q <= max_order; ++q) {
    double& a = series.coeffs[q];
    a /= factorial(q);
    if (!std::isfinite(a)) throw EvaluationError("chaos_coefficients: non-finite coefficient");
    if (std::abs(a) < tol) a = 0.0;
  }
  const double deficit = norm2 - series.captured_norm2();
  // Deficits at the level of quadrature noise are reported as zero.
  series.tail_bound = deficit > 1e-10 * std::max(1.0, norm2) ? deficit : 0.0;
  return series;
}

int hermite_rank(const CoefficientSeries& series, double tol) {
  for (std::size_t q = 0; q < series.coeffs.size(); ++q)
    if (std::abs(series.coeffs[q]) > tol) return static_cast<int>(q);
  throw UndefinedRankError("hermite_rank: every coefficient is below tolerance");
}

CoefficientSeries pure_hermite(int q) {
  CoefficientSeries s;
  s.truncation_order = q;
  s.coeffs.assign(static_cast<std::size_t>(q) + 1, 0.0);
  s.coeffs[q] = 1.0;
  return s;
}

}  // namespace chaos_stein::hermite
