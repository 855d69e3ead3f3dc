#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace chaos_stein::stein {

enum class TestKind { bounded_continuous, lipschitz, indicator };

std::string to_string(TestKind kind);

struct TestFunction {
  TestKind kind = TestKind::bounded_continuous;
  std::function<double(double)> eval;
  double bound = 0.0;  // sup|h| for bounded, sup|h'| for lipschitz, 1 for indicator
  double x = 0.0;      // threshold of the indicator kind
  std::string label;
  std::vector<double> kinks;  // points where h is not smooth; quadrature splits there

  double operator()(double w) const { return eval(w); }
};

/// h with sup|h| <= sup_norm; checked on a grid over [-10, 10].
TestFunction bounded(std::function<double(double)> h, double sup_norm, std::string label = "bounded",
                     std::vector<double> kinks = {});
/// h with Lipschitz constant lip; checked on a grid over [-10, 10].
TestFunction lipschitz(std::function<double(double)> h, double lip, std::string label = "lipschitz",
                       std::vector<double> kinks = {});
/// h(w) = 1 for w <= x, 0 otherwise.
TestFunction indicator(double x);

/// f_h solving f'(w) - w f(w) = h(w) - E h(Z).
struct SteinSolution {
  TestFunction h;
  double eh_z = 0.0;
  std::function<double(double)> eval;
  std::function<double(double)> deriv;  // h(w) - E h(Z) + w f(w)

  double operator()(double w) const { return eval(w); }
};

/// f_h by one-sided integrals: the upper tail for w > 0, the lower tail for
/// w <= 0, so the integrand never carries exp(w^2/2). Quadrature failures
/// throw EvaluationError at evaluation time.
SteinSolution solve_stein(const TestFunction& h);

/// E h(Z). Exact for the indicator kind.
double gaussian_expectation(const TestFunction& h);

/// Closed form of f_x for the indicator of (-inf, x].
double indicator_solution_closed_form(double x, double w);

struct Grid {
  double lo = -8.0;
  double hi = 8.0;
  double step = 1e-3;
};

struct BoundCheck {
  std::string quantity;
  double observed = 0.0;
  double cap = 0.0;
  bool pass = true;
  std::string note;
};

struct BoundsReport {
  TestKind kind = TestKind::bounded_continuous;
  std::vector<BoundCheck> checks;
  bool all_pass() const;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kBoundSlack = 1e-9;

/// Sup norms of f, f', f'' (and the indicator-specific quantities) over the
/// grid against their caps. Requires the grid inside [-10, 10].
BoundsReport verify_solution_bounds(const TestFunction& h, const Grid& grid = {});
BoundsReport verify_solution_bounds(const SteinSolution& sol, const Grid& grid = {});

struct T1BoundReport {
  double bound_mean = 0.0;  // 2 E|1 - E[T1|W]|
  double bound_var = 0.0;   // 2 sqrt(Var E[T1|W])
  double se_mean = 0.0;     // jackknife standard errors
  double se_var = 0.0;
  int bins = 0;
  std::size_t n = 0;
};

inline constexpr int kJackknifeGroups = 20;

/// Estimates E[T1|W] by equal-count bins on w. The variance term subtracts
/// the within-bin sampling noise of the bin means. Needs N >= 1000 and
/// bins >= 10; constant w throws BinningError.
T1BoundReport tv_bound_from_T1(std::span<const std::pair<double, double>> pairs, int bins);

}  // namespace chaos_stein::stein
