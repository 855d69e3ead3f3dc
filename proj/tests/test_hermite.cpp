#include <cmath>
#include <random>

#include "chaos_stein/error.hpp"
#include "chaos_stein/hermite.hpp"
#include "doctest.h"

using namespace chaos_stein;
using namespace chaos_stein::hermite;

TEST_CASE("hermite_eval small degrees") {
  CHECK(hermite_eval(0, 3.7) == 1.0);
  CHECK(hermite_eval(2, 1.0) == doctest::Approx(0.0));
  CHECK(hermite_eval(2, -1.0) == doctest::Approx(0.0));
  // oracle: He_3(x) = x^3 - 3x
  CHECK(hermite_eval(3, 2.0) == doctest::Approx(2.0));
  for (double x : {-2.5, -0.3, 0.0, 1.1, 4.0}) CHECK(hermite_eval(3, x) == doctest::Approx(x * x * x - 3 * x));
}

TEST_CASE("hermite_eval degree guard") {
  CHECK_NOTHROW(hermite_eval(64, 0.5));
  CHECK_THROWS_AS(hermite_eval(65, 0.5), CapabilityError);
}

TEST_CASE("derivative identity He_k' = k He_{k-1} against finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int trial = 0; trial < 100; ++trial) {
    const double x = u(rng);
    for (int k = 1; k <= 10; ++k) {
      const double h = 1e-5;
      const double fd = (hermite_eval(k, x + h) - hermite_eval(k, x - h)) / (2 * h);
      const double exact = k * hermite_eval(k - 1, x);
      CHECK(std::abs(fd - exact) <= 1e-6 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST_CASE("gauss_hermite_rule two points") {
  const auto r = gauss_hermite_rule(2);
  REQUIRE(r.nodes.size() == 2);
  CHECK(r.nodes[0] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(r.nodes[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.weights[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("gauss_hermite_rule low-degree exactness") {
  for (int m : {2, 3, 7, 20, 64, 128, 256}) {
    const auto r = gauss_hermite_rule(m);
    double s0 = 0, s2 = 0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) {
      s0 += r.weights[i];
      s2 += r.weights[i] * r.nodes[i] * r.nodes[i];
    }
    CHECK(s0 == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(s2 == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gauss_hermite_rule(1), PreconditionError);
  CHECK_THROWS_AS(gauss_hermite_rule(257), PreconditionError);
}

TEST_CASE("orthogonality of He_p and He_q under the rule") {
  const auto r = gauss_hermite_rule(20);
  for (int p = 0; p <= 8; ++p)
    for (int q = 0; q <= 8; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < r.nodes.size(); ++i)
        s += r.weights[i] * hermite_eval(p, r.nodes[i]) * hermite_eval(q, r.nodes[i]);
      const double expected = p == q ? factorial(p) : 0.0;
      CHECK(std::abs(s - expected) <= 1e-10);
    }
}

TEST_CASE("chaos_coefficients on polynomials") {
  const auto h2 = chaos_coefficients([](double x) { return x * x - 1.0; }, 4);
  CHECK(h2.coeffs[2] == doctest::Approx(1.0).epsilon(1e-12));
  for (int q : {0, 1, 3, 4}) CHECK(h2.coeffs[q] == 0.0);

  // x^3 = He_3 + 3 He_1
  const auto cube = chaos_coefficients([](double x) { return x * x * x; }, 4);
  CHECK(cube.coeffs[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(cube.coeffs[3] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(cube.coeffs[0] == 0.0);
  CHECK(cube.tail_bound == 0.0);

  const auto h5 = chaos_coefficients([](double x) { return hermite_eval(5, x); }, 3);
  CHECK(h5.tail_bound == doctest::Approx(120.0).epsilon(1e-9));
  for (double a : h5.coeffs) CHECK(a == 0.0);
}

TEST_CASE("chaos_coefficients rejects non-finite values") {
  CHECK_THROWS_AS(chaos_coefficients([](double) { return std::nan(""); }, 3), EvaluationError);
}

TEST_CASE("round trip of random polynomials") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> c(7);
    for (double& v : c) v = n01(rng);
    const auto poly = [&](double x) {
      double s = 0.0;
      for (int i = 6; i >= 0; --i) s = s * x + c[i];
      return s;
    };
    const auto series = chaos_coefficients(poly, 6);
    CHECK(series.tail_bound == 0.0);
    for (double x = -5.0; x <= 5.0; x += 0.25)
      CHECK(std::abs(series(x) - poly(x)) <= 1e-9 * std::max(1.0, std::abs(poly(x))));
  }
}

TEST_CASE("hermite_rank") {
  CHECK(hermite_rank(pure_hermite(2)) == 2);
  CHECK(hermite_rank(chaos_coefficients([](double x) { return x * x * x; }, 4)) == 1);
  CHECK(hermite_rank(chaos_coefficients([](double x) { return 2.0 + x; }, 4)) == 0);
  CHECK_THROWS_AS(hermite_rank(chaos_coefficients([](double) { return 0.0; }, 4)), UndefinedRankError);
}
