#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "chaos_stein/chaos.hpp"
#include "chaos_stein/error.hpp"
#include "chaos_stein/rng.hpp"
#include "doctest.h"

using namespace chaos_stein;
using namespace chaos_stein::chaos;

namespace {

const double kInvRoot2 = 1.0 / std::numbers::sqrt2;

SymmetricKernel half_square() { return scaled(basis_power(1, 2, 1), kInvRoot2); }

// All full indices in [1, n]^p.
std::vector<std::vector<int>> full_indices(int p, int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> idx(static_cast<std::size_t>(p), 1);
  if (p == 0) return {{}};
  while (true) {
    out.push_back(idx);
    int pos = p - 1;
    while (pos >= 0 && idx[pos] == n) idx[pos--] = 1;
    if (pos < 0) break;
    ++idx[pos];
  }
  return out;
}

ChaosVector random_vector(int max_order, int n, Rng& rng, bool centered = false) {
  std::normal_distribution<double> n01;
  ChaosVector v = constant_vector(centered ? 0.0 : n01(rng), n);
  for (int k = 1; k <= max_order; ++k) v = v + integral(random_kernel(k, n, rng));
  return v;
}

// Polynomial in Z_1..Z_n keyed by exponent vector.
using Poly = std::map<std::vector<int>, double>;

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out;
  for (const auto& [ea, ca] : a)
    for (const auto& [eb, cb] : b) {
      std::vector<int> e(ea.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      out[e] += ca * cb;
    }
  return out;
}

// F as a raw polynomial (orders <= 2): He_1 = z, He_2 = z^2 - 1.
Poly expand(const ChaosVector& f) {
  const int n = f.basis_dim;
  Poly p;
  p[std::vector<int>(n, 0)] += f.constant;
  for (const auto& [k, ker] : f.kernels)
    for (const auto& [a, v] : ker.coeffs) {
      Poly term{{std::vector<int>(n, 0), multiplicity(a) * v}};
      std::vector<int> counts(n, 0);
      for (int j : a) ++counts[j - 1];
      for (int j = 0; j < n; ++j) {
        if (counts[j] == 0) continue;
        std::vector<int> e1(n, 0), e0(n, 0);
        e1[j] = counts[j];
        Poly h{{e1, 1.0}};
        if (counts[j] == 2) h[e0] = -1.0;
        term = poly_mul(term, h);
      }
      for (const auto& [e, c] : term) p[e] += c;
    }
  return p;
}

// Isserlis: E prod Z_j^{a_j} = prod (a_j - 1)!! for even a_j.
double gaussian_mean(const Poly& p) {
  double total = 0.0;
  for (const auto& [e, c] : p) {
    double m = 1.0;
    for (int a : e) {
      if (a % 2) {
        m = 0.0;
        break;
      }
      for (int k = a - 1; k > 1; k -= 2) m *= k;
    }
    total += c * m;
  }
  return total;
}

}  // namespace

TEST_CASE("multiplicity counts distinct orderings") {
  CHECK(multiplicity({}) == 1.0);
  CHECK(multiplicity({2}) == 1.0);
  CHECK(multiplicity({1, 1, 2}) == 3.0);
  CHECK(multiplicity({1, 2, 3}) == 6.0);
  CHECK(multiplicity({1, 1, 2, 2}) == 6.0);
}

TEST_CASE("symmetrization") {
  const std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
  const auto f = symmetrize(outer(e1, e2));
  CHECK(f.coefficient({1, 2}) == 0.5);
  CHECK(f.coefficient({2, 1}) == 0.5);
  CHECK(f.coefficient({1, 1}) == 0.0);

  Rng rng = make_rng(kDefaultSeed, 0x100);
  const auto g = random_kernel(3, 3, rng);
  RawTensor sym{3, 3, {}};
  for (const auto& idx : full_indices(3, 3)) sym.entries[idx] = g.coefficient(idx);
  const auto back = symmetrize(sym);
  for (const auto& [a, v] : g.coeffs) CHECK(back.coefficient(a) == doctest::Approx(v).epsilon(1e-14));

  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    RawTensor raw{3, 4, {}};
    for (const auto& idx : full_indices(3, 4)) raw.entries[idx] = n01(rng);
    const auto s = symmetrize(raw);
    CHECK(s.norm() <= std::sqrt(raw.norm_squared()));
    // Oracle: average over the 6 permutations of every full index.
    for (const auto& idx : full_indices(3, 4)) {
      std::vector<int> perm = {0, 1, 2};
      double avg = 0.0;
      do avg += raw.entries.at({idx[perm[0]], idx[perm[1]], idx[perm[2]]});
      while (std::next_permutation(perm.begin(), perm.end()));
      CHECK(s.coefficient(idx) == doctest::Approx(avg / 6.0).epsilon(1e-13));
    }
  }
  RawTensor bad{2, 2, {{{1, 3}, 1.0}}};
  CHECK_THROWS_AS(symmetrize(bad), PreconditionError);
}

TEST_CASE("contractions") {
  const auto f = half_square();
  const auto c1 = contract(f, f, 1);
  CHECK(symmetrize(c1).coefficient({1, 1}) == doctest::Approx(0.5));
  CHECK(c1.norm_squared() == doctest::Approx(0.25));
  CHECK(contract(f, f, 2).blocks.at({{}, {}}) == doctest::Approx(inner(f, f)));

  Rng rng = make_rng(kDefaultSeed, 0x101);
  for (int trial = 0; trial < 30; ++trial) {
    const int p = 1 + trial % 3, q = 1 + (trial / 3) % 3, n = 2 + trial % 3;
    const auto a = random_kernel(p, n, rng);
    const auto b = random_kernel(q, n, rng);
    CHECK(std::sqrt(contract(a, b, 0).norm_squared()) == doctest::Approx(a.norm() * b.norm()).epsilon(1e-12));
    for (int r = 0; r <= std::min(p, q); ++r) {
      const auto c = contract(a, b, r);
      CHECK(std::sqrt(c.norm_squared()) <= a.norm() * b.norm() * (1.0 + 1e-12));
      // Literal coordinate sum over the r contracted slots.
      const auto raw = c.to_raw();
      for (const auto& s : full_indices(p - r, n))
        for (const auto& t : full_indices(q - r, n)) {
          double sum = 0.0;
          for (const auto& k : full_indices(r, n)) {
            std::vector<int> fi(s), gi(t);
            fi.insert(fi.end(), k.begin(), k.end());
            gi.insert(gi.end(), k.begin(), k.end());
            sum += a.coefficient(fi) * b.coefficient(gi);
          }
          std::vector<int> st(s);
          st.insert(st.end(), t.begin(), t.end());
          const auto it = raw.entries.find(st);
          CHECK((it == raw.entries.end() ? 0.0 : it->second) == doctest::Approx(sum).epsilon(1e-12));
        }
    }
  }
  CHECK_THROWS_AS(contract(f, f, 3), PreconditionError);
  CHECK_THROWS_AS(contract(f, basis_power(1, 2, 2), 1), PreconditionError);
}

TEST_CASE("evaluation as Hermite products") {
  const std::vector<double> z{0.7, -1.3};
  CHECK(evaluate(integral(basis_power(1, 1, 2)), z) == doctest::Approx(0.7));
  CHECK(evaluate(integral(basis_power(1, 2, 2)), z) == doctest::Approx(0.49 - 1.0));
  const std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
  CHECK(evaluate(integral(symmetrize(outer(e1, e2))), z) == doctest::Approx(0.7 * -1.3));
  CHECK_THROWS_AS(evaluate(integral(basis_power(1, 1, 3)), z), PreconditionError);
}

TEST_CASE("product formula") {
  const auto e = integral(basis_power(1, 1, 1));
  const auto sq = multiply(e, e);
  CHECK(sq.constant == doctest::Approx(1.0));
  REQUIRE(sq.kernels.size() == 1);
  CHECK(sq.kernels.at(2).coefficient({1, 1}) == doctest::Approx(1.0));

  const auto f2 = integral(half_square());
  const auto p = multiply(f2, f2);
  CHECK(p.constant == doctest::Approx(1.0));
  CHECK(p.kernels.count(2) == 1);
  CHECK(p.kernels.count(4) == 1);
  CHECK(p.kernels.size() == 2);

  // Almost-sure identity at random points.
  Rng rng = make_rng(kDefaultSeed, 0x102);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 5;
    const auto a = random_vector(1 + trial % 3, n, rng);
    const auto b = random_vector(1 + (trial / 3) % 3, n, rng);
    const auto ab = multiply(a, b);
    for (int i = 0; i < 200; ++i) {
      std::vector<double> z(static_cast<std::size_t>(n));
      for (double& v : z) v = n01(rng);
      const double lhs = evaluate(ab, z), rhs = evaluate(a, z) * evaluate(b, z);
      worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
  }
  CHECK(worst < 1e-8);

  const auto big = integral(random_kernel(17, 1, rng));
  const auto other = integral(random_kernel(16, 1, rng));
  CHECK_THROWS_AS(multiply(big, other), CapabilityError);
  CHECK_NOTHROW(multiply(other, other));
}

TEST_CASE("inner products and norm expansion") {
  const auto e1 = integral(basis_power(1, 1, 1));
  const auto e2 = integral(basis_power(1, 2, 1));
  CHECK(chaos_inner(e1, e2) == 0.0);
  CHECK(chaos_inner(integral(half_square()), integral(half_square())) == doctest::Approx(1.0));
  Rng rng = make_rng(kDefaultSeed, 0x103);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = random_vector(1 + trial % 4, 1 + trial % 3, rng);
    CHECK(chaos_inner(f, constant_vector(1.0, f.basis_dim)) == f.constant);
    double expansion = f.constant * f.constant;
    for (const auto& [k, ker] : f.kernels) expansion += std::tgamma(k + 1.0) * ker.norm_squared();
    CHECK(chaos_inner(f, f) == doctest::Approx(expansion).epsilon(1e-13));
    CHECK(multiply(f, f).constant == doctest::Approx(expansion).epsilon(1e-12));
  }
}

TEST_CASE("exact moments") {
  const auto f2 = integral(half_square());
  CHECK(moment(f2, 2) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(moment(f2, 4) == doctest::Approx(15.0).epsilon(1e-13));
  CHECK(moment(integral(basis_power(1, 1, 1)), 4) == doctest::Approx(3.0).epsilon(1e-14));

  Rng rng = make_rng(kDefaultSeed, 0x104);
  for (int trial = 0; trial < 10; ++trial) {
    const auto k = random_kernel(2, 4, rng);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel_to_matrix(k));
    const double third = 8.0 * es.eigenvalues().array().cube().sum();
    CHECK(moment(integral(k), 3) == doctest::Approx(third).epsilon(1e-11));
  }
  CHECK_THROWS_AS(moment(integral(random_kernel(9, 1, rng)), 4), CapabilityError);
  CHECK_THROWS_AS(moment(f2, 5), PreconditionError);
}

TEST_CASE("moments against Isserlis pairing") {
  Rng rng = make_rng(kDefaultSeed, 0x105);
  for (int trial = 0; trial < 20; ++trial) {
    const auto f = random_vector(1 + trial % 2, 1 + trial % 3, rng);
    const Poly p = expand(f);
    Poly power{{std::vector<int>(f.basis_dim, 0), 1.0}};
    for (int m = 1; m <= 4; ++m) {
      power = poly_mul(power, p);
      const double oracle = gaussian_mean(power);
      CHECK(std::abs(moment(f, m) - oracle) <= 1e-9 * std::max(1.0, std::abs(oracle)));
    }
  }
}

TEST_CASE("hypercontractivity") {
  const auto r2 = hypercontractivity_check(half_square());
  CHECK(r2.fourth_moment == doctest::Approx(15.0));
  CHECK(r2.cap == doctest::Approx(26244.0));
  CHECK(r2.pass);
  const auto r1 = hypercontractivity_check(basis_power(1, 1, 1));
  CHECK(r1.fourth_moment == doctest::Approx(3.0));
  CHECK(r1.cap == doctest::Approx(81.0));
  CHECK(r1.pass);
  Rng rng = make_rng(kDefaultSeed, 0x106);
  for (int trial = 0; trial < 20; ++trial)
    CHECK(hypercontractivity_check(random_kernel(1 + trial % 3, 1 + trial % 4, rng)).pass);
}

TEST_CASE("sampled moments") {
  const auto f2 = integral(half_square());
  const auto e = integral(basis_power(1, 1, 1));
  const std::size_t n = 1'000'000;
  for (const auto& [f, m, exact] : std::vector<std::tuple<ChaosVector, int, double>>{
           {f2, 2, 1.0}, {f2, 4, 15.0}, {e, 4, 3.0}, {e, 2, 1.0}}) {
    const auto s = sample_moment(f, m, n, kDefaultSeed);
    CHECK(std::abs(s.estimate - exact) <= 4.0 * s.se);
  }
  Rng rng = make_rng(kDefaultSeed, 0x107);
  const auto k = random_kernel(2, 3, rng);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kernel_to_matrix(k));
  const auto s3 = sample_moment(integral(k), 3, n, kDefaultSeed);
  CHECK(std::abs(s3.estimate - 8.0 * es.eigenvalues().array().cube().sum()) <= 4.0 * s3.se);
  auto shifted = e;
  shifted.constant = 0.25;
  const auto mean = sample_moment(shifted, 1, n, kDefaultSeed);
  CHECK(std::abs(mean.estimate - 0.25) <= 4.0 * mean.se);
}

TEST_CASE("kernel JSON") {
  Rng rng = make_rng(kDefaultSeed, 0x108);
  for (int k = 1; k <= 3; ++k) {
    const auto f = random_kernel(k, 4, rng);
    const auto g = kernel_from_json(kernel_to_json(f));
    CHECK(g.order == f.order);
    CHECK(g.basis_dim == f.basis_dim);
    CHECK(g.coeffs == f.coeffs);
  }
  const auto parsed = kernel_from_json(R"({"order":2,"basis_dim":2,"entries":[[[2,1],0.5]]})");
  CHECK(parsed.coefficient({1, 2}) == 0.5);
  CHECK_THROWS_AS(kernel_from_json("{"), PreconditionError);
  CHECK_THROWS_AS(kernel_from_json(R"({"order":2,"basis_dim":2,"entries":[[[3,1],0.5]]})"), PreconditionError);
  CHECK_THROWS_AS(kernel_from_json(R"({"order":2,"basis_dim":2,"entries":[],"extra":1})"), PreconditionError);
  CHECK_THROWS_AS(kernel_from_json(R"({"order":2,"basis_dim":2,"entries":[[[1],0.5]]})"), PreconditionError);
}

TEST_CASE("product deviation") {
  Rng rng = make_rng(kDefaultSeed, 0x77);
  const auto a = integral(random_kernel(2, 3, rng));
  const auto b = integral(random_kernel(3, 3, rng));
  CHECK(product_deviation(a, b, 200, rng) < 1e-10);
  CHECK(product_deviation(a, b, 0, rng) == 0.0);
  CHECK_THROWS_AS(product_deviation(a, integral(random_kernel(1, 2, rng)), 10, rng), PreconditionError);
}
