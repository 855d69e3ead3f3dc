#include "chaos_stein/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "chaos_stein/error.hpp"
#include "chaos_stein/hermite.hpp"
#include "json.hpp"

namespace chaos_stein::chaos {

namespace {

constexpr std::uint64_t kStreamSampleMoment = 0xC4A0;

void check_index(const MultiIndex& index, int order, int basis_dim) {
  if (static_cast<int>(index.size()) != order) throw PreconditionError("kernel index has the wrong length");
  for (int j : index)
    if (j < 1 || j > basis_dim) throw PreconditionError("kernel index out of range");
}

MultiIndex merged(const MultiIndex& a, const MultiIndex& b) {
  MultiIndex out(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
  return out;
}

// Every sub-multiset C of size r of the sorted index, paired with the rest.
void split_index(const MultiIndex& alpha, int r,
                 const std::function<void(const MultiIndex&, const MultiIndex&)>& visit) {
  std::vector<std::pair<int, int>> groups;  // (value, count)
  for (int v : alpha) {
    if (!groups.empty() && groups.back().first == v) ++groups.back().second;
    else groups.push_back({v, 1});
  }
  std::vector<int> take(groups.size(), 0);
  const std::function<void(std::size_t, int)> rec = [&](std::size_t g, int left) {
    if (g == groups.size()) {
      if (left != 0) return;
      MultiIndex c, rest;
      for (std::size_t i = 0; i < groups.size(); ++i) {
        c.insert(c.end(), take[i], groups[i].first);
        rest.insert(rest.end(), groups[i].second - take[i], groups[i].first);
      }
      visit(c, rest);
      return;
    }
    for (int t = 0; t <= std::min(left, groups[g].second); ++t) {
      take[g] = t;
      rec(g + 1, left - t);
    }
    take[g] = 0;
  };
  rec(0, r);
}

void add_scaled(std::map<MultiIndex, double>& into, const std::map<MultiIndex, double>& from, double c) {
  for (const auto& [a, v] : from) into[a] += c * v;
}

void require_same_dim(int a, int b) {
  if (a != b) throw PreconditionError("chaos: basis dimensions differ");
}

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

}  // namespace

double multiplicity(const MultiIndex& index) {
  // Product of binomials keeps intermediate values exact up to 2^53.
  double m = 1.0;
  int placed = 0;
  std::size_t i = 0;
  while (i < index.size()) {
    std::size_t j = i;
    while (j < index.size() && index[j] == index[i]) ++j;
    const int c = static_cast<int>(j - i);
    placed += c;
    m *= binomial(placed, c);
    i = j;
  }
  return m;
}

double SymmetricKernel::coefficient(MultiIndex index) const {
  std::sort(index.begin(), index.end());
  const auto it = coeffs.find(index);
  return it == coeffs.end() ? 0.0 : it->second;
}

void SymmetricKernel::set(MultiIndex index, double value) {
  std::sort(index.begin(), index.end());
  check_index(index, order, basis_dim);
  coeffs[index] = value;
}

double SymmetricKernel::norm_squared() const {
  double s = 0.0;
  for (const auto& [a, v] : coeffs) s += multiplicity(a) * v * v;
  return s;
}

double SymmetricKernel::norm() const { return std::sqrt(norm_squared()); }

SymmetricKernel make_kernel(int order, int basis_dim) {
  if (order < 0 || order > kMaxOrder) throw CapabilityError("kernel order outside [0, 32]");
  if (basis_dim < 1) throw PreconditionError("kernel basis_dim must be positive");
  return {order, basis_dim, {}};
}

SymmetricKernel basis_power(int j, int order, int basis_dim) {
  SymmetricKernel f = make_kernel(order, basis_dim);
  f.set(MultiIndex(static_cast<std::size_t>(order), j), 1.0);
  return f;
}

SymmetricKernel kernel_from_matrix(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() < 1) throw PreconditionError("kernel_from_matrix: matrix must be square");
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + a.cwiseAbs().maxCoeff()))
    throw PreconditionError("kernel_from_matrix: matrix must be symmetric");
  const int n = static_cast<int>(a.rows());
  SymmetricKernel f = make_kernel(2, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      if (a(i, j) != 0.0) f.coeffs[{i + 1, j + 1}] = 0.5 * (a(i, j) + a(j, i));
  return f;
}

Eigen::MatrixXd kernel_to_matrix(const SymmetricKernel& f) {
  if (f.order != 2) throw PreconditionError("kernel_to_matrix: order must be 2");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(f.basis_dim, f.basis_dim);
  for (const auto& [idx, v] : f.coeffs) {
    a(idx[0] - 1, idx[1] - 1) = v;
    a(idx[1] - 1, idx[0] - 1) = v;
  }
  return a;
}

SymmetricKernel random_kernel(int order, int basis_dim, Rng& rng) {
  SymmetricKernel f = make_kernel(order, basis_dim);
  std::normal_distribution<double> n01;
  MultiIndex idx(static_cast<std::size_t>(order), 1);
  while (true) {
    f.coeffs[idx] = n01(rng);
    // Next nondecreasing index in lexicographic order.
    int pos = order - 1;
    while (pos >= 0 && idx[pos] == basis_dim) --pos;
    if (pos < 0) break;
    const int v = idx[pos] + 1;
    for (int i = pos; i < order; ++i) idx[i] = v;
  }
  return f;
}

SymmetricKernel scaled(const SymmetricKernel& f, double c) {
  SymmetricKernel g = f;
  for (auto& [a, v] : g.coeffs) v *= c;
  return g;
}

double inner(const SymmetricKernel& f, const SymmetricKernel& g) {
  require_same_dim(f.basis_dim, g.basis_dim);
  if (f.order != g.order) return 0.0;
  double s = 0.0;
  for (const auto& [a, v] : f.coeffs) {
    const auto it = g.coeffs.find(a);
    if (it != g.coeffs.end()) s += multiplicity(a) * v * it->second;
  }
  return s;
}

double RawTensor::norm_squared() const {
  double s = 0.0;
  for (const auto& [a, v] : entries) s += v * v;
  return s;
}

RawTensor outer(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size() || u.empty()) throw PreconditionError("outer: vectors must share a non-zero length");
  RawTensor t{2, static_cast<int>(u.size()), {}};
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j)
      if (u[i] * v[j] != 0.0) t.entries[{static_cast<int>(i) + 1, static_cast<int>(j) + 1}] = u[i] * v[j];
  return t;
}

SymmetricKernel symmetrize(const RawTensor& raw) {
  SymmetricKernel f = make_kernel(raw.order, raw.basis_dim);
  for (const auto& [idx, v] : raw.entries) {
    MultiIndex a = idx;
    std::sort(a.begin(), a.end());
    check_index(a, raw.order, raw.basis_dim);
    f.coeffs[a] += v;
  }
  // Each sorted index has multiplicity(a) orderings among the p! permutations
  // counted with equal weight.
  for (auto& [a, v] : f.coeffs) v /= multiplicity(a);
  if (f.norm_squared() > raw.norm_squared() * (1.0 + 1e-12) + 1e-300)
    throw ConsistencyError("symmetrize: norm increased");
  return f;
}

double ContractionTensor::norm_squared() const {
  double s = 0.0;
  for (const auto& [st, v] : blocks) s += multiplicity(st.first) * multiplicity(st.second) * v * v;
  return s;
}

RawTensor ContractionTensor::to_raw() const {
  RawTensor t{order(), basis_dim, {}};
  for (const auto& [st, v] : blocks) {
    MultiIndex s = st.first, u = st.second;
    do {
      do {
        std::vector<int> full(s);
        full.insert(full.end(), u.begin(), u.end());
        t.entries[full] = v;
      } while (std::next_permutation(u.begin(), u.end()));
    } while (std::next_permutation(s.begin(), s.end()));
  }
  return t;
}

ContractionTensor contract(const SymmetricKernel& f, const SymmetricKernel& g, int r) {
  require_same_dim(f.basis_dim, g.basis_dim);
  if (r < 0 || r > std::min(f.order, g.order)) throw PreconditionError("contract: r out of range");
  // Group each side by the multiset of contracted slots.
  using Side = std::map<MultiIndex, std::vector<std::pair<MultiIndex, double>>>;
  const auto group = [r](const SymmetricKernel& k) {
    Side side;
    for (const auto& [a, v] : k.coeffs) {
      if (v == 0.0) continue;
      split_index(a, r, [&](const MultiIndex& c, const MultiIndex& rest) { side[c].push_back({rest, v}); });
    }
    return side;
  };
  const Side left = group(f);
  const Side right = group(g);
  ContractionTensor out{f.order - r, g.order - r, f.basis_dim, {}};
  for (const auto& [c, fs] : left) {
    const auto it = right.find(c);
    if (it == right.end()) continue;
    const double m = multiplicity(c);
    for (const auto& [s, fv] : fs)
      for (const auto& [t, gv] : it->second) out.blocks[{s, t}] += m * fv * gv;
  }
  return out;
}

SymmetricKernel symmetrize(const ContractionTensor& c) {
  SymmetricKernel f = make_kernel(c.order(), c.basis_dim);
  for (const auto& [st, v] : c.blocks)
    f.coeffs[merged(st.first, st.second)] += multiplicity(st.first) * multiplicity(st.second) * v;
  for (auto& [a, v] : f.coeffs) v /= multiplicity(a);
  return f;
}

int ChaosVector::max_order() const { return kernels.empty() ? 0 : kernels.rbegin()->first; }

ChaosVector constant_vector(double c, int basis_dim) {
  if (basis_dim < 1) throw PreconditionError("chaos vector basis_dim must be positive");
  return {c, basis_dim, {}};
}

ChaosVector integral(const SymmetricKernel& f) {
  if (f.order < 1) return constant_vector(f.coefficient({}), f.basis_dim);
  ChaosVector v = constant_vector(0.0, f.basis_dim);
  v.kernels.emplace(f.order, f);
  return v;
}

ChaosVector operator+(const ChaosVector& a, const ChaosVector& b) {
  require_same_dim(a.basis_dim, b.basis_dim);
  ChaosVector out = a;
  out.constant += b.constant;
  for (const auto& [k, f] : b.kernels) {
    auto it = out.kernels.find(k);
    if (it == out.kernels.end()) out.kernels.emplace(k, f);
    else add_scaled(it->second.coeffs, f.coeffs, 1.0);
  }
  return out;
}

ChaosVector operator*(double c, const ChaosVector& a) {
  ChaosVector out = a;
  out.constant *= c;
  for (auto& [k, f] : out.kernels)
    for (auto& [idx, v] : f.coeffs) v *= c;
  return out;
}

ChaosVector operator-(const ChaosVector& a, const ChaosVector& b) { return a + (-1.0) * b; }

ChaosVector multiply(const ChaosVector& f, const ChaosVector& g) {
  require_same_dim(f.basis_dim, g.basis_dim);
  if (f.max_order() + g.max_order() > kMaxOrder) throw CapabilityError("multiply: order exceeds 32");
  ChaosVector out = constant_vector(f.constant * g.constant, f.basis_dim);
  const auto accumulate = [&](int order, const std::map<MultiIndex, double>& coeffs, double c) {
    if (c == 0.0) return;
    if (order == 0) {
      for (const auto& [a, v] : coeffs) out.constant += c * v;
      return;
    }
    auto it = out.kernels.find(order);
    if (it == out.kernels.end()) it = out.kernels.emplace(order, make_kernel(order, f.basis_dim)).first;
    add_scaled(it->second.coeffs, coeffs, c);
  };
  for (const auto& [q, gk] : g.kernels) accumulate(q, gk.coeffs, f.constant);
  for (const auto& [p, fk] : f.kernels) accumulate(p, fk.coeffs, g.constant);
  for (const auto& [p, fk] : f.kernels)
    for (const auto& [q, gk] : g.kernels)
      for (int r = 0; r <= std::min(p, q); ++r) {
        const double weight = hermite::factorial(r) * binomial(p, r) * binomial(q, r);
        accumulate(p + q - 2 * r, symmetrize(contract(fk, gk, r)).coeffs, weight);
      }
  return out;
}

double evaluate(const ChaosVector& f, std::span<const double> z) {
  if (static_cast<int>(z.size()) != f.basis_dim) throw PreconditionError("evaluate: dimension mismatch");
  const int top = f.max_order();
  std::vector<std::vector<double>> h(z.size());
  for (std::size_t j = 0; j < z.size(); ++j) h[j] = hermite::hermite_all(top, z[j]);
  double total = f.constant;
  for (const auto& [k, kernel] : f.kernels) {
    for (const auto& [a, v] : kernel.coeffs) {
      if (v == 0.0) continue;
      double prod = multiplicity(a) * v;
      std::size_t i = 0;
      while (i < a.size()) {
        std::size_t j = i;
        while (j < a.size() && a[j] == a[i]) ++j;
        prod *= h[a[i] - 1][j - i];
        i = j;
      }
      total += prod;
    }
  }
  return total;
}

double chaos_inner(const ChaosVector& f, const ChaosVector& g) {
  require_same_dim(f.basis_dim, g.basis_dim);
  double s = f.constant * g.constant;
  for (const auto& [k, fk] : f.kernels) {
    const auto it = g.kernels.find(k);
    if (it != g.kernels.end()) s += hermite::factorial(k) * inner(fk, it->second);
  }
  return s;
}

double moment(const ChaosVector& f, int m) {
  if (m < 1 || m > 4) throw PreconditionError("moment: m must lie in 1..4");
  if (m * f.max_order() > kMaxOrder) throw CapabilityError("moment: order exceeds 32");
  // E[F^m] is the constant term of the m-fold product; pairing products of
  // lower degree keeps the intermediate orders small.
  switch (m) {
    case 1: return f.constant;
    case 2: return chaos_inner(f, f);
    case 3: return chaos_inner(multiply(f, f), f);
    default: {
      const ChaosVector sq = multiply(f, f);
      return chaos_inner(sq, sq);
    }
  }
}

HypercontractivityReport hypercontractivity_check(const SymmetricKernel& f) {
  if (f.order < 1) throw PreconditionError("hypercontractivity_check: order must be positive");
  HypercontractivityReport r;
  r.order = f.order;
  r.fourth_moment = moment(integral(f), 4);
  const double base = std::pow(3.0, f.order) * hermite::factorial(f.order);
  const double n2 = f.norm_squared();
  r.cap = std::pow(base, 4) * n2 * n2;
  r.pass = r.fourth_moment <= r.cap * (1.0 + 1e-12);
  return r;
}

double product_deviation(const ChaosVector& f, const ChaosVector& g, std::size_t points, Rng& rng) {
  if (f.basis_dim != g.basis_dim) throw PreconditionError("product_deviation: basis dimensions differ");
  const ChaosVector fg = multiply(f, g);
  std::normal_distribution<double> n01;
  std::vector<double> z(static_cast<std::size_t>(f.basis_dim));
  double worst = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    for (double& v : z) v = n01(rng);
    const double rhs = evaluate(f, z) * evaluate(g, z);
    worst = std::max(worst, std::abs(evaluate(fg, z) - rhs) / std::max(1.0, std::abs(rhs)));
  }
  return worst;
}

SampleMoment sample_moment(const ChaosVector& f, int m, std::size_t n, std::uint64_t seed) {
  if (m < 1) throw PreconditionError("sample_moment: m must be positive");
  const RunningStats s = mc_mean(n, seed, kStreamSampleMoment, [&](Rng& rng) {
    std::normal_distribution<double> n01;
    std::vector<double> z(static_cast<std::size_t>(f.basis_dim));
    for (double& v : z) v = n01(rng);
    return std::pow(evaluate(f, z), m);
  });
  return {s.mean, s.std_error()};
}

std::string kernel_to_json(const SymmetricKernel& f) {
  nlohmann::json j;
  j["order"] = f.order;
  j["basis_dim"] = f.basis_dim;
  j["entries"] = nlohmann::json::array();
  for (const auto& [a, v] : f.coeffs) j["entries"].push_back(nlohmann::json::array({a, v}));
  return j.dump();
}

SymmetricKernel kernel_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("kernel JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("order") || !j.contains("basis_dim") || !j.contains("entries"))
    throw PreconditionError("kernel JSON: needs order, basis_dim and entries");
  for (const auto& [key, value] : j.items())
    if (key != "order" && key != "basis_dim" && key != "entries")
      throw PreconditionError("kernel JSON: unknown field " + key);
  try {
    SymmetricKernel f = make_kernel(j.at("order").get<int>(), j.at("basis_dim").get<int>());
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 2) throw PreconditionError("kernel JSON: entry must be [indices, value]");
      MultiIndex a = e[0].get<MultiIndex>();
      std::sort(a.begin(), a.end());
      check_index(a, f.order, f.basis_dim);
      if (f.coeffs.count(a)) throw PreconditionError("kernel JSON: repeated index");
      f.coeffs[a] = e[1].get<double>();
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("kernel JSON: ") + e.what());
  }
}

}  // namespace chaos_stein::chaos
