#include "chaos_stein/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "chaos_stein/chaos.hpp"
#include "chaos_stein/couplings.hpp"
#include "chaos_stein/distances.hpp"
#include "chaos_stein/error.hpp"
#include "chaos_stein/experiments.hpp"
#include "chaos_stein/hermite.hpp"
#include "chaos_stein/malliavin.hpp"
#include "chaos_stein/rng.hpp"
#include "chaos_stein/stein.hpp"
#include "json.hpp"

namespace chaos_stein::cli {

namespace {

using Cell = std::variant<std::string, double, long long, bool>;

struct Section {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct Result {
  std::vector<Section> sections;
  bool violation = false;
};

// Results of a --selftest battery.
struct Battery {
  std::vector<std::pair<std::string, bool>> checks;
  void add(std::string name, bool pass) { checks.emplace_back(std::move(name), pass); }
};

struct Common {
  std::uint64_t seed = kDefaultSeed;
  std::string format = "csv";
  std::string output;
  bool selftest = false;
};

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

std::string render_cell(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return csv_escape(*s);
  if (const auto* d = std::get_if<double>(&c)) return std::isnan(*d) ? "nan" : experiments::format_double(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<bool>(c) ? "true" : "false";
}

void write_csv(std::ostream& out, const Result& r) {
  for (std::size_t s = 0; s < r.sections.size(); ++s) {
    const Section& sec = r.sections[s];
    if (s > 0) out << '\n';
    for (std::size_t i = 0; i < sec.columns.size(); ++i) out << (i ? "," : "") << sec.columns[i];
    out << '\n';
    for (const auto& row : sec.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << render_cell(row[i]);
      out << '\n';
    }
  }
}

void write_json(std::ostream& out, const Result& r, const std::string& command, std::uint64_t seed) {
  nlohmann::ordered_json doc;
  doc["schema"] = 1;
  doc["command"] = command;
  doc["seed"] = seed;
  doc["status"] = r.violation ? "violation" : "ok";
  nlohmann::ordered_json sections = nlohmann::ordered_json::object();
  for (const auto& sec : r.sections) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : sec.rows) {
      nlohmann::ordered_json obj;
      for (std::size_t i = 0; i < row.size(); ++i)
        std::visit([&](const auto& v) { obj[sec.columns[i]] = v; }, row[i]);
      rows.push_back(std::move(obj));
    }
    sections[sec.name] = std::move(rows);
  }
  doc["sections"] = std::move(sections);
  out << doc.dump(2) << '\n';
}

Result battery_result(const Battery& b) {
  Result r;
  Section checks{"selftest", {"check", "pass"}, {}};
  long long passed = 0;
  for (const auto& [name, ok] : b.checks) {
    checks.rows.push_back({name, ok});
    passed += ok ? 1 : 0;
  }
  const auto failed = static_cast<long long>(b.checks.size()) - passed;
  r.sections.push_back(std::move(checks));
  r.sections.push_back({"summary", {"passed", "failed"}, {{passed, failed}}});
  r.violation = failed > 0;
  return r;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

distances::DistributionHandle unit_law(const std::string& model, int trials, double p) {
  if (model == "rademacher") return distances::rademacher();
  if (model == "uniform") return distances::uniform(-std::sqrt(3.0), std::sqrt(3.0));
  return distances::standardized_binomial(trials, p);
}

// ---- stein-solve ----

struct SteinOptions {
  std::string kind = "indicator";
  std::string h = "sin";
  double x = 0.0;
  stein::Grid grid;
};

stein::TestFunction stein_test_function(const SteinOptions& o) {
  if (o.kind == "indicator") return stein::indicator(o.x);
  if (o.kind == "bounded") {
    if (o.h == "sin") return stein::bounded([](double w) { return std::sin(w); }, 1.0, "sin");
    if (o.h == "tanh") return stein::bounded([](double w) { return std::tanh(w); }, 1.0, "tanh");
    if (o.h == "atan") return stein::bounded([](double w) { return std::atan(w); }, std::numbers::pi / 2, "atan");
    throw PreconditionError("bounded --function must be sin, tanh or atan");
  }
  if (o.h == "abs") return stein::lipschitz([](double w) { return std::abs(w); }, 1.0, "abs", {0.0});
  if (o.h == "sin") return stein::lipschitz([](double w) { return std::sin(w); }, 1.0, "sin");
  if (o.h == "tanh") return stein::lipschitz([](double w) { return std::tanh(w); }, 1.0, "tanh");
  throw PreconditionError("lipschitz --function must be abs, sin or tanh");
}

Result stein_solve(const SteinOptions& o) {
  const auto h = stein_test_function(o);
  const auto report = stein::verify_solution_bounds(h, o.grid);
  Result r;
  Section s{"bounds", {"kind", "quantity", "observed", "cap", "slack", "pass", "note"}, {}};
  for (const auto& c : report.checks) {
    s.rows.push_back({stein::to_string(report.kind), c.quantity, c.observed, c.cap, c.cap - c.observed, c.pass, c.note});
    r.violation = r.violation || !c.pass;
  }
  r.sections.push_back(std::move(s));
  return r;
}

Battery stein_selftest() {
  Battery b;
  const stein::Grid coarse{-8.0, 8.0, 1e-2};
  for (double x : {-1.0, 0.0, 1.5}) {
    const auto sol = stein::solve_stein(stein::indicator(x));
    double worst = 0.0;
    for (double w = -4.0; w <= 4.0; w += 0.25)
      worst = std::max(worst, std::abs(sol(w) - stein::indicator_solution_closed_form(x, w)));
    b.add("indicator closed form at x=" + experiments::format_double(x), worst < 1e-8);
    b.add("indicator bounds at x=" + experiments::format_double(x),
          stein::verify_solution_bounds(stein::indicator(x), coarse).all_pass());
  }
  const auto sin_h = stein::bounded([](double w) { return std::sin(w); }, 1.0, "sin");
  const auto sol = stein::solve_stein(sin_h);
  double residual = 0.0;
  for (double w = -3.0; w <= 3.0; w += 0.5)
    residual = std::max(residual, std::abs((sol(w + 1e-4) - sol(w - 1e-4)) / 2e-4 - w * sol(w) - (std::sin(w) - sol.eh_z)));
  b.add("Stein equation residual by central differences", residual < 1e-6);
  b.add("E sin(Z) = 0", std::abs(stein::gaussian_expectation(sin_h)) < 1e-12);
  b.add("bounded sin caps", stein::verify_solution_bounds(sin_h, coarse).all_pass());
  b.add("lipschitz abs caps",
        stein::verify_solution_bounds(stein::lipschitz([](double w) { return std::abs(w); }, 1.0, "abs", {0.0}), coarse)
            .all_pass());
  return b;
}

// ---- berry-esseen, zero-bias, pair-check ----

struct ModelOptions {
  std::string model = "rademacher";
  int n = 100;
  int trials = 1;
  double p = 0.5;
  std::size_t draws = 1'000'000;
};

Result berry_esseen(const ModelOptions& o, std::uint64_t seed) {
  const auto model = couplings::iid_model(unit_law(o.model, o.trials, o.p), o.n);
  const auto c = couplings::berry_esseen_report(model, o.draws, seed);
  Result r;
  r.sections.push_back({"berry_esseen",
                        {"model", "n", "d_K", "tolerance", "exact", "cap", "slack", "pass"},
                        {{o.model, static_cast<long long>(o.n), c.value, c.tolerance, c.exact, c.cap, c.cap - c.value,
                          c.pass}}});
  r.violation = !c.pass;
  return r;
}

Battery couplings_selftest(std::uint64_t seed) {
  Battery b;
  for (int n : {4, 16}) {
    const auto model = couplings::iid_model(distances::rademacher(), n);
    const auto c = couplings::berry_esseen_report(model);
    b.add("exact Berry-Esseen n=" + std::to_string(n), c.exact && c.pass);
    b.add("sum gamma = 1/sqrt(n) at n=" + std::to_string(n),
          std::abs(model.sum_gamma() - 1.0 / std::sqrt(n)) < 1e-12);
  }
  const auto zb = couplings::zero_bias_distribution(couplings::make_summand(distances::rademacher()));
  double worst = 0.0;
  for (double t = -1.0; t <= 1.0; t += 0.125) worst = std::max(worst, std::abs(zb.cdf(t) - (t + 1.0) / 2.0));
  b.add("Rademacher zero-bias law is U(-1,1)", worst < 1e-14);
  const auto model = couplings::iid_model(distances::uniform(-std::sqrt(3.0), std::sqrt(3.0)), 8);
  b.add("mean gap within cap", couplings::mean_gap(model, 100000, seed).pass);
  const auto pair = couplings::make_exchangeable_pair(couplings::iid_model(distances::rademacher(), 10));
  b.add("exchangeable pair statistics", couplings::pair_statistics(pair, 100000, seed).pass());
  return b;
}

Result zero_bias(const ModelOptions& o, std::uint64_t seed) {
  const auto model = couplings::iid_model(unit_law(o.model, o.trials, o.p), o.n);
  const auto w = couplings::wasserstein_zero_bias_check(model, o.draws, seed);
  Result r;
  Section s{"zero_bias", {"check", "value", "tolerance", "cap", "slack", "pass"}, {}};
  s.rows.push_back({"mean_gap", w.gap.estimate, 4.0 * w.gap.se, w.gap.cap, w.gap.cap - w.gap.estimate, w.gap.pass});
  for (const auto& [name, c] : {std::pair{"d_W_vs_mean_gap", w.versus_mean_gap}, std::pair{"d_W_vs_gamma", w.versus_gamma}})
    s.rows.push_back({name, c.value, c.tolerance, c.cap, c.cap - c.value, c.pass});
  r.sections.push_back(std::move(s));
  r.violation = !w.pass();
  return r;
}

Result pair_check(const ModelOptions& o, std::uint64_t seed, int bins) {
  const auto pair = couplings::make_exchangeable_pair(couplings::iid_model(unit_law(o.model, o.trials, o.p), o.n));
  const auto s = couplings::pair_statistics(pair, o.draws, seed, bins);
  Result r;
  Section sec{"pair", {"statistic", "estimate", "se", "target", "pass"}, {}};
  sec.rows.push_back({"slope", s.slope, s.slope_se, s.expected_slope,
                      std::abs(s.slope - s.expected_slope) <= 4.0 * s.slope_se});
  sec.rows.push_back({"mean_T1", s.mean_t1, s.t1_se, 1.0, std::abs(s.mean_t1 - 1.0) <= 4.0 * s.t1_se});
  sec.rows.push_back(
      {"antisymmetry", s.antisymmetry, s.antisymmetry_se, 0.0, std::abs(s.antisymmetry) <= 4.0 * s.antisymmetry_se});
  r.sections.push_back(std::move(sec));
  r.sections.push_back({"tv_bound",
                        {"bound_mean", "se_mean", "bound_var", "se_var", "bins"},
                        {{s.tv.bound_mean, s.tv.se_mean, s.tv.bound_var, s.tv.se_var, static_cast<long long>(s.tv.bins)}}});
  r.violation = !s.pass();
  return r;
}

// ---- product-check, fourth-moment, tv-bound ----

chaos::SymmetricKernel load_kernel(const std::string& path) { return chaos::kernel_from_json(read_file(path)); }

struct ProductOptions {
  std::string kernel_a, kernel_b;
  int pairs = 200;
  int max_order = 3;
  int max_dim = 5;
  std::size_t points = 1000;
};

inline constexpr double kProductTolerance = 1e-8;

Result product_check(const ProductOptions& o, std::uint64_t seed) {
  Result r;
  Section s{"pairs", {"pair", "order_a", "order_b", "basis_dim", "max_rel_deviation", "pass"}, {}};
  double worst = 0.0;
  const auto record = [&](long long idx, const chaos::SymmetricKernel& a, const chaos::SymmetricKernel& b, Rng& rng) {
    const double dev = chaos::product_deviation(chaos::integral(a), chaos::integral(b), o.points, rng);
    worst = std::max(worst, dev);
    s.rows.push_back({idx, static_cast<long long>(a.order), static_cast<long long>(b.order),
                      static_cast<long long>(a.basis_dim), dev, dev < kProductTolerance});
  };
  if (!o.kernel_a.empty() || !o.kernel_b.empty()) {
    if (o.kernel_a.empty() || o.kernel_b.empty()) throw PreconditionError("give both --kernel-a and --kernel-b");
    Rng rng = make_rng(seed, 0xC11);
    record(0, load_kernel(o.kernel_a), load_kernel(o.kernel_b), rng);
  } else {
    if (o.pairs < 1 || o.max_order < 1 || o.max_dim < 1) throw PreconditionError("--pairs, --max-order, --max-dim must be positive");
    for (int i = 0; i < o.pairs; ++i) {
      Rng rng = make_rng(seed, 0xC12, static_cast<std::uint64_t>(i));
      const int dim = std::uniform_int_distribution<int>(1, o.max_dim)(rng);
      const int p = std::uniform_int_distribution<int>(1, o.max_order)(rng);
      const int q = std::uniform_int_distribution<int>(1, o.max_order)(rng);
      const auto a = chaos::random_kernel(p, dim, rng);
      const auto b = chaos::random_kernel(q, dim, rng);
      record(i, a, b, rng);
    }
  }
  r.sections.push_back(std::move(s));
  r.sections.push_back({"summary", {"pairs", "max_rel_deviation", "tolerance", "pass"},
                        {{static_cast<long long>(r.sections[0].rows.size()), worst, kProductTolerance,
                          worst < kProductTolerance}}});
  r.violation = !(worst < kProductTolerance);
  return r;
}

Battery chaos_selftest(std::uint64_t seed) {
  Battery b;
  const auto e = chaos::integral(chaos::basis_power(1, 1, 1));
  const auto sq = chaos::multiply(e, e);
  b.add("Z^2 = I_2(e x e) + 1",
        sq.constant == 1.0 && sq.kernels.size() == 1 && sq.kernels.at(2).coefficient({1, 1}) == 1.0);
  Rng rng = make_rng(seed, 0xC13);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const auto a = chaos::random_kernel(1 + i % 3, 1 + i % 4, rng);
    const auto c = chaos::random_kernel(1 + (i / 3) % 3, 1 + i % 4, rng);
    worst = std::max(worst, chaos::product_deviation(chaos::integral(a), chaos::integral(c), 50, rng));
  }
  b.add("product formula on 20 random pairs", worst < kProductTolerance);
  const auto half = chaos::scaled(chaos::basis_power(1, 2, 1), 1.0 / std::numbers::sqrt2);
  b.add("E F^4 = 15 for (e x e)/sqrt 2", std::abs(chaos::moment(chaos::integral(half), 4) - 15.0) < 1e-12);
  const auto k = chaos::random_kernel(3, 3, rng);
  b.add("kernel JSON round trip", chaos::kernel_from_json(chaos::kernel_to_json(k)).coeffs == k.coeffs);
  b.add("hypercontractivity", chaos::hypercontractivity_check(k).pass);
  return b;
}

Battery malliavin_selftest(std::uint64_t seed) {
  Battery b;
  const auto half = chaos::scaled(chaos::basis_power(1, 2, 1), 1.0 / std::numbers::sqrt2);
  b.add("Var T = 2 for (e x e)/sqrt 2", std::abs(malliavin::variance_T_formula(half) - 2.0) < 1e-12);
  b.add("fourth moment identity = 15", std::abs(malliavin::fourth_moment_identity(half) - 15.0) < 1e-12);
  const auto first = chaos::integral(chaos::basis_power(1, 1, 2));
  const auto t = malliavin::gamma_T(first);
  b.add("T = 1 in the first chaos", t.constant == 1.0 && malliavin::variance(t) == 0.0);
  Rng rng = make_rng(seed, 0xC14);
  bool ibp = true, identity = true, stein_id = true;
  for (int i = 0; i < 10; ++i) {
    const int dim = 1 + i % 3;
    const auto f = chaos::integral(chaos::random_kernel(1 + i % 3, dim, rng)) +
                   chaos::integral(chaos::random_kernel(1 + (i + 1) % 3, dim, rng));
    const auto g = chaos::integral(chaos::random_kernel(1 + (i + 2) % 3, dim, rng));
    ibp = ibp && malliavin::integration_by_parts_check(f, g).pass;
    stein_id = stein_id && malliavin::stein_identity_check(f, {0.3, -1.0, 0.5, 0.25}).pass;
    const auto k = chaos::random_kernel(1 + i % 3, dim, rng);
    const double exact = chaos::moment(chaos::integral(k), 4);
    identity = identity && std::abs(malliavin::fourth_moment_identity(k) - exact) <= 1e-8 * exact;
  }
  b.add("integration by parts on 10 pairs", ibp);
  b.add("Stein identity on 10 functionals", stein_id);
  b.add("fourth moment identity on 10 kernels", identity);
  return b;
}

struct FourthOptions {
  std::string kernel;
  bool normalize = false;
  std::size_t draws = 200000;
};

Result fourth_moment(const FourthOptions& o, std::uint64_t seed) {
  if (o.kernel.empty()) throw PreconditionError("--kernel is required");
  auto f = load_kernel(o.kernel);
  if (o.normalize) {
    const double second = hermite::factorial(f.order) * f.norm_squared();
    if (!(second > 0.0)) throw PreconditionError("cannot normalise a zero kernel");
    f = chaos::scaled(f, 1.0 / std::sqrt(second));
  }
  const auto rep = malliavin::fourth_moment_tv_bound(f, o.draws, seed);
  Result r;
  r.sections.push_back({"fourth_moment",
                        {"order", "fourth_moment", "cap", "distance", "distance_error", "slack", "method", "var_T",
                         "var_T_cap", "var_inequality"},
                        {{static_cast<long long>(rep.order), rep.fourth_moment, rep.tv.cap, rep.tv.quantity,
                          rep.tv.quantity_error, rep.tv.slack, rep.tv.method, rep.var_T, rep.var_T_cap,
                          rep.var_inequality}}});
  r.violation = rep.tv.slack < -rep.tv.quantity_error || !rep.var_inequality;
  return r;
}

struct TvOptions {
  std::vector<std::string> kernels;
  std::size_t draws = 200000;
  int bins = 50;
};

Result tv_bound(const TvOptions& o, std::uint64_t seed) {
  if (o.kernels.empty()) throw PreconditionError("at least one --kernel is required");
  std::vector<chaos::SymmetricKernel> ks;
  for (const auto& path : o.kernels) ks.push_back(load_kernel(path));
  chaos::ChaosVector f = chaos::constant_vector(0.0, ks.front().basis_dim);
  for (const auto& k : ks) {
    if (k.basis_dim != f.basis_dim) throw PreconditionError("kernels must share basis_dim");
    f = f + chaos::integral(k);
  }
  const auto rep = malliavin::tv_bound_from_gamma(f, o.draws, seed, o.bins);
  Result r;
  r.sections.push_back({"tv_bound",
                        {"mean_T", "var_T", "conservative_cap", "bound_mean", "se_mean", "bound_var", "se_var",
                         "ordering"},
                        {{rep.mean_T, rep.var_T, rep.conservative_cap, rep.bound_mean, rep.se_mean, rep.bound_var,
                          rep.se_var, rep.ordering}}});
  r.violation = !rep.ordering;
  return r;
}

// ---- breuer-major, fbm-qv ----

struct BreuerOptions {
  std::string family = "fbm";
  double hurst = 0.6;
  std::size_t n = 1024;
  std::size_t paths = 100000;
  std::vector<double> coeffs{0.0, 0.0, 1.0};
};

Result breuer_major(const BreuerOptions& o, std::uint64_t seed) {
  hermite::CoefficientSeries series;
  series.coeffs = o.coeffs;
  series.truncation_order = static_cast<int>(o.coeffs.size()) - 1;
  const auto spec = o.family == "iid" ? experiments::iid_spec(o.n) : experiments::fbm_spec(o.hurst, o.n);
  const auto rep = experiments::bm_simulate(series, spec, o.paths, seed);
  Result r;
  r.sections.push_back({"breuer_major",
                        {"family", "hurst", "n", "paths", "sigma2", "variance_n", "d_K", "dkw_epsilon"},
                        {{o.family, o.family == "iid" ? std::numeric_limits<double>::quiet_NaN() : o.hurst,
                          static_cast<long long>(o.n), static_cast<long long>(o.paths), rep.sigma2, rep.variance_n,
                          rep.kolmogorov.value, rep.kolmogorov.error_bound}}});
  return r;
}

Battery experiments_selftest() {
  Battery b;
  const auto h2 = hermite::pure_hermite(2);
  b.add("sigma^2 = 2 for He_2 iid", experiments::bm_sigma2(h2, experiments::iid_spec(8), 2) == 2.0);
  const auto spec = experiments::fbm_spec(0.7, 32);
  b.add("E V_n^2 = 2 tr(R^2)/n",
        std::abs(experiments::bm_variance_n(h2, spec) -
                 2.0 * experiments::toeplitz_covariance(spec).squaredNorm() / 32.0) < 1e-12);
  bool summability = false;
  try {
    experiments::bm_sigma2(h2, experiments::fbm_spec(0.8, 8), 2);
  } catch (const SummabilityError&) {
    summability = true;
  }
  b.add("divergent covariance sum rejected", summability);
  b.add("sigma_n^2 = 2n at H = 1/2", experiments::qv_sigma_n_sq(0.5, 37) == 74.0);
  b.add("fourth cumulant 12/n at H = 1/2", std::abs(experiments::qv_fourth_cumulant_exact(0.5, 40) - 0.3) < 1e-14);
  bool ordered = true;
  for (double h : {0.2, 0.5, 0.625, 0.7, 0.75})
    for (std::size_t n : {4, 32, 128}) {
      const auto rep = experiments::qv_report(h, n);
      ordered = ordered && rep.fourth_cumulant_exact <= rep.fourth_cumulant_bound * (1.0 + 1e-12);
    }
  b.add("exact cumulant below its bound", ordered);
  for (double h = 0.05; h < 1.0; h += 0.15) {
    bool psd = true;
    try {
      experiments::covariance_factor(experiments::fbm_spec(h, 64));
    } catch (const PreconditionError&) {
      psd = false;
    }
    b.add("covariance PSD at H=" + experiments::format_double(h), psd);
  }
  return b;
}

struct QvOptions {
  std::vector<double> hurst{0.7};
  std::vector<std::size_t> n{256, 1024, 4096};
};

Result fbm_qv(const QvOptions& o) {
  const auto table = experiments::qv_rate_table(o.hurst, o.n);
  Result r;
  Section rows{"qv", {"H", "n", "sigma_n_sq", "k4_exact", "k4_bound", "m3", "m_stat"}, {}};
  for (const auto& q : table.rows) {
    rows.rows.push_back({q.hurst, static_cast<long long>(q.n), q.sigma_n_sq, q.fourth_cumulant_exact,
                         q.fourth_cumulant_bound, q.third_moment, q.m_stat});
    r.violation = r.violation || q.fourth_cumulant_exact > q.fourth_cumulant_bound * (1.0 + 1e-12);
  }
  Section slopes{"slopes",
                 {"H", "sqrt_k4_slope", "expected_sqrt_k4_slope", "m_stat_slope", "expected_m_stat_slope",
                  "sqrt_k4_log_n_min", "sqrt_k4_log_n_max"},
                 {}};
  for (const auto& f : table.fits)
    slopes.rows.push_back({f.hurst, f.sqrt_cumulant_slope, f.expected_sqrt_cumulant_slope, f.m_stat_slope,
                           f.expected_m_stat_slope, f.log_scaled_min, f.log_scaled_max});
  r.sections.push_back(std::move(rows));
  r.sections.push_back(std::move(slopes));
  return r;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "64-bit seed")->capture_default_str();
  sub->add_option("--format", c.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  sub->add_option("--output", c.output, "output file (default: standard output)");
  sub->add_flag("--selftest", c.selftest, "run the invariant battery instead");
}

void add_model(CLI::App* sub, ModelOptions& m) {
  sub->add_option("--model", m.model, "unit summand law")
      ->check(CLI::IsMember({"rademacher", "uniform", "binomial"}))
      ->capture_default_str();
  sub->add_option("--n", m.n, "number of summands")->check(CLI::Range(1, 1 << 24))->capture_default_str();
  sub->add_option("--trials", m.trials, "binomial trials per summand")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--p", m.p, "binomial success probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--draws", m.draws, "Monte-Carlo draws")->check(CLI::PositiveNumber)->capture_default_str();
}

std::string threads_problem() {
  const char* env = std::getenv("CHAOS_STEIN_THREADS");
  if (env == nullptr) return {};
  const std::string v = env;
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos || std::stoll(v) < 1)
    return "CHAOS_STEIN_THREADS must be a positive integer, got '" + v + "'";
  return {};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stein's method and Wiener chaos experiments", "chaos-stein"};
  app.require_subcommand(1);
  Common common;
  SteinOptions stein_opts;
  ModelOptions model_opts;
  int pair_bins = 11;
  ProductOptions product_opts;
  FourthOptions fourth_opts;
  TvOptions tv_opts;
  BreuerOptions bm_opts;
  QvOptions qv_opts;

  auto* s_stein = app.add_subcommand("stein-solve", "Stein solution bounds for one test function");
  add_common(s_stein, common);
  s_stein->add_option("--kind", stein_opts.kind)->check(CLI::IsMember({"indicator", "bounded", "lipschitz"}))->capture_default_str();
  s_stein->add_option("--function", stein_opts.h, "sin|tanh|atan (bounded), abs|sin|tanh (lipschitz)")->capture_default_str();
  s_stein->add_option("--x", stein_opts.x, "indicator threshold")->capture_default_str();
  s_stein->add_option("--lo", stein_opts.grid.lo)->capture_default_str();
  s_stein->add_option("--hi", stein_opts.grid.hi)->capture_default_str();
  s_stein->add_option("--step", stein_opts.grid.step)->check(CLI::PositiveNumber)->capture_default_str();

  auto* s_be = app.add_subcommand("berry-esseen", "Kolmogorov distance of a normalised iid sum against 7.1 sum E|X|^3");
  add_common(s_be, common);
  add_model(s_be, model_opts);
  auto* s_zb = app.add_subcommand("zero-bias", "Wasserstein distance against the zero-bias caps");
  add_common(s_zb, common);
  add_model(s_zb, model_opts);
  auto* s_pair = app.add_subcommand("pair-check", "Exchangeable-pair regression, T1 and antisymmetry");
  add_common(s_pair, common);
  add_model(s_pair, model_opts);
  s_pair->add_option("--bins", pair_bins)->check(CLI::Range(10, 100000))->capture_default_str();

  auto* s_prod = app.add_subcommand("product-check", "Product formula against pointwise products");
  add_common(s_prod, common);
  s_prod->add_option("--kernel-a", product_opts.kernel_a, "kernel JSON file");
  s_prod->add_option("--kernel-b", product_opts.kernel_b, "kernel JSON file");
  s_prod->add_option("--pairs", product_opts.pairs)->capture_default_str();
  s_prod->add_option("--max-order", product_opts.max_order)->capture_default_str();
  s_prod->add_option("--max-dim", product_opts.max_dim)->capture_default_str();
  s_prod->add_option("--points", product_opts.points)->check(CLI::PositiveNumber)->capture_default_str();

  auto* s_fm = app.add_subcommand("fourth-moment", "Total-variation distance against the fourth-moment cap");
  add_common(s_fm, common);
  s_fm->add_option("--kernel", fourth_opts.kernel, "kernel JSON file");
  s_fm->add_flag("--normalize", fourth_opts.normalize, "rescale to unit variance first");
  s_fm->add_option("--draws", fourth_opts.draws)->check(CLI::PositiveNumber)->capture_default_str();

  auto* s_tv = app.add_subcommand("tv-bound", "Binned total-variation bound from (F, T)");
  add_common(s_tv, common);
  s_tv->add_option("--kernel", tv_opts.kernels, "kernel JSON file; repeat to sum chaos components");
  s_tv->add_option("--draws", tv_opts.draws)->check(CLI::Range(std::size_t{1000}, std::size_t{1} << 30))->capture_default_str();
  s_tv->add_option("--bins", tv_opts.bins)->check(CLI::Range(10, 100000))->capture_default_str();

  auto* s_bm = app.add_subcommand("breuer-major", "Simulated V_n against its normal limit");
  add_common(s_bm, common);
  s_bm->add_option("--family", bm_opts.family)->check(CLI::IsMember({"fbm", "iid"}))->capture_default_str();
  s_bm->add_option("--hurst", bm_opts.hurst)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  s_bm->add_option("--n", bm_opts.n)->check(CLI::Range(std::size_t{1}, experiments::kMaxDenseLength))->capture_default_str();
  s_bm->add_option("--paths", bm_opts.paths)->check(CLI::PositiveNumber)->capture_default_str();
  s_bm->add_option("--coeffs", bm_opts.coeffs, "Hermite coefficients a_0,a_1,...")->delimiter(',');

  auto* s_qv = app.add_subcommand("fbm-qv", "Quadratic-variation cumulants and fitted rates");
  add_common(s_qv, common);
  s_qv->add_option("--hurst", qv_opts.hurst, "comma-separated Hurst indices")->delimiter(',');
  s_qv->add_option("--n", qv_opts.n, "comma-separated powers of two")->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "chaos-stein: " << e.what() << '\n';
    return kExitUsage;
  }
  if (const auto problem = threads_problem(); !problem.empty()) {
    err << "chaos-stein: " << problem << '\n';
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();

  Result result;
  try {
    if (common.selftest) {
      if (command == "stein-solve") result = battery_result(stein_selftest());
      else if (command == "berry-esseen" || command == "zero-bias" || command == "pair-check")
        result = battery_result(couplings_selftest(common.seed));
      else if (command == "product-check") result = battery_result(chaos_selftest(common.seed));
      else if (command == "fourth-moment" || command == "tv-bound")
        result = battery_result(malliavin_selftest(common.seed));
      else result = battery_result(experiments_selftest());
    } else if (command == "stein-solve") {
      result = stein_solve(stein_opts);
    } else if (command == "berry-esseen") {
      result = berry_esseen(model_opts, common.seed);
    } else if (command == "zero-bias") {
      result = zero_bias(model_opts, common.seed);
    } else if (command == "pair-check") {
      result = pair_check(model_opts, common.seed, pair_bins);
    } else if (command == "product-check") {
      result = product_check(product_opts, common.seed);
    } else if (command == "fourth-moment") {
      result = fourth_moment(fourth_opts, common.seed);
    } else if (command == "tv-bound") {
      result = tv_bound(tv_opts, common.seed);
    } else if (command == "breuer-major") {
      result = breuer_major(bm_opts, common.seed);
    } else {
      result = fbm_qv(qv_opts);
    }
  } catch (const std::exception& e) {
    err << "chaos-stein " << command << ": " << e.what() << '\n';
    return kExitUsage;
  }

  std::ofstream file;
  std::ostream* sink = &out;
  if (!common.output.empty()) {
    file.open(common.output, std::ios::binary | std::ios::trunc);
    if (!file) {
      err << "chaos-stein: cannot open " << common.output << " for writing\n";
      return kExitUsage;
    }
    sink = &file;
  }
  if (common.format == "json") write_json(*sink, result, command, common.seed);
  else write_csv(*sink, result);
  sink->flush();
  if (!*sink) {
    err << "chaos-stein: write failed\n";
    return kExitUsage;
  }
  return result.violation ? kExitViolation : kExitOk;
}

}  // namespace chaos_stein::cli
