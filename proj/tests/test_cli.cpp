#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "chaos_stein/chaos.hpp"
#include "chaos_stein/cli.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace chaos_stein;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome call(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path tmp_dir() {
  const char* env = std::getenv("CHAOS_STEIN_TMP");
  fs::path p = env ? fs::path(env) : fs::temp_directory_path();
  p /= "cli_scratch";
  fs::create_directories(p);
  return p;
}

std::string write_file(const std::string& name, const std::string& text) {
  const fs::path p = tmp_dir() / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_CASE("fbm-qv emits the table and a slope summary") {
  const auto r = call({"fbm-qv", "--hurst", "0.7", "--n", "256,1024,4096", "--format", "csv"});
  CHECK(r.code == cli::kExitOk);
  const auto l = lines(r.out);
  REQUIRE(l.size() == 7);
  CHECK(l[0] == "H,n,sigma_n_sq,k4_exact,k4_bound,m3,m_stat");
  CHECK(l[1].rfind("0.69999999999999996,256,", 0) == 0);
  CHECK(l[3].rfind("0.69999999999999996,4096,", 0) == 0);
  CHECK(l[4].empty());
  CHECK(l[5].rfind("H,sqrt_k4_slope,", 0) == 0);
  CHECK(l[6].rfind("0.69999999999999996,", 0) == 0);
}

TEST_CASE("identical configuration and seed give identical bytes") {
  const fs::path a = tmp_dir() / "be_a.csv", b = tmp_dir() / "be_b.csv";
  const std::vector<std::string> base{"berry-esseen", "--model", "rademacher", "--n", "100", "--seed", "42", "--output"};
  auto args = base;
  args.push_back(a.string());
  CHECK(call(args).code == cli::kExitOk);
  args = base;
  args.push_back(b.string());
  CHECK(call(args).code == cli::kExitOk);
  CHECK(!slurp(a).empty());
  CHECK(slurp(a) == slurp(b));

  // Monte-Carlo output does not depend on the worker count.
  const std::vector<std::string> mc{"berry-esseen", "--model", "uniform", "--n", "30", "--draws", "100000", "--seed", "7"};
  ::setenv("CHAOS_STEIN_THREADS", "1", 1);
  const auto one = call(mc);
  ::setenv("CHAOS_STEIN_THREADS", "3", 1);
  const auto three = call(mc);
  ::unsetenv("CHAOS_STEIN_THREADS");
  CHECK(one.code == cli::kExitOk);
  CHECK(one.out == three.out);
  const auto other_seed = call({"berry-esseen", "--model", "uniform", "--n", "30", "--draws", "100000", "--seed", "8"});
  CHECK(other_seed.out != one.out);
}

TEST_CASE("the installed binary matches the library entry point") {
  const char* exe = std::getenv("CHAOS_STEIN_CLI");
  if (exe == nullptr) return;
  const fs::path a = tmp_dir() / "bin_a.csv", b = tmp_dir() / "bin_b.csv";
  const std::string cmd = std::string(exe) + " berry-esseen --model rademacher --n 100 --seed 42 --output ";
  CHECK(std::system((cmd + a.string()).c_str()) == 0);
  CHECK(std::system((cmd + b.string()).c_str()) == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) == call({"berry-esseen", "--model", "rademacher", "--n", "100", "--seed", "42"}).out);
  CHECK(std::system((std::string(exe) + " no-such-command 2>/dev/null").c_str()) != 0);
}

TEST_CASE("fourth-moment with a first-chaos kernel") {
  const std::string path = write_file("first.json", chaos::kernel_to_json(chaos::basis_power(2, 1, 3)));
  const auto r = call({"fourth-moment", "--kernel", path, "--format", "json"});
  CHECK(r.code == cli::kExitOk);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["schema"] == 1);
  CHECK(doc["status"] == "ok");
  const auto& row = doc["sections"]["fourth_moment"][0];
  CHECK(row["order"] == 1);
  CHECK(row["cap"].get<double>() == 0.0);
  CHECK(row["distance"].get<double>() == 0.0);
}

TEST_CASE("fourth-moment normalisation") {
  const std::string path = write_file("square.json", chaos::kernel_to_json(chaos::basis_power(1, 2, 1)));
  CHECK(call({"fourth-moment", "--kernel", path}).code == cli::kExitUsage);
  const auto r = call({"fourth-moment", "--kernel", path, "--normalize", "--format", "json"});
  CHECK(r.code == cli::kExitOk);
  const auto row = nlohmann::json::parse(r.out)["sections"]["fourth_moment"][0];
  CHECK(row["fourth_moment"].get<double>() == doctest::Approx(15.0));
  CHECK(row["cap"].get<double>() == doctest::Approx(2.0 * std::numbers::sqrt2));
  CHECK(row["var_inequality"] == true);
}

TEST_CASE("other subcommands") {
  const auto stein_run = call({"stein-solve", "--kind", "indicator", "--x", "0.5", "--step", "0.01"});
  CHECK(stein_run.code == cli::kExitOk);
  CHECK(lines(stein_run.out).at(0) == "kind,quantity,observed,cap,slack,pass,note");
  CHECK(call({"stein-solve", "--kind", "lipschitz", "--function", "abs", "--step", "0.01"}).code == cli::kExitOk);
  CHECK(call({"stein-solve", "--kind", "bounded", "--function", "abs"}).code == cli::kExitUsage);

  CHECK(call({"zero-bias", "--model", "rademacher", "--n", "16"}).code == cli::kExitOk);
  CHECK(call({"pair-check", "--model", "rademacher", "--n", "20", "--draws", "200000"}).code == cli::kExitOk);
  CHECK(call({"product-check", "--pairs", "10", "--points", "100"}).code == cli::kExitOk);

  const std::string a = write_file("pa.json", chaos::kernel_to_json(chaos::basis_power(1, 2, 2)));
  const std::string b = write_file("pb.json", chaos::kernel_to_json(chaos::basis_power(2, 1, 2)));
  const auto prod = call({"product-check", "--kernel-a", a, "--kernel-b", b, "--format", "json"});
  CHECK(prod.code == cli::kExitOk);
  CHECK(nlohmann::json::parse(prod.out)["sections"]["summary"][0]["pass"] == true);
  CHECK(call({"product-check", "--kernel-a", a}).code == cli::kExitUsage);

  const auto tv = call({"tv-bound", "--kernel", a, "--kernel", b, "--draws", "20000"});
  CHECK(tv.code == cli::kExitOk);
  const auto bm = call({"breuer-major", "--family", "iid", "--n", "16", "--paths", "20000", "--format", "json"});
  CHECK(bm.code == cli::kExitOk);
  CHECK(nlohmann::json::parse(bm.out)["sections"]["breuer_major"][0]["sigma2"].get<double>() == 2.0);
  CHECK(call({"breuer-major", "--hurst", "0.8", "--n", "16", "--paths", "100"}).code == cli::kExitUsage);
}

TEST_CASE("usage and IO errors") {
  CHECK(call({}).code == cli::kExitUsage);
  CHECK(call({"no-such-command"}).code == cli::kExitUsage);
  CHECK(call({"berry-esseen", "--unknown-key", "3"}).code == cli::kExitUsage);
  CHECK(call({"berry-esseen", "--format", "xml"}).code == cli::kExitUsage);
  CHECK(call({"berry-esseen", "--model", "cauchy"}).code == cli::kExitUsage);
  CHECK(call({"fourth-moment", "--kernel", (tmp_dir() / "missing.json").string()}).code == cli::kExitUsage);
  const std::string bad = write_file("bad.json", R"({"order":1,"basis_dim":1,"entries":[[[1],1.0]],"extra":0})");
  CHECK(call({"fourth-moment", "--kernel", bad}).code == cli::kExitUsage);
  CHECK(call({"berry-esseen", "--output", (tmp_dir() / "no_dir" / "x.csv").string()}).code == cli::kExitUsage);
  ::setenv("CHAOS_STEIN_THREADS", "zero", 1);
  CHECK(call({"berry-esseen", "--n", "4"}).code == cli::kExitUsage);
  ::setenv("CHAOS_STEIN_THREADS", "0", 1);
  CHECK(call({"berry-esseen", "--n", "4"}).code == cli::kExitUsage);
  ::unsetenv("CHAOS_STEIN_THREADS");
  const auto help = call({"--help"});
  CHECK(help.code == cli::kExitOk);
  CHECK(help.out.find("fbm-qv") != std::string::npos);
}

TEST_CASE("every subcommand has a passing selftest") {
  for (const char* sub : {"stein-solve", "berry-esseen", "zero-bias", "pair-check", "product-check", "fourth-moment",
                          "tv-bound", "breuer-major", "fbm-qv"}) {
    CAPTURE(sub);
    const auto r = call({sub, "--selftest", "--format", "json"});
    CHECK(r.code == cli::kExitOk);
    const auto doc = nlohmann::json::parse(r.out);
    CHECK(doc["sections"]["summary"][0]["failed"] == 0);
    CHECK(doc["sections"]["summary"][0]["passed"].get<int>() > 0);
  }
}
