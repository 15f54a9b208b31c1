#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args, const std::string& env = "") {
  std::string tmp = "cli_out.txt";
  std::string cmd = env + (env.empty() ? "" : " ") + KANTOREL_CLI_PATH + " " +
                    args + " > " + tmp + " 2>&1";
  int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(tmp);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  std::remove(tmp.c_str());
  return r;
}

}  // namespace

TEST_CASE("cases list names all eight studies") {
  CliResult r = run_cli("cases");
  CHECK(r.code == 0);
  for (const char* name :
       {"hwalk", "rtop", "rtrans", "riffle", "binom", "td0", "sgd", "pgd"})
    CHECK(r.out.find(name) != std::string::npos);
}

TEST_CASE("verdicts map to exit codes") {
  SUBCASE("holding invariant exits 0") {
    CHECK(run_cli("check-inv --case hwalk -N 2 -K 2").code == 0);
  }
  SUBCASE("failing invariant exits 1 with a witness") {
    CliResult r = run_cli(
        "check-inv --case hwalk -N 2 -K 2 --inv \"[k<1> != k<2>] * inf + "
        "[k<1> == k<2>] * dH(pos<1>, pos<2>) * pow(1/5, monus(2, k<1>))\"");
    CHECK(r.code == 1);
    CHECK(r.out.find("witness") != std::string::npos);
  }
  SUBCASE("usage errors exit 2") {
    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("check-inv --case nonesuch").code == 2);
    CHECK(run_cli("rpe --case hwalk --exp \"[k<1> !=\"").code == 2);
  }
  SUBCASE("help exits 0") {
    CHECK(run_cli("--help").code == 0);
  }
}

TEST_CASE("dist on a case reports the exact value") {
  CliResult r = run_cli("dist --case hwalk -N 3 -K 3");
  CHECK(r.code == 0);
  CHECK(r.out.find("1/4") != std::string::npos);
}

TEST_CASE("json reports parse and carry the schema version") {
  CliResult r = run_cli("lower-bound --case hwalk -N 3 -K 2 --format json");
  CHECK(r.code == 0);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j["schema_version"] == 1);
  CHECK(j["kind"] == "lower-bound");
  CHECK(j["bound"]["fraction"] == "1/4");
}

TEST_CASE("environment variables override defaults") {
  CliResult r = run_cli("lower-bound --case hwalk -N 3 -K 2",
                        "KANTOREL_FORMAT=json");
  CHECK(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["kind"] == "lower-bound");
}

TEST_CASE("csv output uses the shared column layout") {
  CliResult r = run_cli("mix --case hwalk -N 3 --Ks 0..2 --format csv");
  CHECK(r.code == 0);
  CHECK(r.out.rfind("case,N,K,tv_exact,bound,tv_uniform,trials,mean,"
                    "ci_lo,ci_hi,seed",
                    0) == 0);
  // header plus one row per K
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 4);
}

TEST_CASE("simulate verdict is reproducible for a fixed seed") {
  CliResult a = run_cli("simulate --case td0 --trials 400 --seed 9");
  CliResult b = run_cli("simulate --case td0 --trials 400 --seed 9");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("custom programs run from files") {
  const char* path = "cli_prog.pwl";
  {
    std::ofstream f(path);
    f << "program demo\nvar x : int;\n\nx :~ uniform(0 .. 1);\n";
  }
  CliResult r = run_cli(std::string("run --program ") + path + " --var x");
  std::remove(path);
  CHECK(r.code == 0);
  CHECK(r.out.find("1/2") != std::string::npos);
}

TEST_CASE("check-omega certifies the hypercube family") {
  CliResult r = run_cli("check-omega --case hwalk -N 3 -K 3 --n-max 10");
  CHECK(r.code == 0);
  CHECK(r.out.find("upper") != std::string::npos);
  CHECK(r.out.find("lower") != std::string::npos);
}
