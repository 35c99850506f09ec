#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
};

const std::string& cli_bin() {
  static const std::string bin = [] {
    const char* env = std::getenv("FYLAB_CLI_BIN");
    REQUIRE_MESSAGE(env != nullptr, "FYLAB_CLI_BIN must point at the binary");
    return std::string(env);
  }();
  return bin;
}

// Runs the CLI through the shell, capturing stdout; stderr is dropped.
CmdResult run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd =
      (env.empty() ? "" : env + " ") + cli_bin() + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CmdResult r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int rc = pclose(pipe);
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

const fs::path& work_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() /
                 ("fylab-cli-test-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: ", p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("analyze emits the loss constants as JSON") {
  const fs::path out = work_root() / "an";
  CmdResult r = run_cli("analyze --loss tsallis --q 2 --out " + out.string() +
                        " --label t2");
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc.at("loss") == "tsallis(q=2)");
  CHECK(doc.at("margin").get<double>() == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(doc.at("alpha").get<double>() == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(doc.at("alpha_converged") == true);
  CHECK(doc.at("beta_hat").get<double>() ==
        doctest::Approx(0.25).epsilon(1e-6));
  CHECK(doc.at("c_g").get<double>() == 1.0);
  CHECK(doc.at("self_bounding").at("classification") == "not-self-bounding");
  REQUIRE(doc.at("rho").size() == 7);
  CHECK(doc.at("rho")[0].at("lambda").get<double>() == 1.0);
  CHECK(doc.at("rho")[6].at("lambda").get<double>() == 1e6);
  // every rho sample respects the margin cap m^2 = 4
  for (const auto& s : doc.at("rho"))
    CHECK(s.at("value").get<double>() <= 4.0 * (1.0 + 1e-9));

  // the artifact file carries the same bytes that went to stdout
  CHECK(slurp(out / "analyze/t2/analysis.json") == r.out);
  const json meta = json::parse(slurp(out / "analyze/t2/meta.json"));
  CHECK(meta.at("command") == "analyze");
  CHECK(meta.at("loss") == "tsallis(q=2)");
}

TEST_CASE("analyze reports non-converging and nonsmooth cases honestly") {
  const fs::path out = work_root() / "an2";
  CmdResult ps = run_cli("analyze --loss pseudospherical --q 2 --out " +
                         out.string() + " --label ps");
  REQUIRE(ps.exit_code == 0);
  const json psdoc = json::parse(ps.out);
  CHECK(psdoc.at("alpha_converged") == false);
  CHECK(psdoc.at("c_phi").is_null());
  CHECK(psdoc.contains("note"));

  CmdResult hg = run_cli("analyze --loss hinge --out " + out.string() +
                         " --label hinge");
  REQUIRE(hg.exit_code == 0);
  const json hgdoc = json::parse(hg.out);
  CHECK(hgdoc.at("margin").get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(hgdoc.at("alpha").is_null());
  CHECK(hgdoc.at("c_phi").is_null());
  CHECK(hgdoc.at("beta_hat") == "inf");
  CHECK(hgdoc.at("note").get<std::string>().find("nonsmooth") !=
        std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
  const std::string out = " --out " + (work_root() / "usage").string();
  CHECK(run_cli("analyze --loss nosuch" + out).exit_code == 2);
  CHECK(run_cli("analyze" + out).exit_code == 2);         // --loss required
  CHECK(run_cli("verify bogus" + out).exit_code == 2);    // unknown scope
  CHECK(run_cli("nosuchcommand").exit_code == 2);
  CHECK(run_cli("analyze --loss shannon --nosuchflag x" + out).exit_code == 2);
  CHECK(run_cli("rates --loss tsallis --q 2 --eps 0" + out).exit_code == 2);
  CHECK(run_cli("rates --loss tsallis --q 2 --eps 0.7" + out).exit_code == 2);
  CHECK(run_cli("pilot --eta -1" + out).exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
}

TEST_CASE("pilot sweep writes per-run traces and a sorted summary") {
  const fs::path out = work_root() / "pi";
  CmdResult r = run_cli("pilot --steps 500 --record-every 1 --threads 4 "
                        "--out " + out.string() + " --label sweep");
  REQUIRE(r.exit_code == 0);
  const fs::path dir = out / "pilot/sweep";

  const json summary = json::parse(r.out);
  REQUIRE(summary.size() == 12);  // 4 default losses x 3 default stepsizes
  // sorted by (loss, eta)
  CHECK(summary[0].at("loss") == "shannon");
  CHECK(summary[0].at("eta").get<double>() == 1.0);
  CHECK(summary[2].at("eta").get<double>() == 16.0);
  CHECK(summary[3].at("loss") == "tsallis(q=0.5)");
  for (const auto& row : summary) {
    CHECK(row.at("steps").get<long long>() == 500);
    CHECK(row.at("diverged") == false);
    CHECK(row.at("min_risk").get<double>() <=
          row.at("final_risk").get<double>() + 1e-18);
    CHECK(row.at("sup_norm").get<double>() > 0.0);
    CHECK(row.at("hits").size() == 4);
    CHECK(fs::exists(dir / row.at("trace").get<std::string>()));
  }
  // the reference convergence example: tsallis 2 at the largest stepsize
  for (const auto& row : summary) {
    if (row.at("loss") == "tsallis(q=2)" &&
        row.at("eta").get<double>() == 16.0)
      CHECK(row.at("min_risk").get<double>() <= 1e-8);
  }

  const std::string csv = slurp(dir / "shannon-eta1.csv");
  CHECK(csv.rfind("t,risk,min_risk,grad_norm,w_norm,alignment,g_potential,"
                  "cum_g,sharpness,min_margin",
                  0) == 0);

  const json meta = json::parse(slurp(dir / "meta.json"));
  CHECK(meta.at("command") == "pilot");
  CHECK(meta.at("certificate").at("gamma").get<double>() ==
        doctest::Approx(0.2).epsilon(1e-9));
  CHECK(meta.at("losses").size() == 4);
}

TEST_CASE("pilot artifacts are deterministic and thread-invariant") {
  const fs::path a = work_root() / "det-a";
  const fs::path b = work_root() / "det-b";
  REQUIRE(run_cli("pilot --loss tsallis:2,logistic --eta 4,16 --steps 400 "
                  "--threads 4 --out " + a.string() + " --label d").exit_code == 0);
  REQUIRE(run_cli("pilot --loss tsallis:2,logistic --eta 4,16 --steps 400 "
                  "--threads 4 --out " + b.string() + " --label d").exit_code == 0);
  for (const char* f :
       {"summary.json", "meta.json", "tsallisq2-eta16.csv",
        "shannon-eta4.csv"})
    CHECK(slurp(a / "pilot/d" / f) == slurp(b / "pilot/d" / f));

  // different worker count: identical traces and summary
  const fs::path c = work_root() / "det-c";
  REQUIRE(run_cli("pilot --loss tsallis:2,logistic --eta 4,16 --steps 400 "
                  "--threads 1 --out " + c.string() + " --label d").exit_code == 0);
  for (const char* f : {"summary.json", "tsallisq2-eta16.csv"})
    CHECK(slurp(a / "pilot/d" / f) == slurp(c / "pilot/d" / f));
}

TEST_CASE("rates compares hitting times against the bound curve") {
  const fs::path out = work_root() / "ra";
  CmdResult r = run_cli("rates --loss renyi --q 2 --eta 16 --out " +
                        out.string() + " --label r2");
  REQUIRE(r.exit_code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc.at("loss") == "renyi(q=2)");
  CHECK(doc.at("theory_alpha").get<double>() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-3));
  REQUIRE(doc.at("eps").size() == 3);
  REQUIRE(doc.at("hitting_times").size() == 3);
  long long prev = -1;
  for (std::size_t i = 0; i < 3; ++i) {
    const long long t = doc.at("hitting_times")[i].get<long long>();
    REQUIRE(t >= 0);
    CHECK(t >= prev);
    prev = t;
    CHECK(doc.at("within_bound")[i] == true);
    CHECK(static_cast<double>(t) <=
          doc.at("bounds")[i].get<double>() + 1.0);
  }
  CHECK(fs::exists(out / "rates/r2/rates.json"));
  CHECK(fs::exists(out / "rates/r2/meta.json"));
}

TEST_CASE("verify fast runs the suites and exits zero on success") {
  const fs::path out = work_root() / "ve";
  CmdResult r = run_cli("verify fast --threads 4 --out " + out.string() +
                        " --label v");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("RESULT: PASS") != std::string::npos);
  CHECK(r.out.find("== table-1 ==") != std::string::npos);
  const json rep = json::parse(slurp(out / "verify/v/report.json"));
  CHECK(rep.at("ok") == true);
  CHECK(rep.at("suites").size() == 10);
  CHECK(fs::exists(out / "verify/v/report.txt"));
}

TEST_CASE("FYLAB_OUT provides the default output root") {
  const fs::path out = work_root() / "envroot";
  CmdResult r = run_cli("analyze --loss gini --label env-check",
                        "FYLAB_OUT=" + out.string());
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(out / "analyze/env-check/analysis.json"));
  const json doc = json::parse(r.out);
  CHECK(doc.at("margin").get<double>() == doctest::Approx(1.0).epsilon(1e-9));
}
