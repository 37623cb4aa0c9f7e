#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "ctf/cli.hpp"
#include "ctf/datasets.hpp"

namespace fs = std::filesystem;
using ctf::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome call(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_file(const std::string& name, const std::string& text) {
  auto p = fs::temp_directory_path() / ("ctf_cli_" + name);
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("query prints the exact value") {
  auto r = call({"query", "--builtin", "face_mstar", "-q", "P(F[Y=0]=0, H[Y=0]=1 | F=0, Y=1, H=0)"});
  CHECK(r.code == 0);
  CHECK(r.out == "2/5 (0.4)\n");
  auto j = call({"query", "--builtin", "face_m3", "-q", "P(F[Y=0]=0, H[Y=0]=1 | F=0, Y=1, H=0)", "--json"});
  CHECK(nlohmann::json::parse(j.out)["value"] == "1/4");
}

TEST_CASE("bounds emit JSON") {
  auto r = call({"bounds", "--builtin", "face_mstar", "-q", "P(F[Y=0]=0, H[Y=0]=1 | F=0, Y=1, H=0)", "-w", "F,Y,H",
                 "--oracle", "20"});
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["lower"] == "1/4");
  CHECK(j["upper"] == "1/2");
  CHECK(j["certified"] == true);
  auto a = call({"bounds", "--builtin", "backdoor", "-q", "P(C[D=6]=1, B[D=6]=1 | D=3, C=1, B=1)", "--method",
                 "analytic"});
  REQUIRE(a.code == 0);
  CHECK(nlohmann::json::parse(a.out)["upper"] == "14/41");
  auto off = call({"bounds", "--builtin", "face_mstar", "-q", "P(H[Y=0]=1 | Y=1)", "-w", "F"});
  CHECK(off.code == ctf::cli::kExitUsage);
}

TEST_CASE("validate and the exit code table") {
  for (const auto& b : ctf::builtin_models()) {
    auto p = temp_file(b.name + ".scm", b.source);
    auto r = call({"validate", p.string()});
    CHECK_MESSAGE(r.code == 0, b.name);
    CHECK(r.out.rfind("ok: model " + b.name, 0) == 0);
    fs::remove(p);
  }
  auto bad = temp_file("bad.scm", "model m {\n  var X : {0,1} = Q\n}\n");
  auto r = call({"validate", bad.string()});
  CHECK(r.code == ctf::cli::kExitData);
  CHECK(r.out.find("Q") != std::string::npos);
  auto j = call({"validate", bad.string(), "--json"});
  CHECK(nlohmann::json::parse(j.out)["valid"] == false);
  fs::remove(bad);
  auto missing = call({"validate", "/nonexistent/model.scm"});
  CHECK(missing.code == ctf::cli::kExitIo);
  CHECK(missing.err.find("/nonexistent/model.scm") != std::string::npos);
  CHECK(call({}).code == ctf::cli::kExitUsage);
  CHECK(call({"frobnicate"}).code == ctf::cli::kExitUsage);
  CHECK(call({"query", "--builtin", "face_mstar", "-q", "P(F=0 | Y=7)"}).code == ctf::cli::kExitData);
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("compare reports the non-identifiable pairs") {
  auto r = call({"compare", "-m1", "face_m1_smile", "-m2", "face_m2_smile", "-q", "P(S[Y=1]=1 | S=0, Y=0)"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("observational: equal") != std::string::npos);
  auto j = call({"compare", "--m1", "face_mstar", "--m2", "face_mprime", "-q",
                 "P(F[Y=0]=0, H[Y=0]=1 | F=0, Y=1, H=0)", "--json"});
  auto rep = nlohmann::json::parse(j.out);
  CHECK(rep["observational_equal"] == true);
  CHECK(rep["queries"][0]["first"] == "2/5");
  CHECK(rep["queries"][0]["second"] == "0/1");
}

TEST_CASE("sample, proxy and check agree with the library") {
  auto s1 = call({"sample", "--builtin", "backdoor", "-n", "50", "--seed", "3"});
  auto s2 = call({"sample", "--builtin", "backdoor", "-n", "50", "--seed", "3"});
  CHECK(s1.code == 0);
  CHECK(s1.out == s2.out);
  CHECK(s1.out == ctf::labels_csv("backdoor", ctf::sample_labels(ctf::load_builtin("backdoor"), 50, 3)));

  auto log = fs::temp_directory_path() / "ctf_cli_proxy.jsonl";
  auto p = call({"proxy", "--builtin", "face_mstar", "--kind", "conditional", "--do", "Y=0", "-n", "20000", "--seed",
                 "11", "-o", log.string()});
  REQUIRE(p.code == 0);
  auto c = call({"check", "--builtin", "face_mstar", "--log", log.string(), "-w", "F,Y", "--json"});
  CHECK(c.code == 1);
  CHECK(nlohmann::json::parse(c.out)["verdict"] == "fail");
  auto pass = call({"proxy", "--builtin", "face_mstar", "--kind", "preserve", "--do", "Y=0", "-n", "20000", "-o",
                    log.string()});
  REQUIRE(pass.code == 0);
  CHECK(call({"check", "--builtin", "face_mstar", "--log", log.string(), "-w", "F,Y"}).code == 0);
  CHECK(call({"check", "--builtin", "face_mstar", "--log", log.string(), "--delta", "x"}).code ==
        ctf::cli::kExitUsage);
  fs::remove(log);
}

TEST_CASE("gen writes images") {
  auto dir = fs::temp_directory_path() / "ctf_cli_gen";
  fs::remove_all(dir);
  auto r = call({"gen", "--builtin", "frontdoor", "-n", "6", "-o", dir.string(), "--json"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["images"] == 6);
  CHECK(fs::exists(dir / "manifest.csv"));
  CHECK(call({"gen", "--builtin", "face_mstar", "-n", "6", "-o", dir.string()}).code != 0);
  fs::remove_all(dir);
}

TEST_CASE("models listing") {
  auto r = call({"models", "--json"});
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out).size() == 8);
}

TEST_CASE("installed binary exits with the library's codes") {
  std::string bin = CTF_CLI_PATH;
  int ok = std::system((bin + " models > /dev/null").c_str());
  CHECK(WEXITSTATUS(ok) == 0);
  int usage = std::system((bin + " > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(usage) == ctf::cli::kExitUsage);
  int io = std::system((bin + " validate /nonexistent.scm > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(io) == ctf::cli::kExitIo);
}

}  // TEST_SUITE
