#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bbsox/cli_app.hpp"
#include "bbsox/report.hpp"

using namespace bbsox;
namespace fs = std::filesystem;

namespace {

std::string example_path(const char* name) {
  return std::string(BBSOX_SOURCE_DIR) + "/examples/" + name;
}

std::string schema_path() {
  return std::string(BBSOX_SOURCE_DIR) + "/schemas/verdict.schema.json";
}

struct Run {
  int code = 0;
  std::string out, err;
};

Run run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Run r;
  r.code = cli_main(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("bbsox-cli-" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage and argument errors") {
  Run none = run_cli({});
  CHECK(none.code == 2);
  CHECK(none.out.find("usage:") != std::string::npos);

  Run help = run_cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("certify") != std::string::npos);

  Run unknown = run_cli({"frobnicate", "x.toml"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.find("unknown command") != std::string::npos);

  Run noconfig = run_cli({"shoot"});
  CHECK(noconfig.code == 2);
  CHECK(noconfig.err.find("missing config") != std::string::npos);

  Run badflag = run_cli({"shoot", example_path("vanderpol.toml"), "--frob"});
  CHECK(badflag.code == 2);

  Run missing = run_cli({"shoot", "/nonexistent/nope.toml"});
  CHECK(missing.code == 2);
}

TEST_CASE("config errors are reported as json when requested") {
  fs::path dir = fresh_dir("badcfg");
  fs::path cfg = dir / "bad.toml";
  {
    std::ofstream out(cfg);
    out << "[problem]\ndim = 2\nx0 = [0.0, 1.0]\nT = 1.0\n\n"
           "[fields]\nX1 = [\"x2\", \"-x1\"]\nX2 = [\"x2\", \"-x1 + 1\"]\n\n"
           "[cost]\nmayer = \"x1\"\n\n[structure]\nedge = [1, 2, 1]\n";
    // No [solver] guess: rejected at parse time.
  }
  Run r = run_cli({"shoot", cfg.string(), "--json", "--out", (dir / "o").string()});
  CHECK(r.code == 2);
  nlohmann::json j = nlohmann::json::parse(r.out);
  CHECK(j.contains("error"));
  CHECK(j["exit"] == 2);
  CHECK(j["error"].get<std::string>().find("guess") != std::string::npos);
}

TEST_CASE("shoot writes the extremal trace") {
  fs::path dir = fresh_dir("shoot");
  Run r = run_cli({"shoot", example_path("vanderpol.toml"), "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("tau1") != std::string::npos);
  const std::string csv = slurp(dir / "extremal.csv");
  CHECK(csv.rfind("t,", 0) == 0);
  CHECK(csv.find("F1") != std::string::npos);
}

TEST_CASE("check passes on the oscillator example") {
  fs::path dir = fresh_dir("check");
  Run r = run_cli({"check", example_path("vanderpol.toml"), "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("pass") != std::string::npos);
}

TEST_CASE("lq oracle agrees with the certified verdict") {
  fs::path dir = fresh_dir("lqoracle");
  Run r = run_cli({"lq-oracle", example_path("vanderpol.toml"), "--out", dir.string(),
                   "--n", "64"});
  CHECK(r.code == 0);
  const std::string csv = slurp(dir / "lq.csv");
  CHECK(csv.rfind("t,R", 0) == 0);
}

TEST_CASE("certify produces a schema-valid deterministic verdict") {
  fs::path dir1 = fresh_dir("certify1");
  Run r1 = run_cli({"certify", example_path("vanderpol.toml"), "--out", dir1.string(),
                    "--json", "--trials", "20", "--seed", "7"});
  CHECK(r1.code == 0);
  CHECK(fs::exists(dir1 / "extremal.csv"));
  CHECK(fs::exists(dir1 / "lq.csv"));
  CHECK(fs::exists(dir1 / "probe.csv"));
  CHECK(fs::exists(dir1 / "perturb.csv"));

  nlohmann::json verdict = nlohmann::json::parse(slurp(dir1 / "verdict.json"));
  nlohmann::json schema = nlohmann::json::parse(slurp(schema_path()));
  std::string why;
  CHECK_MESSAGE(matches_schema(verdict, schema, &why), why);
  CHECK(verdict["certificate"] == "certified strict strong local minimizer");

  // The stdout verdict matches the file.
  nlohmann::json streamed = nlohmann::json::parse(r1.out);
  CHECK(streamed == verdict);

  // Byte-identical reruns once the timing block is stripped.
  fs::path dir2 = fresh_dir("certify2");
  Run r2 = run_cli({"certify", example_path("vanderpol.toml"), "--out", dir2.string(),
                    "--json", "--trials", "20", "--seed", "7"});
  CHECK(r2.code == 0);
  nlohmann::json v2 = nlohmann::json::parse(slurp(dir2 / "verdict.json"));
  verdict.erase("timing");
  v2.erase("timing");
  CHECK(verdict.dump() == v2.dump());
}

TEST_CASE("certify reports failure for a structurally wrong configuration") {
  fs::path dir = fresh_dir("badedge");
  fs::path cfg = dir / "swapped.toml";
  {
    std::string text = slurp(example_path("vanderpol.toml"));
    const std::string from = "edge = [1, 2, 1]";
    const size_t pos = text.find(from);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, from.size(), "edge = [2, 1, 2]");
    std::ofstream out(cfg);
    out << text;
  }
  Run r = run_cli({"check", cfg.string(), "--out", (dir / "o").string()});
  CHECK(r.code != 0);
}
