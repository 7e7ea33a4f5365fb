#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "scenecast/cli.hpp"
#include "support.hpp"

using namespace scenecast;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli_run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> tiny(const std::string& dir) {
  return {"--out",        dir,
          "--set",        "synth.fsas=4",
          "--set",        "synth.small_fsas=1",
          "--set",        "synth.residents_per_fsa=10",
          "--set",        "synth.venues_per_category=12",
          "--set",        "first_year=2014",
          "--set",        "last_year=2016",
          "--set",        "test_years=2016",
          "--set",        "hidden=8",
          "--set",        "blocks=1",
          "--set",        "cv_folds=2"};
}

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run({"evaluate", "--no-such-flag"}).code == 2);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  const auto r = run({"train", "--epochs", "many"});
  CHECK(r.code == 2);
  CHECK(r.err.find("usage error") != std::string::npos);
}

TEST_CASE("help exits 0") {
  const auto r = run({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("evaluate") != std::string::npos);
}

TEST_CASE("stage failures exit 1 with a message") {
  auto dir = testing::scratch_dir("cli_fail");
  const auto r = run({"ingest", "--out", (dir / "out").string(), "--data", (dir / "nothing").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(run({"evaluate", "--out", dir.string(), "--set", "no_such_key=1"}).code == 1);
}

TEST_CASE("synth, stages, evaluate and report on a tiny city") {
  const auto dir = testing::scratch_dir("cli_smoke").string();
  auto r = run(with({"synth"}, tiny(dir)));
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\"stage\":\"synth\"") != std::string::npos);
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / "run.cfg"));

  r = run({"ingest", "--out", dir});
  CHECK(r.code == 0);
  r = run({"scenes", "--out", dir});
  CHECK(r.code == 0);
  r = run({"graph", "--out", dir, "--scenario", "Area info"});
  CHECK(r.code == 0);
  r = run({"train", "--out", dir, "--scenario", "Area info", "--test-year", "2016", "--epochs", "3"});
  CHECK(r.code == 0);

  r = run({"evaluate", "--out", dir, "--model", "gnn", "--model", "naive", "--scenario", "None", "--reps", "2",
           "--epochs", "3"});
  REQUIRE(r.code == 0);
  const std::filesystem::path out(dir);
  for (const char* f : {"results.csv", "summary.csv", "per_fsa.csv", "per_fsa_by_year.csv", "region_summary.csv"}) {
    CHECK(std::filesystem::exists(out / f));
  }
  const std::string results = testing::slurp(out / "results.csv");
  for (const auto& e : std::filesystem::directory_iterator(out)) {
    if (e.path().extension() == ".svg") CHECK(testing::slurp(e.path()).find("<!-- config_hash=") != std::string::npos);
  }
  CHECK(results.find(",None,2016,1,") != std::string::npos);
  CHECK(results.find(",Naive,2016,0,") != std::string::npos);

  const std::string summary = testing::slurp(out / "summary.csv");
  std::filesystem::remove(out / "summary.csv");
  r = run({"report", "--out", dir});
  CHECK(r.code == 0);
  CHECK(testing::slurp(out / "summary.csv") == summary);
}

TEST_CASE("a scenario filter without --model runs only the GNN") {
  const auto dir = testing::scratch_dir("cli_filter").string();
  REQUIRE(run(with({"synth"}, tiny(dir))).code == 0);
  const auto r = run({"evaluate", "--out", dir, "--scenario", "Mobility", "--reps", "2", "--epochs", "2"});
  REQUIRE(r.code == 0);
  const std::string results = testing::slurp(std::filesystem::path(dir) / "results.csv");
  CHECK(results.find(",Mobility,") != std::string::npos);
  CHECK(results.find(",Naive,") == std::string::npos);
  CHECK(results.find(",Lasso,") == std::string::npos);
}
