#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "sucm/cli.hpp"

namespace {

// run the CLI in-process with stdout parked in a file
struct CliRun {
  int code;
  std::string out;
};

CliRun run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"sucm"};
  for (const auto& a : args) argv.push_back(a.c_str());
  const char* path = "t_cli_stdout.txt";
  std::fflush(stdout);
  const int saved = dup(1);
  const int f = open(path, O_WRONLY | O_CREAT | O_TRUNC, 0644);
  dup2(f, 1);
  close(f);
  const int code = sucm::run_cli(static_cast<int>(argv.size()), argv.data());
  std::fflush(stdout);
  dup2(saved, 1);
  close(saved);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return {code, ss.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli end to end") {
  REQUIRE(run({"synth", "--users", "30", "--fanouts", "2,2", "--apps-per-subcat", "4",
               "--adoptions", "6", "--dim", "4", "--seed", "5", "--scale", "0.8",
               "--out-prefix", "t_cli"})
              .code == 0);

  SUBCASE("validate prints the stats table") {
    const CliRun r = run({"validate", "--taxonomy", "t_cli.taxonomy.tsv", "--adoptions",
                          "t_cli.adoptions.tsv", "--min-adoptions", "1"});
    CHECK(r.code == 0);
    CHECK(r.out.find("taxonomy ok") != std::string::npos);
    CHECK(r.out.find("n_users\tn_apps") != std::string::npos);
  }
  SUBCASE("validate on raw counts reproduces the published table") {
    const CliRun r = run({"validate", "--counts", "52483,26426,3286156"});
    CHECK(r.code == 0);
    CHECK(r.out.find("99.76%") != std::string::npos);
    CHECK(r.out.find("62.61") != std::string::npos);
  }
  SUBCASE("train, evaluate, recommend") {
    const CliRun tr = run({"train", "--taxonomy", "t_cli.taxonomy.tsv", "--adoptions",
                           "t_cli.adoptions.tsv", "--model", "sucm", "--dim", "4", "--epochs",
                           "4", "--seed", "3", "--min-adoptions", "1", "--split-seed", "9",
                           "--out", "t_cli_model.bin"});
    REQUIRE(tr.code == 0);
    CHECK(tr.out.find("epoch 1 objective") != std::string::npos);

    const CliRun ev = run({"evaluate", "--model-file", "t_cli_model.bin", "--taxonomy",
                           "t_cli.taxonomy.tsv", "--adoptions", "t_cli.adoptions.tsv",
                           "--min-adoptions", "1", "--split-seed", "9", "--out",
                           "t_cli_report.tsv"});
    REQUIRE(ev.code == 0);
    const std::string report = slurp("t_cli_report.tsv");
    // 5 metrics x 4 default cutoffs + header
    CHECK(std::count(report.begin(), report.end(), '\n') == 21);
    CHECK(!slurp("t_cli_report.tsv.json").empty());

    const CliRun rec =
        run({"recommend", "--model-file", "t_cli_model.bin", "--user", "7", "--n", "3"});
    REQUIRE(rec.code == 0);
    CHECK(std::count(rec.out.begin(), rec.out.end(), '\n') == 3);

    const CliRun rec1 = run({"recommend", "--model-file", "t_cli_model.bin", "--user", "7",
                             "--n", "1", "--exclude-train"});
    CHECK(std::count(rec1.out.begin(), rec1.out.end(), '\n') == 1);

    CHECK(run({"recommend", "--model-file", "t_cli_model.bin", "--user", "424242"}).code != 0);
  }
  SUBCASE("baseline model trains through the same surface") {
    const CliRun tr = run({"train", "--taxonomy", "t_cli.taxonomy.tsv", "--adoptions",
                           "t_cli.adoptions.tsv", "--model", "bpr", "--dim", "4", "--epochs",
                           "3", "--seed", "3", "--min-adoptions", "1", "--out",
                           "t_cli_bpr.bin"});
    REQUIRE(tr.code == 0);
    const CliRun ev = run({"evaluate", "--model-file", "t_cli_bpr.bin", "--adoptions",
                           "t_cli.adoptions.tsv", "--min-adoptions", "1", "--split-seed", "9"});
    CHECK(ev.code == 0);
    std::remove("t_cli_bpr.bin");
  }
  SUBCASE("identical seeds give byte-identical model files") {
    for (const char* out : {"t_cli_a.bin", "t_cli_b.bin"}) {
      REQUIRE(run({"train", "--taxonomy", "t_cli.taxonomy.tsv", "--adoptions",
                   "t_cli.adoptions.tsv", "--model", "sucm", "--dim", "4", "--epochs", "3",
                   "--seed", "21", "--min-adoptions", "1", "--out", out})
                  .code == 0);
    }
    CHECK(slurp("t_cli_a.bin") == slurp("t_cli_b.bin"));
    std::remove("t_cli_a.bin");
    std::remove("t_cli_b.bin");
  }
  SUBCASE("bad invocations exit nonzero") {
    CHECK(run({"train", "--taxonomy", "t_cli.taxonomy.tsv", "--adoptions",
               "t_cli.adoptions.tsv", "--model", "sucm", "--epochs", "0", "--out", "x.bin"})
              .code != 0);
    CHECK(run({"train", "--no-such-flag"}).code != 0);
    CHECK(run({"validate", "--counts", "1,2"}).code != 0);
    CHECK(run({}).code != 0);
  }

  for (const char* f : {"t_cli.taxonomy.tsv", "t_cli.adoptions.tsv", "t_cli.planted.bin",
                        "t_cli_model.bin", "t_cli_report.tsv", "t_cli_report.tsv.json",
                        "t_cli_stdout.txt"})
    std::remove(f);
}

TEST_CASE("gradcheck subcommand passes quickly at a reduced probe count") {
  const CliRun r = run({"gradcheck", "--seed", "4", "--probes", "10"});
  CHECK(r.code == 0);
  CHECK(r.out.find("gradcheck PASS") != std::string::npos);
  std::remove("t_cli_stdout.txt");
}
