#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "cmr/cli.hpp"
#include "cmr/manifest.hpp"
#include "support/cohort.hpp"

using namespace cmr;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json read_json(const fs::path &p) {
  std::ifstream f(p);
  return nlohmann::json::parse(f);
}

std::vector<std::string> phantom_args(const fs::path &out, const std::string &seed) {
  return {"phantom", "--patients", "3", "--size", "48", "--seed", seed,
          "--out", out.string(), "--threads", "1"};
}

} // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(invoke({}).code == cli::kUsageError);
  CHECK(invoke({"frobnicate"}).code == cli::kUsageError);
  CHECK(invoke({"phantom"}).code == cli::kUsageError); // --out missing
  CHECK(invoke({"phantom", "--out", "/tmp/x", "--patients", "many"}).code == cli::kUsageError);
  CHECK(invoke({"build-dataset", "--cohort", "/tmp/none", "--config", "9", "--out", "/tmp/x"})
            .code == cli::kUsageError);
  const auto help = invoke({"--help"});
  CHECK(help.code == cli::kOk);
  CHECK(help.out.find("build-dataset") != std::string::npos);
  const auto ver = invoke({"--version"});
  CHECK(ver.code == cli::kOk);
  CHECK(ver.out.find(cli::version()) != std::string::npos);
}

TEST_CASE("missing or unreadable inputs exit with 2") {
  support::TempDir tmp("cli_data");
  const auto r = invoke({"build-dataset", "--cohort", (tmp / "nope").string(), "--config", "1",
                      "--out", (tmp / "out").string()});
  CHECK(r.code == cli::kDataError);
  CHECK(r.err.find("error:") == 0);

  nifti::write_file_bytes(tmp / "junk.nii", std::vector<std::uint8_t>(400, 7));
  const auto bad = invoke({"inspect", (tmp / "junk.nii").string()});
  CHECK(bad.code == cli::kDataError);
  CHECK(bad.err.find("junk.nii") != std::string::npos);
}

TEST_CASE("phantom runs are reproducible and recorded") {
  support::TempDir tmp("cli_phantom");
  REQUIRE(invoke(phantom_args(tmp / "a", "5")).code == cli::kOk);
  REQUIRE(invoke(phantom_args(tmp / "b", "5")).code == cli::kOk);
  REQUIRE(invoke(phantom_args(tmp / "c", "6")).code == cli::kOk);
  // run.json records the output path, everything else must match.
  CHECK(support::same_bytes(tmp / "a/cohort.json", tmp / "b/cohort.json"));
  for (const char *id : {"patient01", "patient02", "patient03"})
    CHECK(support::same_tree(tmp / "a" / id, tmp / "b" / id));
  CHECK_FALSE(support::same_bytes(tmp / "a/patient01/LGE.nii", tmp / "c/patient01/LGE.nii"));
  const auto cohort = read_cohort_manifest(tmp / "a/cohort.json");
  CHECK(cohort.patients.size() == 3);
  const auto run = read_json(tmp / "a/run.json");
  CHECK(run["tool"] == cli::kToolName);
  CHECK(run["command"] == "phantom");
  CHECK(run["seeds"]["cohort"] == 5);
  CHECK(run["threads"] == 1);
}

TEST_CASE("command-line flags override the config file") {
  support::TempDir tmp("cli_config");
  {
    std::ofstream f(tmp / "cfg.json");
    f << R"({"patients": 2, "size": 48, "seed": 11, "threads": 1})";
  }
  REQUIRE(invoke({"phantom", "--config-file", (tmp / "cfg.json").string(), "--out",
               (tmp / "a").string()})
              .code == cli::kOk);
  CHECK(read_json(tmp / "a/run.json")["seeds"]["cohort"] == 11);
  CHECK(read_cohort_manifest(tmp / "a/cohort.json").patients.size() == 2);

  REQUIRE(invoke({"phantom", "--seed", "12", "--config-file", (tmp / "cfg.json").string(), "--out",
               (tmp / "b").string()})
              .code == cli::kOk);
  CHECK(read_json(tmp / "b/run.json")["seeds"]["cohort"] == 12);

  {
    std::ofstream f(tmp / "bad.json");
    f << R"({"patients": 2, "colour": "blue"})";
  }
  const auto r = invoke({"phantom", "--config-file", (tmp / "bad.json").string(), "--out",
                      (tmp / "c").string()});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("colour") != std::string::npos);
}

TEST_CASE("thread count resolution") {
  CHECK(cli::resolve_threads(3) == 3);
  ::setenv(cli::kThreadsEnv, "2", 1);
  CHECK(cli::resolve_threads(0) == 2);
  ::setenv(cli::kThreadsEnv, "two", 1);
  CHECK_THROWS_AS(cli::resolve_threads(0), std::invalid_argument);
  support::TempDir tmp("cli_threads");
  CHECK(invoke({"phantom", "--patients", "2", "--size", "48", "--out", (tmp / "x").string()}).code ==
        cli::kUsageError);
  ::unsetenv(cli::kThreadsEnv);
  CHECK(cli::resolve_threads(0) >= 1);
}

TEST_CASE("synthetic configuration without a directory is a usage error") {
  support::TempDir tmp("cli_syn");
  REQUIRE(invoke(phantom_args(tmp / "cohort", "1")).code == cli::kOk);
  const auto r = invoke({"build-dataset", "--cohort", (tmp / "cohort").string(), "--config", "6",
                      "--out", (tmp / "out").string()});
  CHECK(r.code == cli::kUsageError);
  CHECK(r.err.find("--synthetic-dir") != std::string::npos);
}

TEST_CASE("pipeline from phantom to evaluation") {
  support::TempDir tmp("cli_pipe");
  REQUIRE(invoke(phantom_args(tmp / "cohort", "2")).code == cli::kOk);
  REQUIRE(invoke({"preprocess", "--in", (tmp / "cohort").string(), "--out",
               (tmp / "pre").string(), "--size", "64", "--threads", "1"})
              .code == cli::kOk);
  CHECK(fs::exists(tmp / "pre/cohort.json"));
  CHECK(fs::exists(tmp / "pre/reference_histogram.json"));
  const auto pre = nifti::read_volume(tmp / "pre/patient01/LGE.nii", SequenceKind::LGE, "p");
  CHECK(pre.nx() == 64);
  CHECK(pre.spacing().x == doctest::Approx(1.25));

  REQUIRE(invoke({"build-dataset", "--cohort", (tmp / "pre").string(), "--config", "4", "--out",
               (tmp / "ds").string(), "--threads", "1"})
              .code == cli::kOk);
  const auto m = read_manifest(tmp / "ds/manifest.json");
  CHECK(m.config_id == 4);
  CHECK(fs::exists(tmp / "ds/summary.txt"));
  CHECK(read_json(tmp / "ds/run.json")["command"] == "build-dataset");

  const auto ev = invoke({"evaluate", "--pred", (tmp / "cohort").string(), "--gt",
                       (tmp / "cohort").string(), "--suffix", "LGE_labels.nii",
                       "--spacing-from-header", "--out", (tmp / "ev").string()});
  REQUIRE(ev.code == cli::kOk);
  CHECK(ev.out.find("Dice score") != std::string::npos);
  const auto report = read_json(tmp / "ev/report.json");
  CHECK(report["cases"].size() == 3);
  CHECK(report["aggregate"]["LV"]["dice"]["mean"] == 1.0);

  REQUIRE(invoke({"augment", "--image", (tmp / "cohort/patient01/LGE.nii").string(), "--labels",
               (tmp / "cohort/patient01/LGE_labels.nii").string(), "--count", "3", "--out",
               (tmp / "aug").string()})
              .code == cli::kOk);
  CHECK(fs::exists(tmp / "aug/LGE_rot03.nii"));
  CHECK(fs::exists(tmp / "aug/landmarks.json"));

  const auto info = invoke({"inspect", (tmp / "cohort/patient01/T2.nii").string(), "--json"});
  REQUIRE(info.code == cli::kOk);
  CHECK(nlohmann::json::parse(info.out).is_object());
}
