#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "psychfm/cli.hpp"
#include "psychfm/config.hpp"
#include "psychfm/error.hpp"
#include "psychfm/io.hpp"

using namespace psychfm;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "psychfm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("psychfm_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

// Small, fast settings shared by the end-to-end cases.
fs::path quick_config(const fs::path& dir) {
  const auto path = dir / "quick.cfg";
  io::write_file(path,
                 "# quick test settings\n"
                 "fm.epochs = 40\n"
                 "ridge.lambda = 1\n"
                 "lasso.lambda = 0.1\n"
                 "synth.subjects = 12\n"
                 "synth.games = 14\n");
  return path;
}

}  // namespace

TEST_CASE("run-all twice gives identical bytes") {
  const auto base = scratch("determinism");
  const auto cfg = quick_config(base).string();
  const auto a = (base / "a").string(), b = (base / "b").string();
  const auto r1 = run({"run-all", "--config", cfg, "--seed", "7", "--out", a});
  REQUIRE_MESSAGE(r1.code == 0, r1.err);
  const auto r2 = run({"run-all", "--config", cfg, "--seed", "7", "--out", b});
  REQUIRE(r2.code == 0);
  CHECK(io::read_file(fs::path(a) / "report.md") == io::read_file(fs::path(b) / "report.md"));
  for (const auto& e : fs::directory_iterator(fs::path(a) / "models")) {
    const auto other = fs::path(b) / "models" / e.path().filename();
    REQUIRE(fs::exists(other));
    CHECK(io::read_file(e.path()) == io::read_file(other));
  }
  const auto report = io::read_file(fs::path(a) / "report.md");
  CHECK(report.find("FM (A) + Ridge (B)") != std::string::npos);
  CHECK(report.find("Seed: 7") != std::string::npos);
  // the resolved config is logged and stored
  CHECK(r1.err.find("fm.epochs = 40") != std::string::npos);
  CHECK(io::read_file(fs::path(a) / "config.resolved.txt").find("synth.games = 14") !=
        std::string::npos);
  fs::remove_all(base);
}

TEST_CASE("run-all accepts --synth overrides") {
  const auto base = scratch("synth");
  const auto out = (base / "r").string();
  const auto r = run({"run-all", "--config", quick_config(base).string(), "--synth", "subjects=10",
                      "games=12", "--seed", "3", "--out", out});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(io::read_file(fs::path(out) / "config.resolved.txt").find("synth.subjects = 10") !=
        std::string::npos);
  fs::remove_all(base);
}

TEST_CASE("stage-by-stage subcommands") {
  const auto base = scratch("stages");
  const auto cfg = quick_config(base).string();
  const auto out = (base / "run").string();
  auto step = [&](std::vector<std::string> args) {
    args.insert(args.end(), {"--config", cfg, "--seed", "11", "--out", out});
    const auto r = run(args);
    CHECK_MESSAGE(r.code == 0, r.err);
    return r;
  };
  step({"synth"});
  step({"ingest"});
  step({"featurize"});
  step({"split"});
  step({"train", "--model", "fm", "--input", "onehot"});
  CHECK(io::read_file(fs::path(out) / "models" / "fm_onehot.model").rfind("psychfm-model v1 fm\n", 0) ==
        0);
  step({"train", "--model", "ridge", "--input", "psych"});
  CHECK(io::read_file(fs::path(out) / "models" / "ridge_psych.model")
            .rfind("psychfm-model v1 linear\n", 0) == 0);
  step({"blend", "--members", "fm:onehot,ridge:psych"});
  step({"eval", "--format", "csv"});
  const auto report = io::read_file(fs::path(out) / "report.csv");
  CHECK(report.find("FM (A) + Ridge (B)") != std::string::npos);
  CHECK(report.find("FM (A),A,") != std::string::npos);
  fs::remove_all(base);
}

TEST_CASE("train with psych input needs featurize") {
  const auto base = scratch("order");
  const auto cfg = quick_config(base).string();
  const auto out = (base / "run").string();
  for (const char* s : {"synth", "ingest", "split"})
    REQUIRE(run({s, "--config", cfg, "--out", out}).code == 0);
  const auto r = run({"train", "--model", "ridge", "--input", "psych", "--config", cfg, "--out", out});
  CHECK(r.code == 2);
  CHECK(r.err.find("featurize") != std::string::npos);
  fs::remove_all(base);
}

TEST_CASE("exit codes") {
  SUBCASE("unknown flag") {
    const auto r = run({"run-all", "--bogus"});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
  }
  SUBCASE("unknown subcommand") { CHECK(run({"frobnicate"}).code == 1); }
  SUBCASE("missing raw file") {
    const auto base = scratch("missing");
    CHECK(run({"ingest", "--raw", (base / "nope.csv").string(), "--out", (base / "r").string()}).code ==
          2);
  }
  SUBCASE("fm on psych input") {
    CHECK(run({"train", "--model", "fm", "--input", "psych", "--out", scratch("x").string()}).code == 1);
  }
  SUBCASE("unknown config key") {
    const auto base = scratch("badcfg");
    io::write_file(base / "bad.cfg", "fm.kk = 3\n");
    const auto r = run({"synth", "--config", (base / "bad.cfg").string(), "--out", (base / "r").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("fm.kk") != std::string::npos);
    fs::remove_all(base);
  }
  SUBCASE("raw and synth together") {
    const auto base = scratch("both");
    CHECK(run({"run-all", "--raw", "x.csv", "--synth", "subjects=3", "--out", base.string()}).code == 1);
  }
}

TEST_CASE("RunConfig") {
  RunConfig c;
  c.merge_text("seed = 5\n# comment\n\nfm.k = 4  # trailing\nridge.lambda = auto\nlasso.lambda = 0.5\n");
  CHECK(c.seed == 5);
  CHECK(c.fm_k == 4);
  CHECK_FALSE(c.ridge_lambda.has_value());
  CHECK(c.lasso_lambda == 0.5);
  CHECK_THROWS_AS(c.set("nope", "1"), ValidationError);
  CHECK_THROWS_AS(c.set("fm.k", "many"), ValidationError);
  CHECK_THROWS_AS(c.merge_text("fm.k 4\n"), ValidationError);
  // resolved text reads back to the same settings
  RunConfig d;
  d.merge_text(c.resolved());
  CHECK(d.resolved() == c.resolved());
  // component seeds are derived, distinct and stable
  CHECK(c.synth_seed() != c.split_seed());
  CHECK(c.pipeline().fm.seed != c.synth_seed());
  RunConfig e = c;
  CHECK(e.pipeline().fm.seed == c.pipeline().fm.seed);
}
