// CLI smoke tests: exercises the subcommands end to end on a tiny dataset
// and checks the documented exit codes (0 ok, 1 missing inputs, 2 config).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <set>
#include <filesystem>
#include <string>

#include "eit/io.hpp"
#include "eit/simulate.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(EIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

const fs::path kRoot = fs::temp_directory_path() / "eit_cli_test";

}  // namespace

TEST_CASE("cli: help and configuration errors") {
  CHECK(run("--help") == 0);
  CHECK(run("simulate --help") == 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("reconstruct --method no-such-method --dataset /nonexistent") == 2);
}

TEST_CASE("cli: full tiny pipeline") {
  fs::remove_all(kRoot);
  const fs::path ds = kRoot / "ds";
  // A tiny protocol keeps this fast; the real sizes run in the acceptance suite.
  const std::string cfg_path = (kRoot / "sim.json").string();
  fs::create_directories(kRoot);
  eit::write_json(cfg_path,
                  R"({"train": 0, "val": 0, "test": 2, "coarse_elements": 300, "dense_elements": 500})");
  CHECK(run("simulate --preset ellipses --out " + ds.string() + " --config " + cfg_path +
            " --master-seed 5 --counts 0,0,2") == 0);
  CHECK(fs::exists(ds / "manifest.json"));

  // missing dataset -> exit 1
  CHECK(run("reconstruct --method lin-rec --dataset " + (kRoot / "nope").string() +
            " --out " + (kRoot / "r0").string()) == 1);

  // lin-rec over the test split
  const fs::path rec = kRoot / "rec";
  CHECK(run("reconstruct --method lin-rec --dataset " + ds.string() + " --frames test --out " +
            rec.string()) == 0);
  CHECK(fs::exists(rec / "recon" / "0000.f64"));
  CHECK(fs::exists(rec / "recon" / "0001.f64"));

  // evaluate and report
  const fs::path ev = kRoot / "eval";
  CHECK(run("evaluate --dataset " + ds.string() + " --recon " + rec.string() +
            " --frames test --out " + ev.string() + " --method lin-rec") == 0);
  CHECK(fs::exists(ev / "scores.csv"));
  CHECK(fs::exists(ev / "summary.json"));
  CHECK(run("report --inputs " + (ev / "summary.json").string()) == 0);
  CHECK(run("report --inputs /nonexistent.json") == 1);

  // evaluate with an empty frame set -> exit 1
  CHECK(run("evaluate --dataset " + ds.string() + " --recon " + rec.string() +
            " --frames train --out " + (kRoot / "ev2").string()) == 1);

  fs::remove_all(kRoot);
}

TEST_CASE("cli: ood preset emits one frame per shape kind") {
  fs::remove_all(kRoot);
  const fs::path ds = kRoot / "ood";
  const std::string cfg_path = (kRoot / "ood.json").string();
  fs::create_directories(kRoot);
  CHECK(run("simulate --preset ood --out " + ds.string() + " --master-seed 6") == 0);
  const eit::DatasetManifest manifest = eit::read_manifest(ds / "manifest.json");
  CHECK(manifest.entries.size() == 4);
  std::set<std::string> kinds;
  for (const auto& e : manifest.entries) kinds.insert(e.kind);
  CHECK(kinds == std::set<std::string>{"rectangle", "triangle", "l_shape", "mixed"});
  fs::remove_all(kRoot);
}
