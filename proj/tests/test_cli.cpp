#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <doctest.h>

#include "agscan/io_util.hpp"
#include "helpers.hpp"

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  std::string cmd = std::string(AGSCAN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string write_tiny_config(const fs::path& dir, const fs::path& out_dir) {
  std::string text = R"({
  "seed": 3,
  "out_dir": ")" + out_dir.string() + R"(",
  "model": {"mode": "alm", "n_layers": 1, "hidden_dim": 16, "n_heads": 2, "ff_dim": 32, "max_len": 24},
  "training": {"lr": 0.002, "batch_size": 8, "steps": 40, "corpus_sentences": 300},
  "data": {"lexicon_files": [")" + (testutil::data_dir() / "lexicon_en.tsv").string() + R"("], "probe_lexicon": "train"},
  "stimuli": {"languages": ["en"], "structures": ["simple", "across_pp"], "max_n": 6},
  "analysis": {"top_n": 5, "permutation_iters": 1000}
})";
  fs::path p = dir / "tiny.json";
  agscan::write_text_file(p, text);
  return p.string();
}

}  // namespace

TEST_CASE("cli exit codes separate usage, data, and success") {
  testutil::TempDir dir("cli");
  std::string cfg = write_tiny_config(dir.path(), dir.path() / "out");

  SUBCASE("usage errors exit 1, help and version exit 0") {
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("gen-stimuli --help") == 0);
    CHECK(run_cli("") == 1);                        // a subcommand is required
    CHECK(run_cli("gen-stimuli") == 1);             // --config is required
    CHECK(run_cli("transmogrify --config x") == 1); // unknown subcommand
    CHECK(run_cli("gen-stimuli --config " + cfg + " --word-variant tiny") == 1);
  }

  SUBCASE("data problems exit 2") {
    CHECK(run_cli("gen-stimuli --config " + (dir.path() / "absent.json").string()) == 2);
    agscan::write_text_file(dir.path() / "broken.json", "{\"seed\": }");
    CHECK(run_cli("gen-stimuli --config " + (dir.path() / "broken.json").string()) == 2);
    agscan::write_text_file(dir.path() / "badkey.json", "{\"seed\": 1, \"zeal\": 2}");
    CHECK(run_cli("gen-stimuli --config " + (dir.path() / "badkey.json").string()) == 2);
    // Reporting before any pipeline stage ran is a data error, not a crash.
    CHECK(run_cli("report --config " + cfg) == 2);
  }

  SUBCASE("a working config runs end to end with exit 0") {
    CHECK(run_cli("gen-stimuli --config " + cfg) == 0);
    CHECK(fs::exists(dir.path() / "out" / "stimuli.jsonl"));
    CHECK(fs::exists(dir.path() / "out" / "manifest.json"));

    // Random-init probing skips training and passes the oracle gate.
    CHECK(run_cli("oracle-check --config " + cfg + " --random-init") == 0);
    CHECK(fs::exists(dir.path() / "out" / "oracle_check.txt"));
    std::string report = agscan::read_text_file(dir.path() / "out" / "oracle_check.txt");
    CHECK(report.find("column-completeness: PASS") != std::string::npos);
    CHECK(report.find("naive-equivalence: PASS") != std::string::npos);
    CHECK(report.find("null-intervention-zero: PASS") != std::string::npos);
  }

  SUBCASE("seed and out overrides take precedence over the config") {
    fs::path alt = dir.path() / "alt";
    CHECK(run_cli("gen-stimuli --config " + cfg + " --seed 9 --out " + alt.string()) == 0);
    REQUIRE(fs::exists(alt / "stimuli.jsonl"));
    std::string stim = agscan::read_text_file(alt / "stimuli.jsonl");
    CHECK(fs::exists(alt / "manifest.json"));
    // Same config at its own seed writes different stimuli.
    CHECK(run_cli("gen-stimuli --config " + cfg) == 0);
    CHECK(agscan::read_text_file(dir.path() / "out" / "stimuli.jsonl") != stim);
  }
}
