#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "agscan/io_util.hpp"
#include "agscan/pipeline.hpp"
#include "agscan/version.hpp"
#include "agscan/weights_io.hpp"
#include "helpers.hpp"

using namespace agscan;

namespace {

ExperimentConfig tiny_cfg(const std::filesystem::path& out_dir) {
  nlohmann::json j;
  j["seed"] = 11u;
  j["out_dir"] = out_dir.string();
  j["model"] = {{"mode", "alm"}, {"n_layers", 1}, {"hidden_dim", 16},
                {"n_heads", 2},  {"ff_dim", 32},  {"max_len", 24}};
  j["training"] = {{"lr", 2e-3}, {"batch_size", 8}, {"steps", 60}, {"corpus_sentences", 400}};
  j["data"] = {{"lexicon_files", {(testutil::data_dir() / "lexicon_en.tsv").string()}},
               {"probe_lexicon", "train"}};
  j["stimuli"] = {{"languages", {"en"}}, {"structures", {"simple", "across_pp"}}, {"max_n", 8}};
  j["analysis"] = {{"top_n", 5}, {"permutation_iters", 1000}};
  return ExperimentConfig::from_json(j, ".");
}

}  // namespace

TEST_CASE("the runner generates, persists, and reuses stimuli") {
  testutil::TempDir dir("runner-stimuli");
  auto out = dir.path() / "run";
  {
    Runner r(tiny_cfg(out), 1, false, true);
    const auto& groups = r.stimulus_groups();
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].label() == "en-simple-original");
    CHECK(groups[1].label() == "en-across_pp-original");
    CHECK(groups[0].stimuli.size() == 8);
    CHECK(groups[1].stimuli.size() == 8);
  }
  REQUIRE(std::filesystem::exists(out / "stimuli.jsonl"));
  REQUIRE(std::filesystem::exists(out / "manifest.json"));
  std::string first = read_text_file(out / "stimuli.jsonl");

  auto manifest = nlohmann::json::parse(read_text_file(out / "manifest.json"));
  CHECK(manifest.at("toolkit_version").get<std::string>() == kVersion);
  CHECK(manifest.at("config") == tiny_cfg(out).to_json());

  // A second runner over the same directory reuses the artifact bytes.
  {
    Runner r(tiny_cfg(out), 1, false, true);
    r.cmd_gen_stimuli();
  }
  CHECK(read_text_file(out / "stimuli.jsonl") == first);

  // A changed config must not adopt the stale artifacts.
  {
    ExperimentConfig changed = tiny_cfg(out);
    changed.stimuli.max_n = 6;
    Runner r(changed, 1, false, true);
    CHECK(r.stimulus_groups()[0].stimuli.size() == 6);
  }
  CHECK(read_text_file(out / "stimuli.jsonl") != first);
}

TEST_CASE("the runner trains once and reloads the saved model") {
  testutil::TempDir dir("runner-train");
  auto out = dir.path() / "run";
  ExperimentConfig cfg = tiny_cfg(out);

  Model trained = [&] {
    Runner r(cfg, 1, false, true);
    r.cmd_train();
    return r.model();
  }();
  REQUIRE(std::filesystem::exists(out / "model.agsc"));
  REQUIRE(std::filesystem::exists(out / "corpus.txt"));

  SavedModel saved = load_weights(out / "model.agsc");
  CHECK(saved.config.vocab_size == saved.vocab.size());
  CHECK(saved.weights.embedding.data == trained.weights.embedding.data);

  // Reuse: the second runner must serve the identical weights.
  Runner again(cfg, 1, false, true);
  CHECK(again.model().weights.embedding.data == trained.weights.embedding.data);

  // Training corpus excludes every probe realization.
  Runner probe_side(cfg, 1, false, true);
  std::set<std::vector<std::string>> excluded;
  for (const auto& g : probe_side.stimulus_groups())
    for (const Stimulus& st : g.stimuli) {
      auto real = grammatical_realizations(st);
      excluded.insert(real.begin(), real.end());
    }
  for (const std::string& line : split_lines(read_text_file(out / "corpus.txt")))
    CHECK(excluded.count(split_on(line, ' ')) == 0);
}

TEST_CASE("edited input files invalidate prior artifacts despite equal configs") {
  testutil::TempDir dir("runner-inputs");
  auto lex_copy = dir.path() / "lexicon_en.tsv";
  write_text_file(lex_copy, read_text_file(testutil::data_dir() / "lexicon_en.tsv"));
  ExperimentConfig cfg = tiny_cfg(dir.path() / "run");
  cfg.data.lexicon_files = {lex_copy};

  std::vector<double> first = [&] {
    Runner r(cfg, 1, false, true);
    r.cmd_train();
    return r.model().weights.embedding.data;
  }();

  // Same config bytes, different data: the manifest checksum guard must
  // force a fresh corpus and retraining instead of adopting stale weights.
  write_text_file(lex_copy, read_text_file(lex_copy) +
                                "en\tnoun\tzebra\tzebra\tzebras\t"
                                "subj,attr_pp,attr_rc,det_nom_sg=The,det_nom_pl=The,"
                                "det_obl_sg=the,det_obl_pl=the,det_emb_sg=the,"
                                "det_emb_pl=the,short=cat\n");
  Runner again(cfg, 1, false, true);
  CHECK(again.model().config.vocab_size == again.vocabulary().size());
  CHECK(again.model().weights.embedding.data.size() != first.size());
}

TEST_CASE("random-init runs never train and never adopt stale artifacts") {
  testutil::TempDir dir("runner-random");
  auto out = dir.path() / "run";
  ExperimentConfig cfg = tiny_cfg(out);

  Runner r(cfg, 1, true, true);
  const Model& m = r.model();
  ModelConfig expect = cfg.model;
  expect.vocab_size = r.vocabulary().size();
  expect.seed = derive_seed(cfg.seed, "model-init");
  Weights w = random_init_weights(expect);
  CHECK(m.weights.embedding.data == w.embedding.data);
  CHECK_FALSE(std::filesystem::exists(out / "model.agsc"));

  r.cmd_probe();
  REQUIRE(std::filesystem::exists(out / "effects.csv"));
  std::string random_effects = read_text_file(out / "effects.csv");

  // A trained run in the same directory must overwrite, and a random-init
  // run afterwards must recompute rather than reuse the trained tables.
  {
    Runner t(cfg, 1, false, true);
    t.cmd_probe();
  }
  std::string trained_effects = read_text_file(out / "effects.csv");
  CHECK(trained_effects != random_effects);
  {
    Runner t(cfg, 1, true, true);
    t.cmd_probe();
  }
  CHECK(read_text_file(out / "effects.csv") == random_effects);
}

TEST_CASE("pretrained weights configs reject training but serve probes") {
  testutil::TempDir dir("runner-weights");
  auto out_a = dir.path() / "a";
  ExperimentConfig cfg = tiny_cfg(out_a);
  {
    Runner r(cfg, 1, false, true);
    r.cmd_train();
  }

  nlohmann::json j;
  j["seed"] = 11u;
  j["out_dir"] = (dir.path() / "b").string();
  j["weights_file"] = (out_a / "model.agsc").string();
  j["data"] = {{"lexicon_files", {(testutil::data_dir() / "lexicon_en.tsv").string()}},
               {"probe_lexicon", "train"}};
  j["stimuli"] = {{"languages", {"en"}}, {"structures", {"simple"}}, {"max_n", 6}};
  j["analysis"] = {{"top_n", 5}, {"permutation_iters", 1000}};
  ExperimentConfig wcfg = ExperimentConfig::from_json(j, ".");

  Runner r(wcfg, 1, false, true);
  CHECK_THROWS_AS(r.cmd_train(), DataError);
  r.cmd_probe();
  CHECK(std::filesystem::exists(dir.path() / "b" / "effects.csv"));
  CHECK(r.vocabulary().size() == load_weights(out_a / "model.agsc").vocab.size());
}

TEST_CASE("sweep, overlap, contours, and report complete from one config") {
  testutil::TempDir dir("runner-full");
  auto out = dir.path() / "run";
  ExperimentConfig cfg = tiny_cfg(out);
  Runner r(cfg, 1, false, true);
  r.cmd_sweep();
  r.cmd_overlap();
  r.cmd_contours();
  bool oracles_pass = r.cmd_oracle_check();
  CHECK(oracles_pass);
  r.cmd_report();

  for (const char* f :
       {"effects.csv", "effects_detail.jsonl", "total_effects.csv",
        "sweep_en-simple-original.csv", "sweep_en-across_pp-original.csv", "overlap.csv",
        "overlap.json", "contours.csv", "contours_by_attractor.csv", "oracle_check.txt",
        "report/metrics_table.csv", "report/index.json"})
    CHECK(std::filesystem::exists(out / f));

  auto index = nlohmann::json::parse(read_text_file(out / "report" / "index.json"));
  CHECK(index.at("seed").get<std::uint64_t>() == 11);
  for (const auto& entry : index.at("files")) {
    auto rel = std::filesystem::path("report") / entry.at("name").get<std::string>();
    CAPTURE(rel.string());
    REQUIRE(std::filesystem::exists(out / rel));
    std::string content = read_text_file(out / rel);
    CHECK(crc32_hex(crc32(content.data(), content.size())) ==
          entry.at("crc32").get<std::string>());
  }

  // Report refuses to run before its inputs exist.
  testutil::TempDir empty("runner-empty");
  Runner fresh(tiny_cfg(empty.path() / "none"), 1, false, true);
  CHECK_THROWS_AS(fresh.cmd_report(), DataError);
}
