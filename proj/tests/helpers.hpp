#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "agscan/lexicon.hpp"
#include "agscan/mediation.hpp"
#include "agscan/model.hpp"
#include "agscan/rng.hpp"
#include "agscan/stimuli.hpp"
#include "agscan/templates.hpp"
#include "agscan/trainer.hpp"
#include "agscan/vocab.hpp"

namespace testutil {

inline std::filesystem::path data_dir() { return std::filesystem::path(AGSCAN_DATA_DIR); }
inline std::filesystem::path config_dir() { return std::filesystem::path(AGSCAN_CONFIG_DIR); }

inline const agscan::Lexicon& en_lexicon() {
  static agscan::Lexicon lex = agscan::Lexicon::load(data_dir() / "lexicon_en.tsv");
  return lex;
}

inline const agscan::Lexicon& all_lexicons() {
  static agscan::Lexicon lex = [] {
    agscan::Lexicon merged;
    for (const char* name : {"lexicon_en.tsv", "lexicon_fr.tsv", "lexicon_de.tsv",
                             "lexicon_nl.tsv", "lexicon_fi.tsv"})
      merged.merge(agscan::Lexicon::load(data_dir() / name));
    return merged;
  }();
  return lex;
}

inline const agscan::Vocabulary& en_vocab() {
  static agscan::Vocabulary v = agscan::build_vocabulary(en_lexicon(), {"en"}, {});
  return v;
}

inline agscan::Model tiny_model(agscan::ModelMode mode, std::size_t layers, std::size_t dim,
                                std::size_t heads, std::size_t ff, std::size_t vocab,
                                std::size_t max_len, std::uint64_t seed) {
  agscan::ModelConfig cfg;
  cfg.mode = mode;
  cfg.n_layers = layers;
  cfg.hidden_dim = dim;
  cfg.n_heads = heads;
  cfg.ff_dim = ff;
  cfg.vocab_size = vocab;
  cfg.max_len = max_len;
  cfg.seed = seed;
  cfg.validate();
  return {cfg, agscan::random_init_weights(cfg)};
}

inline std::vector<agscan::Stimulus> en_stimuli(agscan::Structure s, std::size_t n,
                                                std::uint64_t seed) {
  agscan::Rng rng(seed);
  return agscan::generate_agreement_stimuli(agscan::agreement_template("en", s), en_lexicon(), n,
                                            rng);
}

// Fresh directory under the build tree; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() / ("agscan-test-" + name);
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
