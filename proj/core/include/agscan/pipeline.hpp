#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "agscan/analysis.hpp"
#include "agscan/experiment.hpp"
#include "agscan/lexicon.hpp"
#include "agscan/stimuli.hpp"
#include "agscan/trainer.hpp"
#include "agscan/vocab.hpp"

namespace agscan {

struct StimulusGroup {
  std::string language;
  Structure structure = Structure::kSimple;
  std::string word_variant;
  std::vector<Stimulus> stimuli;

  std::string label() const { return language + "-" + to_string(structure) + "-" + word_variant; }
};

// Executes pipeline commands against one output directory. Stages recompute
// their dependencies in memory unless the existing manifest proves that an
// artifact on disk came from this exact config, in which case it is reused;
// either path yields byte-identical downstream outputs.
class Runner {
 public:
  Runner(ExperimentConfig cfg, unsigned jobs, bool random_init, bool quiet = false);

  void cmd_train();
  void cmd_gen_stimuli();
  void cmd_probe();
  void cmd_sweep();
  void cmd_overlap();
  void cmd_contours();
  bool cmd_oracle_check();  // true when every oracle passes
  void cmd_report();

  const ExperimentConfig& config() const { return cfg_; }
  const std::vector<StimulusGroup>& stimulus_groups();
  const Model& model();
  const Vocabulary& vocabulary();
  const std::vector<EffectTable>& effect_tables();

 private:
  void log(const std::string& message) const;
  void finish(const std::string& stage, const std::string& detail);
  void fail(const std::string& stage, const std::string& error);
  void write_output(const std::string& relative, const std::string& content);
  bool output_current(const std::string& relative) const;

  void load_inputs();
  void ensure_stimuli();
  void ensure_model();
  void ensure_effects();
  std::vector<std::vector<std::string>> build_corpus();
  PositionSpec position_spec() const;
  std::size_t sweep_k() const;

  ExperimentConfig cfg_;
  unsigned jobs_;
  bool random_init_;
  bool quiet_;
  RunManifest manifest_;
  bool manifest_adopted_ = false;
  std::chrono::steady_clock::time_point start_;

  bool inputs_loaded_ = false;
  Lexicon lexicon_;
  LexiconSplit split_;
  std::vector<BaselinePair> baselines_;
  Vocabulary vocab_;
  bool vocab_from_weights_ = false;

  std::optional<std::vector<StimulusGroup>> groups_;
  std::optional<Model> model_;
  std::optional<double> final_loss_;
  std::optional<std::vector<EffectTable>> tables_;
};

}  // namespace agscan
