#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "agscan/mediation.hpp"
#include "agscan/model.hpp"
#include "agscan/templates.hpp"

namespace agscan {

struct TrainingSpec {
  double lr = 2e-3;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  double mask_rate = 0.15;          // MLM only
  std::size_t corpus_sentences = 50000;  // per language
};

struct DataSpec {
  std::vector<std::filesystem::path> lexicon_files;
  std::filesystem::path baseline_file;  // empty = no baselines available
  // "heldout": probe stimuli use a disjoint 30% noun/verb split (lexically
  // held-out words). "train": probe words are shared with training and only
  // the probe sentences themselves are excluded from the corpus.
  std::string probe_lexicon = "heldout";
  double probe_fraction = 0.3;
};

struct StimuliSpec {
  std::vector<std::string> languages = {"en"};
  std::vector<Structure> structures = {Structure::kSimple, Structure::kAcrossPp,
                                       Structure::kAcrossRc};
  std::size_t max_n = 200;
  std::string word_variant = "original";  // original | short | both
  bool include_baselines = false;
};

struct MediationSpec {
  PositionPolicy position_policy = PositionPolicy::kSubject;
  std::size_t explicit_position = 0;
  std::size_t k_step = 0;  // 0 = derive from sweep_fraction
  double sweep_fraction = 0.01;
};

struct AnalysisSpec {
  double fraction = 0.05;
  std::size_t top_n = 30;
  std::size_t permutation_iters = 10000;
};

// One experiment, fully specified. Either weights_file points at a trained
// model (model/training sections are then rejected) or the model section
// gives the architecture to train/initialize in-run.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "run";
  std::filesystem::path weights_file;  // empty = no pre-trained weights
  bool has_model_section = false;
  ModelConfig model;  // architecture only; vocab_size and seed are run-derived
  TrainingSpec training;
  DataSpec data;
  StimuliSpec stimuli;
  MediationSpec mediation;
  AnalysisSpec analysis;

  void validate() const;
  nlohmann::json to_json() const;
  // Relative input paths resolve against base_dir (the config file's
  // directory); out_dir stays as written and resolves against the CWD.
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir);
};

// Reads a config file, or a run manifest (recognized by its toolkit_version
// key), in which case the embedded config snapshot is loaded.
ExperimentConfig load_config(const std::filesystem::path& path);

struct StageStatus {
  std::string name;
  std::string status;  // ok | failed | skipped
  std::string detail;
};

struct RunManifest {
  nlohmann::json config_snapshot;
  std::string toolkit_version;
  bool random_init = false;  // artifacts from such runs are never adopted
  std::map<std::string, std::string> input_checksums;   // path -> crc32 hex
  std::map<std::string, std::string> output_checksums;  // out_dir-relative -> crc32 hex
  double wall_clock_seconds = 0.0;
  std::vector<StageStatus> stages;

  void upsert_stage(const std::string& name, const std::string& status,
                    const std::string& detail);
  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

// Atomic write: temp file in the same directory, then rename.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

std::string crc32_hex(std::uint32_t crc);

}  // namespace agscan
