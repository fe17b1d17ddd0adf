#include "agscan/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "agscan/errors.hpp"
#include "agscan/io_util.hpp"
#include "agscan/lexicon.hpp"
#include "agscan/version.hpp"

namespace agscan {

namespace {

void check_keys(const nlohmann::json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw DataError("config: " + section + " must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw DataError("config: unknown key \"" + key + "\" in " + section);
  }
}

double get_f64(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw DataError(std::string("config: ") + key + " must be a number");
  return j.at(key).get<double>();
}

std::size_t get_count(const nlohmann::json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const nlohmann::json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && v.get<std::int64_t>() < 0))
    throw DataError(std::string("config: ") + key + " must be a non-negative integer");
  return v.get<std::size_t>();
}

std::string get_str(const nlohmann::json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw DataError(std::string("config: ") + key + " must be a string");
  return j.at(key).get<std::string>();
}

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::filesystem::path& p) {
  if (p.empty() || p.is_absolute()) return p.lexically_normal();
  return (base / p).lexically_normal();
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!stimuli.languages.empty(), "config: stimuli.languages is empty");
  std::set<std::string> seen_langs;
  for (const std::string& lang : stimuli.languages) {
    if (!is_known_language(lang)) throw DataError("config: unknown language " + lang);
    if (!seen_langs.insert(lang).second)
      throw DataError("config: duplicate language " + lang);
  }
  require(!stimuli.structures.empty(), "config: stimuli.structures is empty");
  std::set<Structure> seen_structures;
  for (Structure s : stimuli.structures) {
    if (!is_agreement_structure(s))
      throw DataError("config: stimuli.structures must name agreement structures");
    if (!seen_structures.insert(s).second) throw DataError("config: duplicate structure");
  }
  if (stimuli.max_n < 1) throw DataError("config: stimuli.max_n must be >= 1");
  if (stimuli.word_variant != "original" && stimuli.word_variant != "short" &&
      stimuli.word_variant != "both")
    throw DataError("config: word_variant must be original, short, or both");
  if (stimuli.include_baselines && data.baseline_file.empty())
    throw DataError("config: include_baselines requires data.baseline_file");

  if (data.lexicon_files.empty()) throw DataError("config: data.lexicon_files is empty");
  for (const std::filesystem::path& p : data.lexicon_files)
    if (!std::filesystem::exists(p)) throw DataError("config: missing lexicon file " + p.string());
  if (!data.baseline_file.empty() && !std::filesystem::exists(data.baseline_file))
    throw DataError("config: missing baseline file " + data.baseline_file.string());
  if (data.probe_lexicon != "train" && data.probe_lexicon != "heldout")
    throw DataError("config: data.probe_lexicon must be train or heldout");
  if (!(data.probe_fraction > 0.0 && data.probe_fraction < 1.0))
    throw DataError("config: data.probe_fraction must lie in (0, 1)");

  if (!weights_file.empty()) {
    if (!std::filesystem::exists(weights_file))
      throw DataError("config: missing weights file " + weights_file.string());
  } else {
    if (!has_model_section)
      throw DataError("config: provide either weights_file or a model section");
    if (!(training.lr > 0.0)) throw DataError("config: training.lr must be positive");
    if (training.batch_size < 1) throw DataError("config: training.batch_size must be >= 1");
    if (training.steps < 1) throw DataError("config: training.steps must be >= 1");
    if (!(training.mask_rate >= 0.0 && training.mask_rate < 1.0))
      throw DataError("config: training.mask_rate must lie in [0, 1)");
    if (training.corpus_sentences < 1)
      throw DataError("config: training.corpus_sentences must be >= 1");
    if (model.n_layers < 1 || model.hidden_dim < 1 || model.n_heads < 1 || model.ff_dim < 1 ||
        model.max_len < 2 || model.hidden_dim % model.n_heads != 0)
      throw DataError("config: invalid model architecture");
  }

  if (!(mediation.sweep_fraction > 0.0 && mediation.sweep_fraction <= 1.0))
    throw DataError("config: mediation.sweep_fraction must lie in (0, 1]");
  if (!(analysis.fraction > 0.0 && analysis.fraction <= 1.0))
    throw DataError("config: analysis.fraction must lie in (0, 1]");
  if (analysis.top_n < 1) throw DataError("config: analysis.top_n must be >= 1");
  if (analysis.permutation_iters < 1000)
    throw DataError("config: analysis.permutation_iters must be >= 1000");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["out_dir"] = out_dir.string();
  if (!weights_file.empty()) j["weights_file"] = weights_file.string();
  if (has_model_section) {
    nlohmann::json m;
    m["mode"] = to_string(model.mode);
    m["n_layers"] = model.n_layers;
    m["hidden_dim"] = model.hidden_dim;
    m["n_heads"] = model.n_heads;
    m["ff_dim"] = model.ff_dim;
    m["max_len"] = model.max_len;
    j["model"] = m;
    nlohmann::json t;
    t["lr"] = training.lr;
    t["batch_size"] = training.batch_size;
    t["steps"] = training.steps;
    t["mask_rate"] = training.mask_rate;
    t["corpus_sentences"] = training.corpus_sentences;
    j["training"] = t;
  }
  nlohmann::json d;
  std::vector<std::string> lex;
  for (const std::filesystem::path& p : data.lexicon_files) lex.push_back(p.string());
  d["lexicon_files"] = lex;
  if (!data.baseline_file.empty()) d["baseline_file"] = data.baseline_file.string();
  d["probe_lexicon"] = data.probe_lexicon;
  d["probe_fraction"] = data.probe_fraction;
  j["data"] = d;
  nlohmann::json s;
  s["languages"] = stimuli.languages;
  std::vector<std::string> structures;
  for (Structure st : stimuli.structures) structures.push_back(to_string(st));
  s["structures"] = structures;
  s["max_n"] = stimuli.max_n;
  s["word_variant"] = stimuli.word_variant;
  s["include_baselines"] = stimuli.include_baselines;
  j["stimuli"] = s;
  nlohmann::json m;
  m["position_policy"] = to_string(mediation.position_policy);
  m["explicit_position"] = mediation.explicit_position;
  m["k_step"] = mediation.k_step;
  m["sweep_fraction"] = mediation.sweep_fraction;
  j["mediation"] = m;
  nlohmann::json a;
  a["fraction"] = analysis.fraction;
  a["top_n"] = analysis.top_n;
  a["permutation_iters"] = analysis.permutation_iters;
  j["analysis"] = a;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir) {
  check_keys(j, "config", {"seed", "out_dir", "weights_file", "model", "training", "data",
                           "stimuli", "mediation", "analysis"});
  ExperimentConfig cfg;
  if (!j.contains("seed")) throw DataError("config: seed is mandatory");
  if (!j.at("seed").is_number_unsigned())
    throw DataError("config: seed must be an unsigned integer");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.out_dir = get_str(j, "out_dir", "run");
  cfg.weights_file = resolve(base_dir, get_str(j, "weights_file", ""));

  if (!cfg.weights_file.empty() && (j.contains("model") || j.contains("training")))
    throw DataError("config: weights_file excludes the model and training sections");

  if (j.contains("model")) {
    cfg.has_model_section = true;
    const nlohmann::json& m = j.at("model");
    check_keys(m, "model", {"mode", "n_layers", "hidden_dim", "n_heads", "ff_dim", "max_len"});
    cfg.model.mode = model_mode_from_string(get_str(m, "mode", to_string(cfg.model.mode)));
    cfg.model.n_layers = get_count(m, "n_layers", cfg.model.n_layers);
    cfg.model.hidden_dim = get_count(m, "hidden_dim", cfg.model.hidden_dim);
    cfg.model.n_heads = get_count(m, "n_heads", cfg.model.n_heads);
    cfg.model.ff_dim = get_count(m, "ff_dim", cfg.model.ff_dim);
    cfg.model.max_len = get_count(m, "max_len", cfg.model.max_len);
  }
  if (j.contains("training")) {
    const nlohmann::json& t = j.at("training");
    check_keys(t, "training", {"lr", "batch_size", "steps", "mask_rate", "corpus_sentences"});
    cfg.training.lr = get_f64(t, "lr", cfg.training.lr);
    cfg.training.batch_size = get_count(t, "batch_size", cfg.training.batch_size);
    cfg.training.steps = get_count(t, "steps", cfg.training.steps);
    cfg.training.mask_rate = get_f64(t, "mask_rate", cfg.training.mask_rate);
    cfg.training.corpus_sentences = get_count(t, "corpus_sentences", cfg.training.corpus_sentences);
  }

  if (!j.contains("data")) throw DataError("config: data section is mandatory");
  const nlohmann::json& d = j.at("data");
  check_keys(d, "data", {"lexicon_files", "baseline_file", "probe_lexicon", "probe_fraction"});
  if (!d.contains("lexicon_files") || !d.at("lexicon_files").is_array())
    throw DataError("config: data.lexicon_files must be an array");
  for (const nlohmann::json& p : d.at("lexicon_files")) {
    if (!p.is_string()) throw DataError("config: data.lexicon_files entries must be strings");
    cfg.data.lexicon_files.push_back(resolve(base_dir, p.get<std::string>()));
  }
  cfg.data.baseline_file = resolve(base_dir, get_str(d, "baseline_file", ""));
  cfg.data.probe_lexicon = get_str(d, "probe_lexicon", cfg.data.probe_lexicon);
  cfg.data.probe_fraction = get_f64(d, "probe_fraction", cfg.data.probe_fraction);

  if (j.contains("stimuli")) {
    const nlohmann::json& s = j.at("stimuli");
    check_keys(s, "stimuli",
               {"languages", "structures", "max_n", "word_variant", "include_baselines"});
    if (s.contains("languages"))
      cfg.stimuli.languages = s.at("languages").get<std::vector<std::string>>();
    if (s.contains("structures")) {
      cfg.stimuli.structures.clear();
      for (const nlohmann::json& st : s.at("structures"))
        cfg.stimuli.structures.push_back(structure_from_string(st.get<std::string>()));
    }
    cfg.stimuli.max_n = get_count(s, "max_n", cfg.stimuli.max_n);
    cfg.stimuli.word_variant = get_str(s, "word_variant", cfg.stimuli.word_variant);
    if (s.contains("include_baselines")) {
      if (!s.at("include_baselines").is_boolean())
        throw DataError("config: stimuli.include_baselines must be a boolean");
      cfg.stimuli.include_baselines = s.at("include_baselines").get<bool>();
    }
  }
  if (j.contains("mediation")) {
    const nlohmann::json& m = j.at("mediation");
    check_keys(m, "mediation",
               {"position_policy", "explicit_position", "k_step", "sweep_fraction"});
    cfg.mediation.position_policy = position_policy_from_string(
        get_str(m, "position_policy", to_string(cfg.mediation.position_policy)));
    cfg.mediation.explicit_position = get_count(m, "explicit_position", 0);
    cfg.mediation.k_step = get_count(m, "k_step", 0);
    cfg.mediation.sweep_fraction = get_f64(m, "sweep_fraction", cfg.mediation.sweep_fraction);
  }
  if (j.contains("analysis")) {
    const nlohmann::json& a = j.at("analysis");
    check_keys(a, "analysis", {"fraction", "top_n", "permutation_iters"});
    cfg.analysis.fraction = get_f64(a, "fraction", cfg.analysis.fraction);
    cfg.analysis.top_n = get_count(a, "top_n", cfg.analysis.top_n);
    cfg.analysis.permutation_iters = get_count(a, "permutation_iters", cfg.analysis.permutation_iters);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config " + path.string() + ": " + e.what());
  }
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
  if (j.is_object() && j.contains("toolkit_version") && j.contains("config"))
    return ExperimentConfig::from_json(j.at("config"), base);
  return ExperimentConfig::from_json(j, base);
}

void RunManifest::upsert_stage(const std::string& name, const std::string& status,
                               const std::string& detail) {
  for (StageStatus& s : stages) {
    if (s.name == name) {
      s.status = status;
      s.detail = detail;
      return;
    }
  }
  stages.push_back({name, status, detail});
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["config"] = config_snapshot;
  j["toolkit_version"] = toolkit_version;
  j["random_init"] = random_init;
  j["inputs"] = input_checksums;
  j["outputs"] = output_checksums;
  j["wall_clock_seconds"] = wall_clock_seconds;
  nlohmann::json stage_list = nlohmann::json::array();
  for (const StageStatus& s : stages) {
    nlohmann::json e;
    e["name"] = s.name;
    e["status"] = s.status;
    e["detail"] = s.detail;
    stage_list.push_back(e);
  }
  j["stages"] = stage_list;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.config_snapshot = j.at("config");
  m.toolkit_version = j.at("toolkit_version").get<std::string>();
  if (j.contains("random_init")) m.random_init = j.at("random_init").get<bool>();
  if (j.contains("inputs"))
    m.input_checksums = j.at("inputs").get<std::map<std::string, std::string>>();
  if (j.contains("outputs"))
    m.output_checksums = j.at("outputs").get<std::map<std::string, std::string>>();
  if (j.contains("wall_clock_seconds")) m.wall_clock_seconds = j.at("wall_clock_seconds");
  if (j.contains("stages"))
    for (const nlohmann::json& e : j.at("stages"))
      m.stages.push_back({e.at("name").get<std::string>(), e.at("status").get<std::string>(),
                          e.value("detail", "")});
  return m;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  write_text_file(tmp, manifest.to_json().dump(2) + "\n");
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("manifest: cannot replace " + path.string() + ": " + ec.message());
}

std::string crc32_hex(std::uint32_t crc) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", crc);
  return buf;
}

}  // namespace agscan
