#include "agscan/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iterator>
#include <set>
#include <utility>

#include <json.hpp>

#include "agscan/errors.hpp"
#include "agscan/io_util.hpp"
#include "agscan/mediation.hpp"
#include "agscan/templates.hpp"
#include "agscan/version.hpp"
#include "agscan/weights_io.hpp"

namespace agscan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) s += ' ';
    s += tokens[i];
  }
  return s;
}

std::string csv_comment(std::uint64_t seed) {
  return "# seed=" + std::to_string(seed) + ", version=" + kVersion + "\n";
}

// Reads a sweep CSV back into memory. Doubles are printed with %.17g, which
// round-trips exactly, so metrics computed on a reread curve match the
// in-memory ones.
SparsityCurve parse_sweep_csv(const std::string& text) {
  SparsityCurve curve;
  bool header_seen = false;
  for (const std::string& line : split_lines(text)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      require(line == "m_neurons,pct_neurons,cumulative_nie,te_reference",
              "sweep csv: unexpected header: " + line);
      header_seen = true;
      continue;
    }
    const auto f = split_on(line, ',');
    require(f.size() == 4, "sweep csv: malformed row: " + line);
    curve.m_neurons.push_back(static_cast<std::size_t>(std::stoull(f[0])));
    curve.cumulative_nie.push_back(std::stod(f[2]));
    curve.te_reference = std::stod(f[3]);
  }
  require(header_seen && !curve.m_neurons.empty(), "sweep csv: no data rows");
  curve.k_step = curve.m_neurons.front();
  curve.n_neurons = curve.m_neurons.back();
  return curve;
}

// Rebuilds the effect tables from the detail JSONL written by the probe
// stage. The stored per-stimulus values parse back to identical doubles and
// the means are recomputed with the probe's own summation order, so a reread
// table is bit-identical to a recomputed one.
std::vector<EffectTable> parse_detail_jsonl(const std::string& text,
                                            const std::vector<StimulusGroup>& groups,
                                            std::size_t n_layers, std::size_t hidden_dim) {
  const auto lines = split_lines(text);
  const std::size_t n_neurons = (n_layers + 1) * hidden_dim;
  std::size_t li = 0;
  std::vector<EffectTable> tables;
  tables.reserve(groups.size());
  for (const StimulusGroup& g : groups) {
    EffectTable t;
    t.language = g.language;
    t.structure = g.structure;
    t.word_variant = g.word_variant;
    t.n_layers = n_layers;
    t.hidden_dim = hidden_dim;
    for (const Stimulus& st : g.stimuli) t.stimulus_ids.push_back(st.id);
    t.per_stimulus = Matrix(n_neurons, g.stimuli.size());
    t.nie_mean.assign(n_neurons, 0.0);
    for (std::size_t r = 0; r < n_neurons; ++r, ++li) {
      require(li < lines.size(), "effects detail: truncated file");
      const json row = json::parse(lines[li]);
      const NeuronId expect = NeuronId::from_flat(r, hidden_dim);
      require(row.at("language").get<std::string>() == g.language &&
                  row.at("structure").get<std::string>() == to_string(g.structure) &&
                  row.at("word_variant").get<std::string>() == g.word_variant &&
                  row.at("layer").get<std::size_t>() == expect.layer &&
                  row.at("dim").get<std::size_t>() == expect.dim,
              "effects detail: rows do not match the configured stimulus groups");
      const auto vals = row.at("nie_per_stimulus").get<std::vector<double>>();
      require(vals.size() == g.stimuli.size(), "effects detail: wrong stimulus count");
      double* dst = t.per_stimulus.row(r);
      std::copy(vals.begin(), vals.end(), dst);
      double acc = 0.0;
      for (std::size_t j = 0; j < vals.size(); ++j) acc += dst[j];
      t.nie_mean[r] = acc / static_cast<double>(vals.size());
    }
    tables.push_back(std::move(t));
  }
  require(li == lines.size(), "effects detail: extra rows beyond the configured groups");
  return tables;
}

}  // namespace

Runner::Runner(ExperimentConfig cfg, unsigned jobs, bool random_init, bool quiet)
    : cfg_(std::move(cfg)),
      jobs_(std::max(1u, jobs)),
      random_init_(random_init),
      quiet_(quiet),
      start_(std::chrono::steady_clock::now()) {
  cfg_.validate();
  manifest_.config_snapshot = cfg_.to_json();
  manifest_.toolkit_version = kVersion;
  manifest_.random_init = random_init_;
  // Adopt the previous manifest only when it proves the on-disk artifacts
  // came from this exact config trained normally on the same input files;
  // --random-init runs never reuse artifacts and their own artifacts are
  // never reused either.
  const fs::path mp = cfg_.out_dir / "manifest.json";
  if (!random_init_ && fs::exists(mp)) {
    try {
      RunManifest prior = RunManifest::from_json(json::parse(read_text_file(mp)));
      bool inputs_match = true;
      for (const auto& [path, crc] : prior.input_checksums)
        inputs_match &= fs::exists(path) && crc32_hex(crc32_file(path)) == crc;
      if (inputs_match && prior.config_snapshot == manifest_.config_snapshot &&
          prior.toolkit_version == kVersion && !prior.random_init) {
        manifest_ = std::move(prior);
        manifest_adopted_ = true;
        manifest_.random_init = false;
      }
    } catch (const std::exception&) {
      // Unreadable or foreign manifest: start fresh and reuse nothing.
    }
  }
}

void Runner::log(const std::string& message) const {
  if (!quiet_) std::fprintf(stderr, "[agscan] %s\n", message.c_str());
}

void Runner::finish(const std::string& stage, const std::string& detail) {
  manifest_.upsert_stage(stage, "ok", detail);
  manifest_.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  write_manifest(manifest_, cfg_.out_dir / "manifest.json");
  log(stage + ": " + detail);
}

void Runner::fail(const std::string& stage, const std::string& error) {
  manifest_.upsert_stage(stage, "failed", error);
  manifest_.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  try {
    write_manifest(manifest_, cfg_.out_dir / "manifest.json");
  } catch (const std::exception&) {
    // Best effort; the caller reports the original error.
  }
  log(stage + " failed: " + error);
}

void Runner::write_output(const std::string& relative, const std::string& content) {
  const fs::path path = cfg_.out_dir / relative;
  write_text_file(path, content);
  manifest_.output_checksums[relative] = crc32_hex(crc32(content.data(), content.size()));
  log("wrote " + path.string() + " (" + std::to_string(content.size()) + " bytes)");
}

bool Runner::output_current(const std::string& relative) const {
  if (!manifest_adopted_) return false;
  const auto it = manifest_.output_checksums.find(relative);
  if (it == manifest_.output_checksums.end()) return false;
  const fs::path path = cfg_.out_dir / relative;
  if (!fs::exists(path)) return false;
  try {
    return crc32_hex(crc32_file(path)) == it->second;
  } catch (const std::exception&) {
    return false;
  }
}

void Runner::load_inputs() {
  if (inputs_loaded_) return;
  for (const fs::path& p : cfg_.data.lexicon_files) {
    lexicon_.merge(Lexicon::load(p));
    manifest_.input_checksums[p.string()] = crc32_hex(crc32_file(p));
  }
  if (!cfg_.data.baseline_file.empty()) {
    baselines_ = load_baseline_pairs(cfg_.data.baseline_file);
    manifest_.input_checksums[cfg_.data.baseline_file.string()] =
        crc32_hex(crc32_file(cfg_.data.baseline_file));
  }
  if (!cfg_.weights_file.empty())
    manifest_.input_checksums[cfg_.weights_file.string()] =
        crc32_hex(crc32_file(cfg_.weights_file));
  if (cfg_.data.probe_lexicon == "heldout") {
    split_ = split_lexicon(lexicon_, cfg_.data.probe_fraction, cfg_.seed);
  } else {
    // Probing shares the training lexicon; only the probe sentences
    // themselves get excluded from the corpus.
    split_.train = lexicon_;
    split_.probe = Lexicon{};
  }
  if (cfg_.weights_file.empty())
    vocab_ = build_vocabulary(lexicon_, cfg_.stimuli.languages, baselines_);
  inputs_loaded_ = true;
  log("inputs: " + std::to_string(lexicon_.entries().size()) + " lexicon entries, " +
      std::to_string(baselines_.size()) + " baseline pairs");
}

void Runner::ensure_stimuli() {
  if (groups_) return;
  load_inputs();
  const Lexicon& probe_side = cfg_.data.probe_lexicon == "heldout" ? split_.probe : lexicon_;
  const bool want_original = cfg_.stimuli.word_variant != "short";
  const bool want_short = cfg_.stimuli.word_variant != "original";

  std::vector<StimulusGroup> originals;
  for (const std::string& lang : cfg_.stimuli.languages) {
    for (Structure s : cfg_.stimuli.structures) {
      Rng rng(derive_seed(cfg_.seed, "stimuli-" + lang + "-" + to_string(s)));
      StimulusGroup g{lang, s, "original",
                      generate_agreement_stimuli(agreement_template(lang, s), probe_side,
                                                 cfg_.stimuli.max_n, rng)};
      require(!g.stimuli.empty(), "stimuli: empty group " + g.label());
      originals.push_back(std::move(g));
    }
  }

  std::vector<StimulusGroup> groups;
  if (want_original) groups = originals;
  if (want_short)
    for (const StimulusGroup& g : originals)
      groups.push_back(
          {g.language, g.structure, "short", short_word_variant(g.stimuli, lexicon_)});

  if (cfg_.stimuli.include_baselines) {
    ModelMode mode;
    if (cfg_.has_model_section) {
      mode = cfg_.model.mode;
    } else {
      ensure_model();  // weights-file path only; does not touch stimuli
      mode = model_->config.mode;
    }
    const bool any_bigram =
        std::any_of(baselines_.begin(), baselines_.end(), [&](const BaselinePair& p) {
          return p.mode == Structure::kBigramSwap &&
                 (p.swap_slot == SwapSlot::kFirst || mode == ModelMode::kMlm);
        });
    if (any_bigram)
      groups.push_back({"en", Structure::kBigramSwap, "original",
                        generate_bigram_stimuli(baselines_, mode)});
    std::vector<Stimulus> semantic = generate_semantic_stimuli(baselines_, mode);
    StimulusGroup sem_short{"en", Structure::kSemanticShort, "original", {}};
    StimulusGroup sem_long{"en", Structure::kSemanticLong, "original", {}};
    for (Stimulus& st : semantic)
      (st.structure == Structure::kSemanticShort ? sem_short : sem_long)
          .stimuli.push_back(std::move(st));
    if (!sem_short.stimuli.empty()) groups.push_back(std::move(sem_short));
    if (!sem_long.stimuli.empty()) groups.push_back(std::move(sem_long));
  }

  groups_ = std::move(groups);
  std::vector<Stimulus> all;
  for (const StimulusGroup& g : *groups_)
    all.insert(all.end(), g.stimuli.begin(), g.stimuli.end());
  write_output("stimuli.jsonl", stimuli_to_jsonl(all));
  finish("stimuli",
         std::to_string(groups_->size()) + " groups, " + std::to_string(all.size()) + " stimuli");
}

void Runner::ensure_model() {
  if (model_) return;
  load_inputs();

  if (!cfg_.weights_file.empty()) {
    SavedModel saved = load_weights(cfg_.weights_file);
    vocab_ = saved.vocab;
    vocab_from_weights_ = true;
    if (random_init_) {
      ModelConfig mc = saved.config;
      mc.seed = derive_seed(cfg_.seed, "model-init");
      model_ = Model{mc, random_init_weights(mc)};
      final_loss_.reset();
      finish("model", "random reinit of " + cfg_.weights_file.string());
    } else {
      model_ = Model{saved.config, std::move(saved.weights)};
      final_loss_ = saved.final_loss;
      finish("model", "loaded " + cfg_.weights_file.string());
    }
    return;
  }

  ModelConfig mc = cfg_.model;
  mc.vocab_size = vocab_.size();
  mc.seed = derive_seed(cfg_.seed, "model-init");
  mc.validate();

  if (random_init_) {
    model_ = Model{mc, random_init_weights(mc)};
    final_loss_.reset();
    finish("model", "random init, no training");
    return;
  }

  if (output_current("model.agsc") && output_current("corpus.txt")) {
    SavedModel saved = load_weights(cfg_.out_dir / "model.agsc");
    if (saved.config == mc && saved.vocab.tokens() == vocab_.tokens()) {
      model_ = Model{saved.config, std::move(saved.weights)};
      final_loss_ = saved.final_loss;
      finish("train", "reused " + (cfg_.out_dir / "model.agsc").string());
      return;
    }
  }

  const auto sentences = build_corpus();
  std::vector<std::vector<TokenId>> corpus;
  corpus.reserve(sentences.size());
  for (const auto& s : sentences) {
    if (s.size() > mc.max_len)
      throw DataError("train: corpus sentence longer than model.max_len (" +
                      std::to_string(s.size()) + " > " + std::to_string(mc.max_len) + ")");
    corpus.push_back(vocab_.encode(s));
  }

  TrainHyper hyper;
  hyper.lr = cfg_.training.lr;
  hyper.batch_size = cfg_.training.batch_size;
  hyper.steps = cfg_.training.steps;
  hyper.mask_rate = cfg_.training.mask_rate;
  hyper.mask_token = vocab_.mask_id();
  hyper.seed = derive_seed(cfg_.seed, "training");
  const std::size_t every = std::max<std::size_t>(1, hyper.steps / 20);
  hyper.progress = [this, every, &hyper](std::size_t step, double loss) {
    if (step % every == 0 || step == hyper.steps)
      log("train step " + std::to_string(step) + "/" + std::to_string(hyper.steps) + " loss " +
          fmt_f64(loss));
  };

  log("training " + to_string(mc.mode) + " model (" + std::to_string(mc.n_layers) + " layers, d=" +
      std::to_string(mc.hidden_dim) + ", vocab=" + std::to_string(mc.vocab_size) + ") on " +
      std::to_string(corpus.size()) + " sentences");
  TrainResult result = train(mc, corpus, hyper);
  model_ = Model{mc, std::move(result.weights)};
  final_loss_ = result.final_loss;
  save_weights(cfg_.out_dir / "model.agsc", *model_, vocab_, final_loss_);
  manifest_.output_checksums["model.agsc"] =
      crc32_hex(crc32_file(cfg_.out_dir / "model.agsc"));
  finish("train", std::to_string(hyper.steps) + " steps, final loss " + fmt_f64(result.final_loss));
}

std::vector<std::vector<std::string>> Runner::build_corpus() {
  ensure_stimuli();
  std::set<std::vector<std::string>> exclude;
  for (const StimulusGroup& g : *groups_)
    for (const Stimulus& st : g.stimuli)
      for (auto& sentence : grammatical_realizations(st)) exclude.insert(std::move(sentence));

  const std::vector<BaselinePair> no_fillers;
  std::vector<std::vector<std::string>> corpus;
  for (const std::string& lang : cfg_.stimuli.languages) {
    Rng rng(derive_seed(cfg_.seed, "corpus-" + lang));
    const std::vector<BaselinePair>& fillers = lang == "en" ? baselines_ : no_fillers;
    auto sentences = generate_training_corpus(lang, split_, cfg_.training.corpus_sentences, rng,
                                              exclude, fillers);
    log("corpus " + lang + ": " + std::to_string(sentences.size()) + " sentences");
    corpus.insert(corpus.end(), std::make_move_iterator(sentences.begin()),
                  std::make_move_iterator(sentences.end()));
  }

  std::string text;
  for (const auto& s : corpus) {
    text += join_tokens(s);
    text += '\n';
  }
  write_output("corpus.txt", text);
  return corpus;
}

void Runner::ensure_effects() {
  if (tables_) return;
  ensure_model();
  ensure_stimuli();

  if (output_current("effects.csv") && output_current("effects_detail.jsonl") &&
      output_current("total_effects.csv")) {
    try {
      tables_ = parse_detail_jsonl(read_text_file(cfg_.out_dir / "effects_detail.jsonl"),
                                   *groups_, model_->config.n_layers, model_->config.hidden_dim);
      finish("probe", "reused effect tables (" + std::to_string(tables_->size()) + " groups)");
      return;
    } catch (const std::exception& e) {
      tables_.reset();
      log(std::string("stale effect tables, recomputing: ") + e.what());
    }
  }

  std::vector<EffectTable> tables;
  std::vector<TotalEffect> totals;
  for (const StimulusGroup& g : *groups_) {
    log("probing " + g.label() + ": " + std::to_string(g.stimuli.size()) + " stimuli x " +
        std::to_string(model_->config.neuron_count()) + " neurons");
    tables.push_back(all_neuron_nies(*model_, g.stimuli, vocab_, position_spec(), jobs_));
    totals.push_back(total_effect(*model_, g.stimuli, vocab_));
  }
  tables_ = std::move(tables);
  write_output("effects.csv", effect_tables_to_csv(*tables_, cfg_.seed));
  write_output("effects_detail.jsonl", effect_tables_detail_jsonl(*tables_));
  write_output("total_effects.csv", total_effects_to_csv(totals, cfg_.seed));
  finish("probe", std::to_string(tables_->size()) + " effect tables");
}

PositionSpec Runner::position_spec() const {
  return PositionSpec{cfg_.mediation.position_policy, cfg_.mediation.explicit_position};
}

std::size_t Runner::sweep_k() const {
  require(model_.has_value(), "sweep_k: model not loaded");
  const std::size_t n = model_->config.neuron_count();
  if (cfg_.mediation.k_step != 0) {
    require(cfg_.mediation.k_step <= n, "sweep: k_step exceeds the neuron count");
    return cfg_.mediation.k_step;
  }
  return default_k_step(n, cfg_.mediation.sweep_fraction);
}

void Runner::cmd_train() {
  try {
    if (!cfg_.weights_file.empty())
      throw DataError("train: the config points at pre-trained weights; nothing to train");
    if (random_init_)
      throw DataError("train: --random-init skips training; drop the flag or run probe directly");
    ensure_model();
  } catch (const std::exception& e) {
    fail("train", e.what());
    throw;
  }
}

void Runner::cmd_gen_stimuli() {
  try {
    ensure_stimuli();
  } catch (const std::exception& e) {
    fail("stimuli", e.what());
    throw;
  }
}

void Runner::cmd_probe() {
  try {
    ensure_effects();
  } catch (const std::exception& e) {
    fail("probe", e.what());
    throw;
  }
}

void Runner::cmd_sweep() {
  try {
    ensure_effects();
    const std::size_t k = sweep_k();
    for (std::size_t i = 0; i < groups_->size(); ++i) {
      const StimulusGroup& g = (*groups_)[i];
      log("sweeping " + g.label() + " (k=" + std::to_string(k) + ")");
      SparsityCurve curve =
          sparsity_sweep(*model_, g.stimuli, vocab_, (*tables_)[i], k, position_spec(), jobs_);
      write_output("sweep_" + g.label() + ".csv", sparsity_curve_to_csv(curve, cfg_.seed));
    }
    finish("sweep", std::to_string(groups_->size()) + " curves, k=" + std::to_string(k));
  } catch (const std::exception& e) {
    fail("sweep", e.what());
    throw;
  }
}

void Runner::cmd_overlap() {
  try {
    ensure_effects();
    if (tables_->size() < 2)
      throw DataError("overlap: need at least two stimulus groups, got " +
                      std::to_string(tables_->size()));
    std::vector<NeuronSet> sets;
    sets.reserve(tables_->size());
    for (const EffectTable& t : *tables_) sets.push_back(top_neurons_global(t, cfg_.analysis.top_n));
    Rng rng(derive_seed(cfg_.seed, "overlap-permutation"));
    const OverlapMatrix m =
        overlap_matrix(sets, model_->config.neuron_count(), cfg_.analysis.permutation_iters, rng);
    write_output("overlap.csv", overlap_matrix_to_csv(m, cfg_.seed));
    write_output("overlap.json", overlap_matrix_to_json(m, cfg_.seed));
    finish("overlap", std::to_string(sets.size()) + " sets of " +
                          std::to_string(cfg_.analysis.top_n) + " neurons");
  } catch (const std::exception& e) {
    fail("overlap", e.what());
    throw;
  }
}

void Runner::cmd_contours() {
  try {
    ensure_effects();
    std::vector<LayerContour> original;
    std::vector<LayerContour> shorts;
    for (const EffectTable& t : *tables_) {
      LayerContour c{t.language, t.structure, t.word_variant,
                     layer_contour(t, cfg_.analysis.fraction)};
      (t.word_variant == "short" ? shorts : original).push_back(std::move(c));
    }
    // Short-only runs still get a contours.csv so the report stage always
    // has its main input.
    write_output("contours.csv", contours_to_csv(original.empty() ? shorts : original, cfg_.seed));
    if (!shorts.empty()) write_output("contours_short.csv", contours_to_csv(shorts, cfg_.seed));

    std::string by_attr = csv_comment(cfg_.seed);
    by_attr += "language,structure,attractor_number,layer,mean_top_nie\n";
    bool any_attr = false;
    for (std::size_t i = 0; i < groups_->size(); ++i) {
      const StimulusGroup& g = (*groups_)[i];
      if (g.word_variant != "original") continue;
      for (Number num : {Number::kSg, Number::kPl}) {
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < g.stimuli.size(); ++j)
          if (g.stimuli[j].attractor_number == num) cols.push_back(j);
        if (cols.empty()) continue;
        const EffectTable sub = subset_stimuli((*tables_)[i], cols);
        const std::vector<double> contour = layer_contour(sub, cfg_.analysis.fraction);
        for (std::size_t layer = 0; layer < contour.size(); ++layer)
          by_attr += g.language + "," + to_string(g.structure) + "," + to_string(num) + "," +
                     std::to_string(layer) + "," + fmt_f64(contour[layer]) + "\n";
        any_attr = true;
      }
    }
    if (any_attr) write_output("contours_by_attractor.csv", by_attr);
    finish("contours", std::to_string(original.size() + shorts.size()) + " contour rows");
  } catch (const std::exception& e) {
    fail("contours", e.what());
    throw;
  }
}

bool Runner::cmd_oracle_check() {
  try {
    ensure_model();
    ensure_stimuli();
    std::string report;
    bool all_pass = true;
    const auto emit = [&](const std::string& name, bool pass, const std::string& detail) {
      const std::string line = name + ": " + (pass ? "PASS" : "FAIL") + " (" + detail + ")";
      std::printf("%s\n", line.c_str());
      report += line + "\n";
      all_pass = all_pass && pass;
    };

    // Overriding the whole hidden column at the subject position, from the
    // embedding output upward, must reproduce the swap prompt's log ratio.
    double worst_full = 0.0;
    std::size_t n_full = 0;
    for (const StimulusGroup& g : *groups_) {
      const std::size_t take = std::min<std::size_t>(g.stimuli.size(), 3);
      for (std::size_t i = 0; i < take; ++i) {
        const Stimulus& st = g.stimuli[i];
        const ProbeEncoding enc = encode_stimulus(st, vocab_, model_->config.mode,
                                                  PositionSpec{PositionPolicy::kSubject, 0});
        const ForwardResult null_run = forward(*model_, enc.tokens_null, enc.query_position);
        const ForwardResult swap_run = forward(*model_, enc.tokens_swap, enc.query_position);
        InterventionSpec spec;
        spec.position = enc.intervene_position;
        for (std::size_t layer = 0; layer <= model_->config.n_layers; ++layer)
          for (std::size_t dim = 0; dim < model_->config.hidden_dim; ++dim) {
            const NeuronId n{layer, dim};
            spec.overrides.push_back({n, swap_run.cache.at(n, enc.intervene_position)});
          }
        const Vector logits = resume_forward(*model_, null_run.cache, spec, enc.query_position);
        const double got = logits[enc.v_mismatch] - logits[enc.v_match];
        const double want = swap_run.logits[enc.v_mismatch] - swap_run.logits[enc.v_match];
        worst_full = std::max(worst_full, std::abs(got - want));
        ++n_full;
      }
    }
    emit("column-completeness", worst_full <= 1e-9,
         "max |log-ratio gap| " + fmt_f64(worst_full) + " over " + std::to_string(n_full) +
             " stimuli");

    // The layer-reuse engine must agree with the reference implementation
    // that runs three full forwards per neuron.
    ModelConfig small;
    small.mode = model_->config.mode;
    small.n_layers = 2;
    small.hidden_dim = 8;
    small.n_heads = 2;
    small.ff_dim = 16;
    small.vocab_size = vocab_.size();
    small.max_len = model_->config.max_len;
    small.seed = derive_seed(cfg_.seed, "oracle-naive");
    const Model tiny{small, random_init_weights(small)};
    const StimulusGroup& first = (*groups_)[0];
    const std::vector<Stimulus> sub(
        first.stimuli.begin(),
        first.stimuli.begin() + std::min<std::size_t>(first.stimuli.size(), 3));
    const EffectTable fast = all_neuron_nies(tiny, sub, vocab_, position_spec(), jobs_);
    const EffectTable slow = naive_effect_table(tiny, sub, vocab_, position_spec());
    double worst_naive = 0.0;
    for (std::size_t r = 0; r < fast.n_neurons(); ++r)
      for (std::size_t c = 0; c < fast.n_stimuli(); ++c)
        worst_naive =
            std::max(worst_naive, std::abs(fast.per_stimulus(r, c) - slow.per_stimulus(r, c)));
    emit("naive-equivalence", worst_naive <= 1e-10,
         "max |nie gap| " + fmt_f64(worst_naive) + " over " + std::to_string(fast.n_neurons()) +
             " neurons x " + std::to_string(fast.n_stimuli()) + " stimuli");

    // Overriding a neuron with its own activation must not move the answer.
    Rng rng(derive_seed(cfg_.seed, "oracle-null"));
    std::vector<std::pair<std::size_t, std::size_t>> index;
    for (std::size_t gi = 0; gi < groups_->size(); ++gi)
      for (std::size_t si = 0; si < (*groups_)[gi].stimuli.size(); ++si)
        index.push_back({gi, si});
    const std::size_t draws = 200;
    double worst_null = 0.0;
    for (std::size_t d = 0; d < draws; ++d) {
      const auto [gi, si] = index[rng.index(index.size())];
      const Stimulus& st = (*groups_)[gi].stimuli[si];
      const ProbeEncoding enc = encode_stimulus(st, vocab_, model_->config.mode, position_spec());
      const ForwardResult null_run = forward(*model_, enc.tokens_null, enc.query_position);
      const NeuronId n{rng.index(model_->config.n_layers + 1),
                       rng.index(model_->config.hidden_dim)};
      InterventionSpec spec;
      spec.position = enc.intervene_position;
      spec.overrides.push_back({n, null_run.cache.at(n, enc.intervene_position)});
      const Vector logits = resume_forward(*model_, null_run.cache, spec, enc.query_position);
      const double base = null_run.logits[enc.v_mismatch] - null_run.logits[enc.v_match];
      const double with = logits[enc.v_mismatch] - logits[enc.v_match];
      worst_null = std::max(worst_null, std::abs(std::expm1(with - base)));
    }
    emit("null-intervention-zero", worst_null <= 1e-12,
         "max |nie| " + fmt_f64(worst_null) + " over " + std::to_string(draws) + " draws");

    write_output("oracle_check.txt", report);
    finish("oracle-check", all_pass ? "all oracles pass" : "oracle failures, see oracle_check.txt");
    return all_pass;
  } catch (const std::exception& e) {
    fail("oracle-check", e.what());
    throw;
  }
}

void Runner::cmd_report() {
  try {
    const auto need = [&](const std::string& rel) {
      const fs::path p = cfg_.out_dir / rel;
      if (!fs::exists(p))
        throw DataError("report: missing " + rel +
                        "; run the probe, sweep, overlap, and contours stages first");
      return read_text_file(p);
    };
    (void)need("effects.csv");
    const std::string contours_csv = need("contours.csv");
    const std::string overlap_csv = need("overlap.csv");
    const std::string overlap_json = need("overlap.json");

    std::vector<std::string> sweep_files;
    for (const auto& entry : fs::directory_iterator(cfg_.out_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("sweep_", 0) == 0 && name.size() > 10 &&
          name.substr(name.size() - 4) == ".csv")
        sweep_files.push_back(name);
    }
    std::sort(sweep_files.begin(), sweep_files.end());
    if (sweep_files.empty())
      throw DataError("report: no sweep curves; run the sweep stage first");

    const std::string mode_str = cfg_.has_model_section
                                     ? to_string(cfg_.model.mode)
                                     : to_string(load_weights(cfg_.weights_file).config.mode);
    const std::string comment = csv_comment(cfg_.seed);

    std::vector<std::pair<std::string, std::string>> files;

    std::string metrics = comment;
    metrics += "language,model,structure,% Neurons for TE,% Neurons for Max. NIE\n";
    std::size_t metric_rows = 0;
    const auto add_rows = [&](const std::string& variant) {
      for (const std::string& f : sweep_files) {
        const std::string label = f.substr(6, f.size() - 10);
        const auto parts = split_on(label, '-');
        if (parts.size() != 3 || parts[2] != variant) continue;
        const SparsityCurve curve = parse_sweep_csv(read_text_file(cfg_.out_dir / f));
        const SparsityMetrics m = sparsity_metrics(curve);
        metrics += parts[0] + "," + mode_str + "," + parts[1] + "," + fmt_f64(m.pct_to_te) + "," +
                   fmt_f64(m.pct_to_max) + "\n";
        ++metric_rows;
      }
    };
    add_rows("original");
    if (metric_rows == 0) add_rows("short");
    files.push_back({"metrics_table.csv", std::move(metrics)});

    std::vector<std::pair<std::string, std::string>> contour_groups;
    std::string col_header;
    for (const std::string& line : split_lines(contours_csv)) {
      if (line.empty() || line[0] == '#') continue;
      if (col_header.empty()) {
        col_header = line;
        continue;
      }
      const auto f = split_on(line, ',');
      require(f.size() == 4, "report: malformed contour row: " + line);
      const std::string key = f[0] + "_" + f[1];
      auto it = std::find_if(contour_groups.begin(), contour_groups.end(),
                             [&](const auto& g) { return g.first == key; });
      if (it == contour_groups.end()) {
        contour_groups.push_back({key, ""});
        it = std::prev(contour_groups.end());
      }
      it->second += line + "\n";
    }
    for (const auto& [key, rows] : contour_groups)
      files.push_back({"contours_" + key + ".csv", comment + col_header + "\n" + rows});

    files.push_back({"overlap.csv", overlap_csv});
    files.push_back({"overlap.json", overlap_json});
    for (const std::string& f : sweep_files) files.push_back({f, read_text_file(cfg_.out_dir / f)});

    for (const auto& [name, content] : files) write_output("report/" + name, content);

    json index;
    index["files"] = json::array();
    std::vector<std::string> names;
    names.reserve(files.size());
    for (const auto& [name, content] : files) names.push_back(name);
    std::sort(names.begin(), names.end());
    for (const std::string& name : names) {
      json f;
      f["name"] = name;
      f["crc32"] = manifest_.output_checksums.at("report/" + name);
      index["files"].push_back(f);
    }
    index["seed"] = cfg_.seed;
    index["version"] = kVersion;
    write_output("report/index.json", index.dump(2) + "\n");
    finish("report", std::to_string(files.size() + 1) + " files under report/");
  } catch (const std::exception& e) {
    fail("report", e.what());
    throw;
  }
}

const std::vector<StimulusGroup>& Runner::stimulus_groups() {
  ensure_stimuli();
  return *groups_;
}

const Model& Runner::model() {
  ensure_model();
  return *model_;
}

const Vocabulary& Runner::vocabulary() {
  if (!cfg_.weights_file.empty())
    ensure_model();
  else
    load_inputs();
  return vocab_;
}

const std::vector<EffectTable>& Runner::effect_tables() {
  ensure_effects();
  return *tables_;
}

}  // namespace agscan
