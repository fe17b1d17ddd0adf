#include "agscan/mediation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "agscan/errors.hpp"
#include "agscan/io_util.hpp"
#include "agscan/version.hpp"

namespace agscan {

namespace {

double pair_log_ratio(const Vector& logits, const ProbeEncoding& enc) {
  // The logsumexp normalizer cancels between the two tokens, so the log
  // probability ratio is a plain logit difference.
  const double log_y = logits[enc.v_mismatch] - logits[enc.v_match];
  if (!std::isfinite(log_y)) throw NumericError("mediation: non-finite response ratio");
  return log_y;
}

struct Prepared {
  ProbeEncoding enc;
  ActivationCache null_cache;
  ActivationCache swap_cache;
  double log_y_null = 0.0;
  double log_y_swap = 0.0;
};

Prepared prepare(const Model& model, const Stimulus& st, const Vocabulary& vocab,
                 const PositionSpec& position) {
  Prepared p;
  p.enc = encode_stimulus(st, vocab, model.config.mode, position);
  ForwardResult rn = forward(model, p.enc.tokens_null, p.enc.query_position);
  ForwardResult rs = forward(model, p.enc.tokens_swap, p.enc.query_position);
  p.log_y_null = pair_log_ratio(rn.logits, p.enc);
  p.log_y_swap = pair_log_ratio(rs.logits, p.enc);
  p.null_cache = std::move(rn.cache);
  p.swap_cache = std::move(rs.cache);
  return p;
}

void check_homogeneous(const std::vector<Stimulus>& stimuli) {
  require(!stimuli.empty(), "mediation: empty stimulus set");
  for (const Stimulus& st : stimuli) {
    require(st.language == stimuli.front().language &&
                st.structure == stimuli.front().structure &&
                st.word_variant == stimuli.front().word_variant,
            "mediation: stimulus set mixes language, structure, or word variant");
  }
}

EffectTable make_table(const Model& model, const std::vector<Stimulus>& stimuli) {
  EffectTable t;
  t.language = stimuli.front().language;
  t.structure = stimuli.front().structure;
  t.word_variant = stimuli.front().word_variant;
  t.n_layers = model.config.n_layers;
  t.hidden_dim = model.config.hidden_dim;
  t.stimulus_ids.reserve(stimuli.size());
  for (const Stimulus& st : stimuli) t.stimulus_ids.push_back(st.id);
  t.nie_mean.assign(t.n_neurons(), 0.0);
  t.per_stimulus = Matrix(t.n_neurons(), stimuli.size());
  return t;
}

void finish_row_means(EffectTable& t) {
  const std::size_t s = t.n_stimuli();
  for (std::size_t i = 0; i < t.n_neurons(); ++i) {
    const double* row = t.per_stimulus.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < s; ++j) acc += row[j];
    t.nie_mean[i] = acc / static_cast<double>(s);
  }
}

// Runs fn(begin, end) over `count` items split into contiguous ranges, one
// per worker. Workers write disjoint output rows, so any job count yields
// the same result.
template <typename Fn>
void parallel_ranges(std::size_t count, unsigned jobs, const Fn& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(jobs, count));
  if (workers == 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    threads.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (std::thread& th : threads) th.join();
}

std::string csv_header(std::uint64_t seed) {
  return "# seed=" + std::to_string(seed) + ", version=" + kVersion + "\n";
}

}  // namespace

std::string to_string(PositionPolicy p) {
  switch (p) {
    case PositionPolicy::kSubject: return "subject";
    case PositionPolicy::kVerbSlot: return "verb_slot";
    case PositionPolicy::kExplicit: return "explicit";
  }
  throw ContractError("mediation: bad position policy");
}

PositionPolicy position_policy_from_string(const std::string& s) {
  if (s == "subject") return PositionPolicy::kSubject;
  if (s == "verb_slot") return PositionPolicy::kVerbSlot;
  if (s == "explicit") return PositionPolicy::kExplicit;
  throw DataError("unknown position policy: " + s);
}

ProbeEncoding encode_stimulus(const Stimulus& st, const Vocabulary& vocab, ModelMode mode,
                              const PositionSpec& position) {
  validate_stimulus(st);
  ProbeEncoding enc;
  if (mode == ModelMode::kAlm) {
    require(st.verb_slot >= 1, "encode: causal prompt needs tokens before the verb slot");
    std::vector<std::string> prefix_null(st.tokens_null.begin(),
                                         st.tokens_null.begin() + st.verb_slot);
    std::vector<std::string> prefix_swap(st.tokens_swap.begin(),
                                         st.tokens_swap.begin() + st.verb_slot);
    enc.tokens_null = vocab.encode(prefix_null);
    enc.tokens_swap = vocab.encode(prefix_swap);
    enc.query_position = st.verb_slot - 1;
  } else {
    enc.tokens_null = vocab.encode(st.tokens_null);
    enc.tokens_swap = vocab.encode(st.tokens_swap);
    enc.query_position = st.verb_slot;
  }
  enc.v_match = vocab.id(st.v_match);
  enc.v_mismatch = vocab.id(st.v_mismatch);
  switch (position.policy) {
    case PositionPolicy::kSubject:
      enc.intervene_position = st.subject_position;
      break;
    case PositionPolicy::kVerbSlot:
      enc.intervene_position = enc.query_position;
      break;
    case PositionPolicy::kExplicit:
      enc.intervene_position = position.explicit_position;
      break;
  }
  require(enc.intervene_position < enc.tokens_null.size(),
          "encode: intervention position outside the prompt");
  return enc;
}

GrammaticalityRatio response_ratio(const Model& model, const Stimulus& st,
                                   const Vocabulary& vocab, PromptVariant variant,
                                   const InterventionSpec* intervention) {
  const ProbeEncoding enc = encode_stimulus(st, vocab, model.config.mode);
  const std::vector<TokenId>& tokens =
      variant == PromptVariant::kNull ? enc.tokens_null : enc.tokens_swap;
  const ForwardResult r = forward(model, tokens, enc.query_position, intervention);
  return {pair_log_ratio(r.logits, enc)};
}

EffectRecord EffectTable::record(NeuronId neuron) const {
  require(neuron.layer <= n_layers && neuron.dim < hidden_dim,
          "effect table: neuron out of range");
  const std::size_t flat = neuron.flat(hidden_dim);
  EffectRecord rec;
  rec.neuron = neuron;
  rec.language = language;
  rec.structure = structure;
  rec.word_variant = word_variant;
  rec.nie_mean = nie_mean[flat];
  const double* row = per_stimulus.row(flat);
  rec.nie_per_stimulus.assign(row, row + n_stimuli());
  rec.n_stimuli = n_stimuli();
  return rec;
}

EffectRecord neuron_nie(const Model& model, const std::vector<Stimulus>& stimuli,
                        const Vocabulary& vocab, NeuronId neuron,
                        const PositionSpec& position) {
  check_homogeneous(stimuli);
  require(neuron.layer <= model.config.n_layers && neuron.dim < model.config.hidden_dim,
          "neuron_nie: neuron out of range");
  EffectRecord rec;
  rec.neuron = neuron;
  rec.language = stimuli.front().language;
  rec.structure = stimuli.front().structure;
  rec.word_variant = stimuli.front().word_variant;
  rec.nie_per_stimulus.reserve(stimuli.size());
  double acc = 0.0;
  for (const Stimulus& st : stimuli) {
    const Prepared p = prepare(model, st, vocab, position);
    InterventionSpec spec;
    spec.position = p.enc.intervene_position;
    spec.overrides = {{neuron, p.swap_cache.at(neuron, p.enc.intervene_position)}};
    const Vector logits = resume_forward(model, p.null_cache, spec, p.enc.query_position);
    const double nie = std::expm1(pair_log_ratio(logits, p.enc) - p.log_y_null);
    rec.nie_per_stimulus.push_back(nie);
    acc += nie;
  }
  rec.n_stimuli = stimuli.size();
  rec.nie_mean = acc / static_cast<double>(stimuli.size());
  return rec;
}

EffectTable all_neuron_nies(const Model& model, const std::vector<Stimulus>& stimuli,
                            const Vocabulary& vocab, const PositionSpec& position,
                            unsigned jobs) {
  check_homogeneous(stimuli);
  model.config.validate();
  EffectTable table = make_table(model, stimuli);

  std::vector<Prepared> prepared;
  prepared.reserve(stimuli.size());
  for (const Stimulus& st : stimuli) prepared.push_back(prepare(model, st, vocab, position));

  const std::size_t n = table.n_neurons();
  parallel_ranges(n, jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t flat = begin; flat < end; ++flat) {
      const NeuronId neuron = NeuronId::from_flat(flat, model.config.hidden_dim);
      double* row = table.per_stimulus.row(flat);
      for (std::size_t s = 0; s < prepared.size(); ++s) {
        const Prepared& p = prepared[s];
        InterventionSpec spec;
        spec.position = p.enc.intervene_position;
        spec.overrides = {{neuron, p.swap_cache.at(neuron, p.enc.intervene_position)}};
        const Vector logits = resume_forward(model, p.null_cache, spec, p.enc.query_position);
        row[s] = std::expm1(pair_log_ratio(logits, p.enc) - p.log_y_null);
      }
    }
  });
  finish_row_means(table);
  return table;
}

EffectTable naive_effect_table(const Model& model, const std::vector<Stimulus>& stimuli,
                               const Vocabulary& vocab, const PositionSpec& position) {
  check_homogeneous(stimuli);
  model.config.validate();
  EffectTable table = make_table(model, stimuli);
  for (std::size_t flat = 0; flat < table.n_neurons(); ++flat) {
    const NeuronId neuron = NeuronId::from_flat(flat, model.config.hidden_dim);
    double* row = table.per_stimulus.row(flat);
    for (std::size_t s = 0; s < stimuli.size(); ++s) {
      const ProbeEncoding enc = encode_stimulus(stimuli[s], vocab, model.config.mode, position);
      const ForwardResult rn = forward(model, enc.tokens_null, enc.query_position);
      const ForwardResult rs = forward(model, enc.tokens_swap, enc.query_position);
      InterventionSpec spec;
      spec.position = enc.intervene_position;
      spec.overrides = {{neuron, rs.cache.at(neuron, enc.intervene_position)}};
      const ForwardResult ro = forward(model, enc.tokens_null, enc.query_position, &spec);
      row[s] = std::expm1(pair_log_ratio(ro.logits, enc) - pair_log_ratio(rn.logits, enc));
    }
  }
  finish_row_means(table);
  return table;
}

TotalEffect total_effect(const Model& model, const std::vector<Stimulus>& stimuli,
                         const Vocabulary& vocab) {
  check_homogeneous(stimuli);
  TotalEffect te;
  te.language = stimuli.front().language;
  te.structure = stimuli.front().structure;
  te.word_variant = stimuli.front().word_variant;
  te.per_stimulus.reserve(stimuli.size());
  double acc = 0.0;
  for (const Stimulus& st : stimuli) {
    const ProbeEncoding enc = encode_stimulus(st, vocab, model.config.mode);
    const ForwardResult rn = forward(model, enc.tokens_null, enc.query_position);
    const ForwardResult rs = forward(model, enc.tokens_swap, enc.query_position);
    const double v = std::expm1(pair_log_ratio(rs.logits, enc) - pair_log_ratio(rn.logits, enc));
    te.per_stimulus.push_back(v);
    acc += v;
  }
  te.te_mean = acc / static_cast<double>(stimuli.size());
  return te;
}

std::vector<NeuronId> rank_neurons(const EffectTable& table) {
  std::vector<std::size_t> order(table.n_neurons());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (table.nie_mean[a] != table.nie_mean[b]) return table.nie_mean[a] > table.nie_mean[b];
    return a < b;
  });
  std::vector<NeuronId> ranked;
  ranked.reserve(order.size());
  for (std::size_t flat : order) ranked.push_back(NeuronId::from_flat(flat, table.hidden_dim));
  return ranked;
}

SparsityCurve sparsity_sweep(const Model& model, const std::vector<Stimulus>& stimuli,
                             const Vocabulary& vocab, const EffectTable& effects,
                             std::size_t k_step, const PositionSpec& position,
                             unsigned jobs) {
  check_homogeneous(stimuli);
  model.config.validate();
  require(effects.n_layers == model.config.n_layers &&
              effects.hidden_dim == model.config.hidden_dim,
          "sweep: effect table does not match the model");
  const std::size_t n = model.config.neuron_count();
  require(k_step >= 1, "sweep: k_step must be >= 1");
  require(k_step <= n, "sweep: k_step exceeds neuron count");

  const std::vector<NeuronId> ranking = rank_neurons(effects);

  SparsityCurve curve;
  curve.k_step = k_step;
  curve.n_neurons = n;
  for (std::size_t m = k_step; m < n; m += k_step) curve.m_neurons.push_back(m);
  curve.m_neurons.push_back(n);
  curve.cumulative_nie.assign(curve.m_neurons.size(), 0.0);

  std::vector<Prepared> prepared;
  prepared.reserve(stimuli.size());
  double te_acc = 0.0;
  for (const Stimulus& st : stimuli) {
    prepared.push_back(prepare(model, st, vocab, position));
    te_acc += std::expm1(prepared.back().log_y_swap - prepared.back().log_y_null);
  }
  curve.te_reference = te_acc / static_cast<double>(stimuli.size());

  parallel_ranges(curve.m_neurons.size(), jobs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t point = begin; point < end; ++point) {
      const std::size_t m = curve.m_neurons[point];
      double acc = 0.0;
      for (const Prepared& p : prepared) {
        InterventionSpec spec;
        spec.position = p.enc.intervene_position;
        spec.overrides.reserve(m);
        for (std::size_t j = 0; j < m; ++j)
          spec.overrides.emplace_back(ranking[j],
                                      p.swap_cache.at(ranking[j], p.enc.intervene_position));
        const Vector logits = resume_forward(model, p.null_cache, spec, p.enc.query_position);
        acc += std::expm1(pair_log_ratio(logits, p.enc) - p.log_y_null);
      }
      curve.cumulative_nie[point] = acc / static_cast<double>(prepared.size());
    }
  });
  return curve;
}

std::size_t default_k_step(std::size_t n_neurons, double fraction) {
  require(n_neurons >= 1, "k_step: no neurons");
  require(fraction > 0.0 && fraction <= 1.0, "k_step: fraction outside (0, 1]");
  std::size_t cap = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n_neurons)));
  cap = std::max<std::size_t>(1, std::min(cap, n_neurons));
  for (std::size_t d = cap; d >= 1; --d)
    if (n_neurons % d == 0) return d;
  return 1;
}

SparsityMetrics sparsity_metrics(const SparsityCurve& curve) {
  require(!curve.m_neurons.empty() &&
              curve.m_neurons.size() == curve.cumulative_nie.size(),
          "sparsity metrics: malformed curve");
  require(curve.m_neurons.back() == curve.n_neurons,
          "sparsity metrics: curve does not end at the full neuron set");
  const double tol = std::max(1e-12, 1e-9 * std::abs(curve.te_reference));

  SparsityMetrics mx;
  bool reached = false;
  for (std::size_t i = 0; i < curve.m_neurons.size(); ++i) {
    if (curve.cumulative_nie[i] >= curve.te_reference - tol) {
      mx.pct_to_te = 100.0 * static_cast<double>(curve.m_neurons[i]) /
                     static_cast<double>(curve.n_neurons);
      reached = true;
      break;
    }
  }
  // The final point reproduces the swap prompt, so the curve always reaches
  // the total effect; not reaching it means the inputs are inconsistent.
  require(reached, "sparsity metrics: curve never reaches the total effect");

  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.cumulative_nie.size(); ++i)
    if (curve.cumulative_nie[i] > curve.cumulative_nie[best]) best = i;
  mx.pct_to_max = 100.0 * static_cast<double>(curve.m_neurons[best]) /
                  static_cast<double>(curve.n_neurons);
  return mx;
}

std::string effect_tables_to_csv(const std::vector<EffectTable>& tables, std::uint64_t seed) {
  std::string out = csv_header(seed);
  out += "language,structure,word_variant,layer,dim,nie_mean,n_stimuli\n";
  for (const EffectTable& t : tables) {
    for (std::size_t flat = 0; flat < t.n_neurons(); ++flat) {
      const NeuronId id = NeuronId::from_flat(flat, t.hidden_dim);
      out += t.language + "," + to_string(t.structure) + "," + t.word_variant + "," +
             std::to_string(id.layer) + "," + std::to_string(id.dim) + "," +
             fmt_f64(t.nie_mean[flat]) + "," + std::to_string(t.n_stimuli()) + "\n";
    }
  }
  return out;
}

std::string effect_tables_detail_jsonl(const std::vector<EffectTable>& tables) {
  std::string out;
  for (const EffectTable& t : tables) {
    for (std::size_t flat = 0; flat < t.n_neurons(); ++flat) {
      const NeuronId id = NeuronId::from_flat(flat, t.hidden_dim);
      nlohmann::json j;
      j["language"] = t.language;
      j["structure"] = to_string(t.structure);
      j["word_variant"] = t.word_variant;
      j["layer"] = id.layer;
      j["dim"] = id.dim;
      const double* row = t.per_stimulus.row(flat);
      j["nie_per_stimulus"] = std::vector<double>(row, row + t.n_stimuli());
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::string total_effects_to_csv(const std::vector<TotalEffect>& totals, std::uint64_t seed) {
  std::string out = csv_header(seed);
  out += "language,structure,word_variant,te_mean,n_stimuli\n";
  for (const TotalEffect& te : totals)
    out += te.language + "," + to_string(te.structure) + "," + te.word_variant + "," +
           fmt_f64(te.te_mean) + "," + std::to_string(te.per_stimulus.size()) + "\n";
  return out;
}

std::string sparsity_curve_to_csv(const SparsityCurve& curve, std::uint64_t seed) {
  std::string out = csv_header(seed);
  out += "m_neurons,pct_neurons,cumulative_nie,te_reference\n";
  for (std::size_t i = 0; i < curve.m_neurons.size(); ++i) {
    const double pct = 100.0 * static_cast<double>(curve.m_neurons[i]) /
                       static_cast<double>(curve.n_neurons);
    out += std::to_string(curve.m_neurons[i]) + "," + fmt_f64(pct) + "," +
           fmt_f64(curve.cumulative_nie[i]) + "," + fmt_f64(curve.te_reference) + "\n";
  }
  return out;
}

}  // namespace agscan
