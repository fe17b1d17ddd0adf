#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "agscan/model.hpp"
#include "agscan/stimuli.hpp"
#include "agscan/vocab.hpp"

namespace agscan {

enum class PromptVariant { kNull, kSwap };

// Where to override activations. The subject position (the single token at
// which the null and swap prompts differ) is the default: it is the only
// position where the two caches are guaranteed comparable, and it makes the
// full-column intervention reproduce the swap prompt exactly.
enum class PositionPolicy { kSubject, kVerbSlot, kExplicit };

std::string to_string(PositionPolicy p);
PositionPolicy position_policy_from_string(const std::string& s);

struct PositionSpec {
  PositionPolicy policy = PositionPolicy::kSubject;
  std::size_t explicit_position = 0;  // used when policy == kExplicit
};

// log_y = log p(v_mismatch) - log p(v_match), with the match/mismatch roles
// fixed by the null prompt's subject for both prompt variants. A model that
// has learned agreement gives log_y < 0 on the null prompt and > 0 on the
// swapped one.
struct GrammaticalityRatio {
  double log_y = 0.0;
  double linear() const { return std::exp(log_y); }
};

// Token-level view of one stimulus. For causal LMs the prompt is the prefix
// before the masked verb slot and the query is the last prefix position;
// for masked LMs the prompt is the full sequence and the query is the mask.
struct ProbeEncoding {
  std::vector<TokenId> tokens_null;
  std::vector<TokenId> tokens_swap;
  std::size_t query_position = 0;
  std::size_t intervene_position = 0;
  TokenId v_match = 0;
  TokenId v_mismatch = 0;
};

ProbeEncoding encode_stimulus(const Stimulus& st, const Vocabulary& vocab, ModelMode mode,
                              const PositionSpec& position = {});

GrammaticalityRatio response_ratio(const Model& model, const Stimulus& st,
                                   const Vocabulary& vocab, PromptVariant variant,
                                   const InterventionSpec* intervention = nullptr);

struct EffectRecord {
  NeuronId neuron;
  std::string language;
  Structure structure = Structure::kSimple;
  std::string word_variant;
  double nie_mean = 0.0;
  std::vector<double> nie_per_stimulus;
  std::size_t n_stimuli = 0;
};

// NIEs for every neuron over one homogeneous stimulus set (same language,
// structure, and word variant). Rows follow NeuronId::flat order.
struct EffectTable {
  std::string language;
  Structure structure = Structure::kSimple;
  std::string word_variant;
  std::size_t n_layers = 0;
  std::size_t hidden_dim = 0;
  std::vector<std::string> stimulus_ids;
  std::vector<double> nie_mean;  // one per neuron, flat order
  Matrix per_stimulus;           // n_neurons x n_stimuli

  std::size_t n_neurons() const { return (n_layers + 1) * hidden_dim; }
  std::size_t n_stimuli() const { return stimulus_ids.size(); }
  EffectRecord record(NeuronId neuron) const;
};

// Per stimulus: read the neuron's activation from the swap prompt's cache at
// the intervention position, override it into the null prompt's run, and
// report exp(log_y_overridden - log_y_null) - 1; mean over stimuli.
EffectRecord neuron_nie(const Model& model, const std::vector<Stimulus>& stimuli,
                        const Vocabulary& vocab, NeuronId neuron,
                        const PositionSpec& position = {});

// Same values as calling neuron_nie per neuron (bit-equal); reuses the null
// prompt's activations below the overridden layer and recomputes only the
// layers above, parallelized over neuron ranges.
EffectTable all_neuron_nies(const Model& model, const std::vector<Stimulus>& stimuli,
                            const Vocabulary& vocab, const PositionSpec& position = {},
                            unsigned jobs = 1);

// Reference implementation: three full forwards per (neuron, stimulus) with
// no activation reuse. Quadratic in depth; only for small configurations.
EffectTable naive_effect_table(const Model& model, const std::vector<Stimulus>& stimuli,
                               const Vocabulary& vocab, const PositionSpec& position = {});

struct TotalEffect {
  std::string language;
  Structure structure = Structure::kSimple;
  std::string word_variant;
  double te_mean = 0.0;
  std::vector<double> per_stimulus;
};

// TE per stimulus = y_swap/y_null - 1, no interventions.
TotalEffect total_effect(const Model& model, const std::vector<Stimulus>& stimuli,
                         const Vocabulary& vocab);

// Neurons by descending nie_mean; ties broken by (layer, dim) ascending.
std::vector<NeuronId> rank_neurons(const EffectTable& table);

struct SparsityCurve {
  std::size_t k_step = 0;
  std::size_t n_neurons = 0;
  std::vector<std::size_t> m_neurons;    // k, 2k, ..., then all neurons
  std::vector<double> cumulative_nie;    // one per entry of m_neurons
  double te_reference = 0.0;
};

// For each m, overrides the top-m ranked neurons simultaneously (all at the
// intervention position, values from the swap cache) and records the mean
// cumulative NIE. The final point covers every neuron, which reproduces the
// swap prompt exactly and therefore equals the total effect.
SparsityCurve sparsity_sweep(const Model& model, const std::vector<Stimulus>& stimuli,
                             const Vocabulary& vocab, const EffectTable& effects,
                             std::size_t k_step, const PositionSpec& position = {},
                             unsigned jobs = 1);

// Largest divisor of n_neurons that is <= max(1, floor(fraction*n_neurons)),
// so sweep points land on exact multiples ending at the full set.
std::size_t default_k_step(std::size_t n_neurons, double fraction);

struct SparsityMetrics {
  double pct_to_te = 0.0;   // smallest % of neurons whose cumulative NIE >= TE
  double pct_to_max = 0.0;  // % of neurons at the curve's first maximum
};

SparsityMetrics sparsity_metrics(const SparsityCurve& curve);

// CSV/JSONL renderings. CSVs start with a "# seed=..., version=..." comment.
std::string effect_tables_to_csv(const std::vector<EffectTable>& tables, std::uint64_t seed);
std::string effect_tables_detail_jsonl(const std::vector<EffectTable>& tables);
std::string total_effects_to_csv(const std::vector<TotalEffect>& totals, std::uint64_t seed);
std::string sparsity_curve_to_csv(const SparsityCurve& curve, std::uint64_t seed);

}  // namespace agscan
