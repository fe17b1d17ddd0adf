#include <cstddef>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "agscan/analysis.hpp"
#include "agscan/lexicon.hpp"
#include "agscan/mediation.hpp"
#include "agscan/model.hpp"
#include "agscan/rng.hpp"
#include "agscan/stimuli.hpp"
#include "agscan/tensor.hpp"
#include "agscan/templates.hpp"
#include "agscan/vocab.hpp"

namespace {

using namespace agscan;

const Lexicon& en_lexicon() {
  static Lexicon lex = Lexicon::load(std::string(AGSCAN_DATA_DIR) + "/lexicon_en.tsv");
  return lex;
}

const Vocabulary& en_vocab() {
  static Vocabulary vocab = build_vocabulary(en_lexicon(), {"en"}, {});
  return vocab;
}

Model make_model(std::size_t layers, std::size_t dim) {
  ModelConfig cfg;
  cfg.n_layers = layers;
  cfg.hidden_dim = dim;
  cfg.n_heads = dim >= 64 ? 8 : 2;
  cfg.ff_dim = 4 * dim;
  cfg.vocab_size = en_vocab().size();
  cfg.max_len = 24;
  cfg.seed = 7u;
  return Model{cfg, random_init_weights(cfg)};
}

std::vector<Stimulus> en_stimuli(Structure s, std::size_t n) {
  Rng rng(derive_seed(7, "bench-stimuli-" + to_string(s)));
  return generate_agreement_stimuli(agreement_template("en", s), en_lexicon(), n, rng);
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Matrix a(n, n), b(n, n);
  for (double& v : a.data) v = rng.next_gauss();
  for (double& v : b.data) v = rng.next_gauss();
  for (auto _ : state) {
    Matrix c = matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_Forward(benchmark::State& state) {
  Model model = make_model(static_cast<std::size_t>(state.range(0)),
                           static_cast<std::size_t>(state.range(1)));
  Stimulus st = en_stimuli(Structure::kAcrossPp, 1).front();
  std::vector<TokenId> tokens;
  for (const std::string& t : st.tokens_null) tokens.push_back(en_vocab().id(t));
  for (auto _ : state) {
    ForwardResult r = forward(model, tokens, tokens.size() - 1);
    benchmark::DoNotOptimize(r.logits.data.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_Forward)->Args({2, 64})->Args({4, 64})->Args({2, 256});

// One neuron end to end: two forwards plus the cached partial recompute.
// The layer argument shows the resume cost falling as the override rises.
void BM_NeuronNie(benchmark::State& state) {
  Model model = make_model(4, 64);
  std::vector<Stimulus> stim = en_stimuli(Structure::kAcrossPp, 6);
  NeuronId neuron{static_cast<std::size_t>(state.range(0)), 3};
  for (auto _ : state) {
    EffectRecord r = neuron_nie(model, stim, en_vocab(), neuron);
    benchmark::DoNotOptimize(r.nie_mean);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(stim.size()));
}
BENCHMARK(BM_NeuronNie)->Arg(0)->Arg(4);

// The batched engine over every (layer, dim) site; items are neuron-stimulus
// evaluations, comparable with BM_NaiveEffectTable's rate.
void BM_AllNeuronNies(benchmark::State& state) {
  Model model = make_model(static_cast<std::size_t>(state.range(0)),
                           static_cast<std::size_t>(state.range(1)));
  std::vector<Stimulus> stim = en_stimuli(Structure::kAcrossPp, 6);
  for (auto _ : state) {
    EffectTable t = all_neuron_nies(model, stim, en_vocab());
    benchmark::DoNotOptimize(t.nie_mean.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(model.config.neuron_count() * stim.size()));
}
BENCHMARK(BM_AllNeuronNies)->Args({2, 8})->Args({2, 64})->Args({4, 64});

void BM_NaiveEffectTable(benchmark::State& state) {
  Model model = make_model(2, 8);
  std::vector<Stimulus> stim = en_stimuli(Structure::kAcrossPp, 6);
  for (auto _ : state) {
    EffectTable t = naive_effect_table(model, stim, en_vocab());
    benchmark::DoNotOptimize(t.nie_mean.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(model.config.neuron_count() * stim.size()));
}
BENCHMARK(BM_NaiveEffectTable);

void BM_SparsitySweep(benchmark::State& state) {
  Model model = make_model(2, 64);
  std::vector<Stimulus> stim = en_stimuli(Structure::kAcrossPp, 6);
  EffectTable effects = all_neuron_nies(model, stim, en_vocab());
  for (auto _ : state) {
    SparsityCurve c = sparsity_sweep(model, stim, en_vocab(), effects, 16);
    benchmark::DoNotOptimize(c.cumulative_nie.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_SparsitySweep);

void BM_PermutationOverlap(benchmark::State& state) {
  Rng rng(3);
  std::vector<NeuronSet> sets;
  for (int i = 0; i < 3; ++i) {
    NeuronSet s;
    s.label = "set" + std::to_string(i);
    for (std::size_t idx : rng.sample_indices(768, 30)) s.members.insert(NeuronId{idx / 256, idx % 256});
    sets.push_back(std::move(s));
  }
  for (auto _ : state) {
    Rng prng(derive_seed(3, "bench-permutation"));
    OverlapMatrix m = overlap_matrix(sets, 768, 1000, prng);
    benchmark::DoNotOptimize(m.p_values.data.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 3000);
}
BENCHMARK(BM_PermutationOverlap);

}  // namespace

BENCHMARK_MAIN();
