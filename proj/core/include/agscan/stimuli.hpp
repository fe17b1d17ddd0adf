#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "agscan/lexicon.hpp"
#include "agscan/rng.hpp"
#include "agscan/templates.hpp"
#include "agscan/vocab.hpp"

namespace agscan {

// A counterfactual prompt pair. tokens_null is the original sentence with
// the mask literal at verb_slot; tokens_swap is identical except the
// subject's number is flipped at subject_position. v_match agrees with the
// null sentence's subject, v_mismatch with the swapped one.
struct Stimulus {
  std::string id;
  std::string language;
  Structure structure = Structure::kSimple;
  std::vector<std::string> tokens_null;
  std::vector<std::string> tokens_swap;
  std::size_t subject_position = 0;
  std::optional<Number> attractor_number;
  std::size_t verb_slot = 0;
  std::string v_match;
  std::string v_mismatch;
  std::string word_variant = "original";
};

void validate_stimulus(const Stimulus& st);

// The number-flipped token sequence (differs from tokens_null exactly at
// subject_position).
std::vector<std::string> swap_number(const Stimulus& st);

// The same stimulus viewed from the swapped prompt: null/swap sequences and
// the verb roles exchange. Applying it twice restores the original.
Stimulus swapped_view(const Stimulus& st);

// Samples up to max_n stimuli without replacement from the template's
// lexical cross-product, balancing subject number exactly and, for
// attractor structures, keeping attractor number balanced within each
// subject-number half (so the two are uncorrelated by construction).
// Entries tagged wordset=short are excluded; see short_word_variant.
std::vector<Stimulus> generate_agreement_stimuli(const StructureTemplate& tmpl,
                                                 const Lexicon& lexicon, std::size_t max_n,
                                                 Rng& rng);

// Substitutes every noun/verb token by its short-word counterpart (the
// lexicon's short=<lemma> tags). Structure labels and positions are
// preserved; word_variant becomes "short".
std::vector<Stimulus> short_word_variant(const std::vector<Stimulus>& stimuli,
                                         const Lexicon& lexicon);

enum class SwapSlot { kFirst, kSecond };

struct BaselinePair {
  Structure mode = Structure::kBigramSwap;  // bigram_swap | semantic_short | semantic_long
  SwapSlot swap_slot = SwapSlot::kFirst;
  std::string w1a, w2a;  // bigram a
  std::string w1b, w2b;  // bigram b
};

// Tab-separated columns: mode, swap_slot, w1a, w2a, w1b, w2b ('#' comments).
std::vector<BaselinePair> parse_baseline_pairs(const std::string& text);
std::vector<BaselinePair> load_baseline_pairs(const std::filesystem::path& path);
std::vector<std::string> baseline_surface_forms(const std::vector<BaselinePair>& pairs);

// Two stimuli per pair (each bigram takes a turn as the null prompt).
// swap_slot=second compares the first words at a left-edge mask slot, which
// only a bidirectional model can score, so those pairs are skipped for ALM.
std::vector<Stimulus> generate_bigram_stimuli(const std::vector<BaselinePair>& pairs,
                                              ModelMode mode);
std::vector<Stimulus> generate_semantic_stimuli(const std::vector<BaselinePair>& pairs,
                                                ModelMode mode);

// All baseline stimuli (bigram + semantic) in file order.
std::vector<Stimulus> generate_baseline_stimuli(const std::vector<BaselinePair>& pairs,
                                                ModelMode mode);

// Grammatical sentences from the language's agreement templates plus copula
// fillers (and, when baseline pairs are supplied, baseline-vocabulary
// fillers). Sentences whose token sequence is in `exclude` are skipped, so
// probe stimuli can be held out of training. Refuses lexicon splits whose
// probe side shares noun/verb forms with the train side.
std::vector<std::vector<std::string>> generate_training_corpus(
    const std::string& language, const LexiconSplit& split, std::size_t n_sentences, Rng& rng,
    const std::set<std::vector<std::string>>& exclude = {},
    const std::vector<BaselinePair>& baseline_fillers = {});

// The grammatical realizations of a stimulus (null and swap sentences with
// the agreeing verb filled in); used to hold probe items out of training.
std::vector<std::vector<std::string>> grammatical_realizations(const Stimulus& st);

// Union of lexicon surface forms, template literals, baseline words, and
// corpus filler literals, sorted bytewise; the mask token is prepended by
// the vocabulary itself.
Vocabulary build_vocabulary(const Lexicon& lexicon, const std::vector<std::string>& languages,
                            const std::vector<BaselinePair>& baselines);

std::string stimuli_to_jsonl(const std::vector<Stimulus>& stimuli);
std::vector<Stimulus> stimuli_from_jsonl(const std::string& text);

}  // namespace agscan
