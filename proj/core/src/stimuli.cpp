#include "agscan/stimuli.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "agscan/errors.hpp"
#include "agscan/io_util.hpp"

namespace agscan {

namespace {

struct Pools {
  std::vector<const LexiconEntry*> subjects;
  std::vector<const LexiconEntry*> adpositions;
  std::vector<const LexiconEntry*> attractors;
  std::vector<const LexiconEntry*> emb_verbs;
  std::vector<const LexiconEntry*> verbs;
};

Pools collect_pools(const StructureTemplate& tmpl, const Lexicon& lexicon, bool include_short) {
  const std::vector<std::string> banned = include_short ? std::vector<std::string>{}
                                                        : std::vector<std::string>{"wordset"};
  Pools pools;
  for (const TemplateSlot& slot : tmpl.slots) {
    switch (slot.kind) {
      case TemplateSlot::Kind::kSubject:
        pools.subjects = lexicon.select(tmpl.language, Pos::kNoun, {slot.entry_tag}, banned);
        break;
      case TemplateSlot::Kind::kAdposition:
        pools.adpositions = lexicon.select(tmpl.language, Pos::kAdposition, {}, banned);
        break;
      case TemplateSlot::Kind::kAttractor:
        pools.attractors = lexicon.select(tmpl.language, Pos::kNoun, {slot.entry_tag}, banned);
        break;
      case TemplateSlot::Kind::kEmbeddedVerb:
        pools.emb_verbs = lexicon.select(tmpl.language, Pos::kVerb, {slot.entry_tag}, banned);
        break;
      case TemplateSlot::Kind::kMainVerb:
        pools.verbs = lexicon.select(tmpl.language, Pos::kVerb, {slot.entry_tag}, banned);
        break;
      case TemplateSlot::Kind::kLiteral:
        break;
    }
  }
  return pools;
}

struct TemplateDraw {
  const LexiconEntry* subject = nullptr;
  const LexiconEntry* adposition = nullptr;
  const LexiconEntry* attractor = nullptr;
  const LexiconEntry* emb_verb = nullptr;
  const LexiconEntry* verb = nullptr;
  Number subject_number = Number::kSg;
  Number attractor_number = Number::kSg;
};

std::string det_for(const LexiconEntry& noun, const std::string& det_key, Number n) {
  const std::string key = "det_" + det_key + "_" + to_string(n);
  const std::string det = noun.tag(key);
  if (det.empty()) throw DataError("lexicon: " + noun.lemma + " lacks tag " + key);
  return det;
}

const std::string& noun_form(const LexiconEntry& noun, Number n, bool oblique) {
  if (!oblique) return noun.form(n);
  auto it = noun.tags.find("obl_" + to_string(n));
  if (it == noun.tags.end())
    throw DataError("lexicon: " + noun.lemma + " lacks oblique form obl_" + to_string(n));
  return it->second;
}

struct Assembled {
  std::vector<std::string> tokens_null;
  std::vector<std::string> tokens_swap;
  std::size_t subject_position = 0;
  std::size_t verb_slot = 0;
  std::string v_match;
  std::string v_mismatch;
};

// Emits the null and swap sequences in one walk. The two differ only in the
// subject noun's number; the determiner invariance required of subject
// nouns keeps the difference to that single token.
Assembled assemble(const StructureTemplate& tmpl, const TemplateDraw& draw, bool mask_main_verb) {
  Assembled out;
  auto push_both = [&](const std::string& tok) {
    out.tokens_null.push_back(tok);
    out.tokens_swap.push_back(tok);
  };

  for (const TemplateSlot& slot : tmpl.slots) {
    switch (slot.kind) {
      case TemplateSlot::Kind::kLiteral:
        push_both(slot.literal);
        break;
      case TemplateSlot::Kind::kSubject: {
        const LexiconEntry& n = *draw.subject;
        if (!slot.det_key.empty()) {
          const std::string det_sg = det_for(n, slot.det_key, Number::kSg);
          const std::string det_pl = det_for(n, slot.det_key, Number::kPl);
          if (det_sg != det_pl)
            throw DataError("lexicon: subject determiner of " + n.lemma +
                            " is not number-invariant");
          push_both(det_sg);
        }
        out.subject_position = out.tokens_null.size();
        out.tokens_null.push_back(n.form(draw.subject_number));
        out.tokens_swap.push_back(n.form(flip(draw.subject_number)));
        break;
      }
      case TemplateSlot::Kind::kAdposition:
        push_both(draw.adposition->sg_form);
        break;
      case TemplateSlot::Kind::kAttractor: {
        const LexiconEntry& n = *draw.attractor;
        if (!slot.det_key.empty()) push_both(det_for(n, slot.det_key, draw.attractor_number));
        push_both(noun_form(n, draw.attractor_number, slot.oblique_forms));
        break;
      }
      case TemplateSlot::Kind::kEmbeddedVerb:
        push_both(draw.emb_verb->form(draw.attractor_number));
        break;
      case TemplateSlot::Kind::kMainVerb: {
        const LexiconEntry& v = *draw.verb;
        out.verb_slot = out.tokens_null.size();
        out.v_match = v.form(draw.subject_number);
        out.v_mismatch = v.form(flip(draw.subject_number));
        if (mask_main_verb) {
          push_both(kMaskLiteral);
        } else {
          out.tokens_null.push_back(out.v_match);
          out.tokens_swap.push_back(out.v_mismatch);
        }
        break;
      }
    }
  }
  return out;
}

void check_template(const StructureTemplate& tmpl) {
  std::size_t n_subj = 0, n_main = 0, n_attr = 0;
  for (const TemplateSlot& s : tmpl.slots) {
    n_subj += s.kind == TemplateSlot::Kind::kSubject;
    n_main += s.kind == TemplateSlot::Kind::kMainVerb;
    n_attr += s.kind == TemplateSlot::Kind::kAttractor;
  }
  require(n_subj == 1 && n_main == 1, "template: exactly one subject and one main verb required");
  const bool wants_attr =
      tmpl.structure == Structure::kAcrossPp || tmpl.structure == Structure::kAcrossRc;
  require(n_attr == (wants_attr ? 1u : 0u), "template: attractor slot mismatch for structure");
}

std::string make_id(const std::string& language, Structure structure,
                    const std::string& variant, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04zu", index);
  return language + "-" + to_string(structure) + "-" + variant + "-" + buf;
}

Stimulus make_baseline_stimulus(Structure mode, std::vector<std::string> tokens_null,
                                std::vector<std::string> tokens_swap, std::size_t subject_position,
                                std::size_t verb_slot, std::string v_match,
                                std::string v_mismatch, std::size_t index) {
  Stimulus st;
  st.id = make_id("en", mode, "original", index);
  st.language = "en";
  st.structure = mode;
  st.tokens_null = std::move(tokens_null);
  st.tokens_swap = std::move(tokens_swap);
  st.subject_position = subject_position;
  st.verb_slot = verb_slot;
  st.v_match = std::move(v_match);
  st.v_mismatch = std::move(v_mismatch);
  validate_stimulus(st);
  return st;
}

}  // namespace

void validate_stimulus(const Stimulus& st) {
  require(!st.tokens_null.empty(), "stimulus: empty token sequence");
  require(st.tokens_null.size() == st.tokens_swap.size(), "stimulus: null/swap length mismatch");
  require(st.subject_position < st.tokens_null.size(), "stimulus: subject position out of range");
  require(st.verb_slot < st.tokens_null.size(), "stimulus: verb slot out of range");
  require(st.tokens_null[st.verb_slot] == kMaskLiteral, "stimulus: verb slot is not masked");
  require(st.v_match != st.v_mismatch, "stimulus: verb pair must differ");
  for (std::size_t i = 0; i < st.tokens_null.size(); ++i) {
    if (i == st.subject_position) {
      require(st.tokens_null[i] != st.tokens_swap[i],
              "stimulus: null and swap agree at subject position");
    } else {
      require(st.tokens_null[i] == st.tokens_swap[i],
              "stimulus: null and swap differ away from subject position");
    }
  }
  require(st.word_variant == "original" || st.word_variant == "short",
          "stimulus: unknown word variant");
}

std::vector<std::string> swap_number(const Stimulus& st) {
  validate_stimulus(st);
  return st.tokens_swap;
}

Stimulus swapped_view(const Stimulus& st) {
  Stimulus out = st;
  std::swap(out.tokens_null, out.tokens_swap);
  std::swap(out.v_match, out.v_mismatch);
  validate_stimulus(out);
  return out;
}

std::vector<Stimulus> generate_agreement_stimuli(const StructureTemplate& tmpl,
                                                 const Lexicon& lexicon, std::size_t max_n,
                                                 Rng& rng) {
  require(max_n >= 1, "generate: max_n must be >= 1");
  require(is_agreement_structure(tmpl.structure), "generate: not an agreement template");
  check_template(tmpl);

  const Pools pools = collect_pools(tmpl, lexicon, /*include_short=*/false);
  const bool has_attr = tmpl.has_attractor();
  const bool has_adp = std::any_of(tmpl.slots.begin(), tmpl.slots.end(), [](const TemplateSlot& s) {
    return s.kind == TemplateSlot::Kind::kAdposition;
  });
  const bool has_emb = std::any_of(tmpl.slots.begin(), tmpl.slots.end(), [](const TemplateSlot& s) {
    return s.kind == TemplateSlot::Kind::kEmbeddedVerb;
  });

  if (pools.subjects.empty() || pools.verbs.empty() || (has_attr && pools.attractors.empty()) ||
      (has_adp && pools.adpositions.empty()) || (has_emb && pools.emb_verbs.empty()))
    throw DataError("generate: a template slot has no lexicon entries (" + tmpl.language + "/" +
                    to_string(tmpl.structure) + ")");

  // Lexical cross-product, enumerated in a fixed mixed-radix order.
  std::vector<std::size_t> radix = {pools.subjects.size()};
  if (has_adp) radix.push_back(pools.adpositions.size());
  if (has_attr) radix.push_back(pools.attractors.size());
  if (has_emb) radix.push_back(pools.emb_verbs.size());
  radix.push_back(pools.verbs.size());
  std::size_t n_lex = 1;
  for (std::size_t r : radix) n_lex *= r;
  require(n_lex >= 1, "generate: empty cross-product");

  auto decode = [&](std::size_t index) {
    TemplateDraw d;
    std::size_t rest = index;
    auto take = [&](std::size_t size) {
      const std::size_t i = rest % size;
      rest /= size;
      return i;
    };
    d.subject = pools.subjects[take(pools.subjects.size())];
    if (has_adp) d.adposition = pools.adpositions[take(pools.adpositions.size())];
    if (has_attr) d.attractor = pools.attractors[take(pools.attractors.size())];
    if (has_emb) d.emb_verb = pools.emb_verbs[take(pools.emb_verbs.size())];
    d.verb = pools.verbs[take(pools.verbs.size())];
    return d;
  };

  // Strata ordered so leftover quota alternates subject number first, then
  // attractor number; keeps |#sg - #pl| <= 1 for any total.
  struct Stratum {
    Number subj;
    Number attr;
  };
  std::vector<Stratum> strata;
  if (has_attr)
    strata = {{Number::kSg, Number::kSg},
              {Number::kPl, Number::kPl},
              {Number::kSg, Number::kPl},
              {Number::kPl, Number::kSg}};
  else
    strata = {{Number::kSg, Number::kSg}, {Number::kPl, Number::kSg}};

  const std::size_t total = std::min(max_n, strata.size() * n_lex);
  std::vector<std::size_t> quota(strata.size(), total / strata.size());
  for (std::size_t i = 0; i < total % strata.size(); ++i) ++quota[i];

  std::vector<Stimulus> out;
  out.reserve(total);
  for (std::size_t s = 0; s < strata.size(); ++s) {
    std::vector<std::size_t> picks = rng.sample_indices(n_lex, quota[s]);
    for (std::size_t combo : picks) {
      TemplateDraw draw = decode(combo);
      draw.subject_number = strata[s].subj;
      draw.attractor_number = strata[s].attr;
      Assembled a = assemble(tmpl, draw, /*mask_main_verb=*/true);
      Stimulus st;
      st.id = make_id(tmpl.language, tmpl.structure, "original", out.size());
      st.language = tmpl.language;
      st.structure = tmpl.structure;
      st.tokens_null = std::move(a.tokens_null);
      st.tokens_swap = std::move(a.tokens_swap);
      st.subject_position = a.subject_position;
      st.verb_slot = a.verb_slot;
      st.v_match = std::move(a.v_match);
      st.v_mismatch = std::move(a.v_mismatch);
      if (has_attr) st.attractor_number = strata[s].attr;
      validate_stimulus(st);
      out.push_back(std::move(st));
    }
  }
  return out;
}

std::vector<Stimulus> short_word_variant(const std::vector<Stimulus>& stimuli,
                                         const Lexicon& lexicon) {
  // lemma -> entry, per (language, pos)
  auto find_entry = [&](const std::string& language, Pos pos,
                        const std::string& lemma) -> const LexiconEntry* {
    for (const LexiconEntry& e : lexicon.entries())
      if (e.language == language && e.pos == pos && e.lemma == lemma) return &e;
    return nullptr;
  };

  std::map<std::string, std::string> token_map;  // "lang:form" -> short form
  std::set<std::string> content_forms;           // all noun/verb forms, for strictness
  for (const LexiconEntry& e : lexicon.entries()) {
    if (e.pos != Pos::kNoun && e.pos != Pos::kVerb) continue;
    content_forms.insert(e.language + ":" + e.sg_form);
    content_forms.insert(e.language + ":" + e.pl_form);
    if (e.has_tag("obl_sg")) content_forms.insert(e.language + ":" + e.tag("obl_sg"));
    if (e.has_tag("obl_pl")) content_forms.insert(e.language + ":" + e.tag("obl_pl"));
    if (!e.has_tag("short")) continue;
    const LexiconEntry* target = find_entry(e.language, e.pos, e.tag("short"));
    if (!target)
      throw DataError("lexicon: missing short counterpart " + e.tag("short") + " for " + e.lemma);
    token_map[e.language + ":" + e.sg_form] = target->sg_form;
    token_map[e.language + ":" + e.pl_form] = target->pl_form;
    if (e.has_tag("obl_sg")) {
      if (!target->has_tag("obl_sg") || !target->has_tag("obl_pl"))
        throw DataError("lexicon: short counterpart " + target->lemma + " lacks oblique forms");
      token_map[e.language + ":" + e.tag("obl_sg")] = target->tag("obl_sg");
      token_map[e.language + ":" + e.tag("obl_pl")] = target->tag("obl_pl");
    }
  }

  auto map_token = [&](const std::string& language, const std::string& tok) {
    auto it = token_map.find(language + ":" + tok);
    if (it != token_map.end()) return it->second;
    if (content_forms.count(language + ":" + tok))
      throw DataError("short variant: no counterpart for content word " + tok);
    return tok;
  };

  std::vector<Stimulus> out;
  out.reserve(stimuli.size());
  for (const Stimulus& st : stimuli) {
    Stimulus s = st;
    for (std::string& t : s.tokens_null) t = map_token(st.language, t);
    for (std::string& t : s.tokens_swap) t = map_token(st.language, t);
    s.v_match = map_token(st.language, st.v_match);
    s.v_mismatch = map_token(st.language, st.v_mismatch);
    s.word_variant = "short";
    s.id = st.id + "-short";
    validate_stimulus(s);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<BaselinePair> parse_baseline_pairs(const std::string& text) {
  std::vector<BaselinePair> pairs;
  std::size_t line_no = 0;
  for (const std::string& raw : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols = split_on(raw, '\t');
    if (cols.size() != 6)
      throw DataError("baselines line " + std::to_string(line_no) +
                      ": expected 6 tab-separated columns");
    BaselinePair p;
    p.mode = structure_from_string(trim(cols[0]));
    if (is_agreement_structure(p.mode))
      throw DataError("baselines line " + std::to_string(line_no) + ": not a baseline mode");
    const std::string slot = trim(cols[1]);
    if (slot == "first")
      p.swap_slot = SwapSlot::kFirst;
    else if (slot == "second")
      p.swap_slot = SwapSlot::kSecond;
    else
      throw DataError("baselines line " + std::to_string(line_no) + ": bad swap_slot " + slot);
    p.w1a = trim(cols[2]);
    p.w2a = trim(cols[3]);
    p.w1b = trim(cols[4]);
    p.w2b = trim(cols[5]);
    const std::set<std::string> distinct{p.w1a, p.w2a, p.w1b, p.w2b};
    if (distinct.size() != 4 || distinct.count(""))
      throw DataError("baselines line " + std::to_string(line_no) + ": words must be 4 distinct tokens");
    if (p.mode == Structure::kSemanticLong && p.swap_slot != SwapSlot::kFirst)
      throw DataError("baselines line " + std::to_string(line_no) +
                      ": semantic_long swaps the copula subject (swap_slot must be first)");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<BaselinePair> load_baseline_pairs(const std::filesystem::path& path) {
  try {
    return parse_baseline_pairs(read_text_file(path));
  } catch (const DataError& err) {
    throw DataError(path.string() + ": " + err.what());
  }
}

std::vector<std::string> baseline_surface_forms(const std::vector<BaselinePair>& pairs) {
  std::vector<std::string> out;
  for (const BaselinePair& p : pairs) {
    out.push_back(p.w1a);
    out.push_back(p.w2a);
    out.push_back(p.w1b);
    out.push_back(p.w2b);
  }
  if (!pairs.empty())
    for (const char* lit : {"the", "The", "is", "here", "."}) out.push_back(lit);
  return out;
}

std::vector<Stimulus> generate_bigram_stimuli(const std::vector<BaselinePair>& pairs,
                                              ModelMode mode) {
  std::vector<Stimulus> out;
  std::size_t index = 0;
  for (const BaselinePair& p : pairs) {
    if (p.mode != Structure::kBigramSwap) continue;
    if (p.swap_slot == SwapSlot::kSecond && mode == ModelMode::kAlm) continue;
    // Both orientations: each bigram takes a turn as the null prompt.
    for (int flip_sides = 0; flip_sides < 2; ++flip_sides) {
      const std::string& w1n = flip_sides ? p.w1b : p.w1a;
      const std::string& w2n = flip_sides ? p.w2b : p.w2a;
      const std::string& w1s = flip_sides ? p.w1a : p.w1b;
      const std::string& w2s = flip_sides ? p.w2a : p.w2b;
      if (p.swap_slot == SwapSlot::kFirst) {
        out.push_back(make_baseline_stimulus(p.mode, {w1n, kMaskLiteral}, {w1s, kMaskLiteral}, 0,
                                             1, w2n, w2s, index++));
      } else {
        out.push_back(make_baseline_stimulus(p.mode, {kMaskLiteral, w2n}, {kMaskLiteral, w2s}, 1,
                                             0, w1n, w1s, index++));
      }
    }
  }
  if (out.empty()) throw DataError("bigram baselines: no usable pairs for this model mode");
  return out;
}

std::vector<Stimulus> generate_semantic_stimuli(const std::vector<BaselinePair>& pairs,
                                                ModelMode mode) {
  std::vector<Stimulus> out;
  std::size_t index_short = 0, index_long = 0;
  for (const BaselinePair& p : pairs) {
    if (p.mode == Structure::kSemanticShort) {
      if (p.swap_slot == SwapSlot::kSecond && mode == ModelMode::kAlm) continue;
      for (int flip_sides = 0; flip_sides < 2; ++flip_sides) {
        const std::string& w1n = flip_sides ? p.w1b : p.w1a;
        const std::string& w2n = flip_sides ? p.w2b : p.w2a;
        const std::string& w1s = flip_sides ? p.w1a : p.w1b;
        const std::string& w2s = flip_sides ? p.w2a : p.w2b;
        if (p.swap_slot == SwapSlot::kFirst)
          out.push_back(make_baseline_stimulus(p.mode, {w1n, kMaskLiteral}, {w1s, kMaskLiteral},
                                               0, 1, w2n, w2s, index_short++));
        else
          out.push_back(make_baseline_stimulus(p.mode, {kMaskLiteral, w2n}, {kMaskLiteral, w2s},
                                               1, 0, w1n, w1s, index_short++));
      }
    } else if (p.mode == Structure::kSemanticLong) {
      // (noun, adjective) pairs; prompt is the copula template and the
      // ratio compares the two adjectives.
      for (int flip_sides = 0; flip_sides < 2; ++flip_sides) {
        const std::string& noun_n = flip_sides ? p.w1b : p.w1a;
        const std::string& adj_n = flip_sides ? p.w2b : p.w2a;
        const std::string& noun_s = flip_sides ? p.w1a : p.w1b;
        const std::string& adj_s = flip_sides ? p.w2a : p.w2b;
        out.push_back(make_baseline_stimulus(
            p.mode, {"The", noun_n, "is", kMaskLiteral, "."},
            {"The", noun_s, "is", kMaskLiteral, "."}, 1, 3, adj_n, adj_s, index_long++));
      }
    }
  }
  (void)mode;
  return out;
}

std::vector<Stimulus> generate_baseline_stimuli(const std::vector<BaselinePair>& pairs,
                                                ModelMode mode) {
  std::vector<Stimulus> out;
  bool any_bigram = std::any_of(pairs.begin(), pairs.end(), [](const BaselinePair& p) {
    return p.mode == Structure::kBigramSwap;
  });
  if (any_bigram) {
    std::vector<Stimulus> b = generate_bigram_stimuli(pairs, mode);
    out.insert(out.end(), b.begin(), b.end());
  }
  std::vector<Stimulus> s = generate_semantic_stimuli(pairs, mode);
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

std::vector<std::vector<std::string>> grammatical_realizations(const Stimulus& st) {
  validate_stimulus(st);
  std::vector<std::vector<std::string>> out(2);
  out[0] = st.tokens_null;
  out[0][st.verb_slot] = st.v_match;
  out[1] = st.tokens_swap;
  out[1][st.verb_slot] = st.v_mismatch;
  return out;
}

std::vector<std::vector<std::string>> generate_training_corpus(
    const std::string& language, const LexiconSplit& split, std::size_t n_sentences, Rng& rng,
    const std::set<std::vector<std::string>>& exclude,
    const std::vector<BaselinePair>& baseline_fillers) {
  require(n_sentences >= 1, "corpus: n_sentences must be >= 1");
  if (!split_is_disjoint(split))
    throw DataError("corpus: train and probe lexicons share noun/verb forms");

  struct TemplateState {
    StructureTemplate tmpl;
    Pools pools;
  };
  std::vector<TemplateState> templates;
  for (StructureTemplate& t : agreement_templates(language)) {
    TemplateState ts{std::move(t), {}};
    ts.pools = collect_pools(ts.tmpl, split.train, /*include_short=*/true);
    for (const TemplateSlot& slot : ts.tmpl.slots) {
      const bool empty = (slot.kind == TemplateSlot::Kind::kSubject && ts.pools.subjects.empty()) ||
                         (slot.kind == TemplateSlot::Kind::kAdposition && ts.pools.adpositions.empty()) ||
                         (slot.kind == TemplateSlot::Kind::kAttractor && ts.pools.attractors.empty()) ||
                         (slot.kind == TemplateSlot::Kind::kEmbeddedVerb && ts.pools.emb_verbs.empty()) ||
                         (slot.kind == TemplateSlot::Kind::kMainVerb && ts.pools.verbs.empty());
      if (empty) throw DataError("corpus: a template slot has no train entries for " + language);
    }
    templates.push_back(std::move(ts));
  }

  const auto copulas = split.train.select(language, Pos::kVerb, {"cop"});
  const auto locatives = split.train.select(language, Pos::kFiller, {"loc"});
  if (copulas.empty() || locatives.empty())
    throw DataError("corpus: missing copula or locative filler entries for " + language);
  const auto filler_subjects = templates[0].pools.subjects;

  const bool with_baselines = !baseline_fillers.empty();

  auto draw_agreement = [&](const TemplateState& ts) {
    TemplateDraw d;
    d.subject = ts.pools.subjects[rng.index(ts.pools.subjects.size())];
    if (!ts.pools.adpositions.empty())
      d.adposition = ts.pools.adpositions[rng.index(ts.pools.adpositions.size())];
    if (!ts.pools.attractors.empty())
      d.attractor = ts.pools.attractors[rng.index(ts.pools.attractors.size())];
    if (!ts.pools.emb_verbs.empty())
      d.emb_verb = ts.pools.emb_verbs[rng.index(ts.pools.emb_verbs.size())];
    d.verb = ts.pools.verbs[rng.index(ts.pools.verbs.size())];
    d.subject_number = rng.coin() ? Number::kPl : Number::kSg;
    d.attractor_number = rng.coin() ? Number::kPl : Number::kSg;
    return assemble(ts.tmpl, d, /*mask_main_verb=*/false).tokens_null;
  };

  auto draw_copula = [&]() {
    const LexiconEntry& noun = *filler_subjects[rng.index(filler_subjects.size())];
    const LexiconEntry& cop = *copulas[rng.index(copulas.size())];
    const Number n = rng.coin() ? Number::kPl : Number::kSg;
    std::vector<std::string> s;
    const std::string det = noun.tag("det_nom_sg");
    if (!det.empty()) s.push_back(det);
    s.push_back(noun.form(n));
    s.push_back(cop.form(n));
    s.push_back(locatives[rng.index(locatives.size())]->sg_form);
    s.push_back(".");
    return s;
  };

  auto draw_baseline = [&]() {
    const BaselinePair& p = baseline_fillers[rng.index(baseline_fillers.size())];
    const bool side_b = rng.coin();
    const std::string& w1 = side_b ? p.w1b : p.w1a;
    const std::string& w2 = side_b ? p.w2b : p.w2a;
    if (p.mode == Structure::kSemanticLong)
      return std::vector<std::string>{"The", w1, "is", w2, "."};
    if (rng.coin()) return std::vector<std::string>{"the", w1, w2, "is", "here", "."};
    return std::vector<std::string>{w1, w2, "is", "here", "."};
  };

  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(n_sentences);
  for (std::size_t i = 0; i < n_sentences; ++i) {
    bool accepted = false;
    for (int attempt = 0; attempt < 200 && !accepted; ++attempt) {
      const std::uint64_t roll = rng.next_below(100);
      std::vector<std::string> sentence;
      if (roll < 30)
        sentence = draw_agreement(templates[0]);
      else if (roll < 55)
        sentence = draw_agreement(templates[1]);
      else if (roll < 80)
        sentence = draw_agreement(templates[2]);
      else if (with_baselines && roll >= 90)
        sentence = draw_baseline();
      else
        sentence = draw_copula();
      if (exclude.count(sentence)) continue;
      corpus.push_back(std::move(sentence));
      accepted = true;
    }
    if (!accepted)
      throw DataError("corpus: exclusion set too dense, cannot draw new sentences");
  }
  return corpus;
}

Vocabulary build_vocabulary(const Lexicon& lexicon, const std::vector<std::string>& languages,
                            const std::vector<BaselinePair>& baselines) {
  require(!languages.empty(), "vocabulary: no languages");
  std::vector<std::string> words;
  for (const LexiconEntry& e : lexicon.entries()) {
    if (std::find(languages.begin(), languages.end(), e.language) == languages.end()) continue;
    words.push_back(e.sg_form);
    words.push_back(e.pl_form);
    for (const auto& [key, value] : e.tags) {
      if (value.empty()) continue;
      if (key.rfind("det_", 0) == 0 || key.rfind("obl_", 0) == 0) words.push_back(value);
    }
  }
  for (const std::string& language : languages)
    for (const std::string& lit : template_literals(language)) words.push_back(lit);
  for (const std::string& w : baseline_surface_forms(baselines)) words.push_back(w);

  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (const std::string& w : words)
    if (w == Vocabulary::kMaskToken) throw DataError("vocabulary: data contains the mask token");
  return Vocabulary::from_words(words);
}

std::string stimuli_to_jsonl(const std::vector<Stimulus>& stimuli) {
  std::string out;
  for (const Stimulus& st : stimuli) {
    nlohmann::json j;
    j["id"] = st.id;
    j["language"] = st.language;
    j["structure"] = to_string(st.structure);
    j["tokens_null"] = st.tokens_null;
    j["tokens_swap"] = st.tokens_swap;
    j["subject_position"] = st.subject_position;
    j["attractor_number"] =
        st.attractor_number ? nlohmann::json(to_string(*st.attractor_number)) : nlohmann::json();
    j["verb_slot"] = st.verb_slot;
    j["v_match"] = st.v_match;
    j["v_mismatch"] = st.v_mismatch;
    j["word_variant"] = st.word_variant;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Stimulus> stimuli_from_jsonl(const std::string& text) {
  static const std::set<std::string> kKeys = {
      "id",         "language",  "structure", "tokens_null",  "tokens_swap", "subject_position",
      "attractor_number", "verb_slot", "v_match",   "v_mismatch", "word_variant"};
  std::vector<Stimulus> out;
  std::size_t line_no = 0;
  for (const std::string& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!kKeys.count(key))
          throw DataError("stimuli line " + std::to_string(line_no) + ": unknown field " + key);
      }
      Stimulus st;
      st.id = j.at("id").get<std::string>();
      st.language = j.at("language").get<std::string>();
      st.structure = structure_from_string(j.at("structure").get<std::string>());
      st.tokens_null = j.at("tokens_null").get<std::vector<std::string>>();
      st.tokens_swap = j.at("tokens_swap").get<std::vector<std::string>>();
      st.subject_position = j.at("subject_position").get<std::size_t>();
      if (!j.at("attractor_number").is_null())
        st.attractor_number = number_from_string(j.at("attractor_number").get<std::string>());
      st.verb_slot = j.at("verb_slot").get<std::size_t>();
      st.v_match = j.at("v_match").get<std::string>();
      st.v_mismatch = j.at("v_mismatch").get<std::string>();
      st.word_variant = j.at("word_variant").get<std::string>();
      validate_stimulus(st);
      out.push_back(std::move(st));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("stimuli line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace agscan
