#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace agscan {

enum class Number { kSg, kPl };

Number flip(Number n);
std::string to_string(Number n);
Number number_from_string(const std::string& s);

enum class Pos {
  kNoun,
  kVerb,
  kAdjective,
  kDeterminer,
  kAdposition,
  kComplementizer,
  kFiller,
};

std::string to_string(Pos pos);
Pos pos_from_string(const std::string& s);

extern const std::vector<std::string> kLanguages;  // en, fr, de, nl, fi
bool is_known_language(const std::string& language);

// One lexical item with both number forms realized lexically. Tags carry
// slot eligibility (subj, attr_pp, attr_rc, main, emb, cop) and per-role
// determiner/oblique surface forms, e.g. det_nom_sg=The or obl_pl=puiden.
struct LexiconEntry {
  std::string language;
  Pos pos = Pos::kNoun;
  std::string lemma;
  std::string sg_form;
  std::string pl_form;
  std::map<std::string, std::string> tags;

  const std::string& form(Number n) const { return n == Number::kSg ? sg_form : pl_form; }
  bool has_tag(const std::string& key) const { return tags.count(key) != 0; }
  std::string tag(const std::string& key, const std::string& fallback = "") const {
    auto it = tags.find(key);
    return it == tags.end() ? fallback : it->second;
  }
};

class Lexicon {
 public:
  // Tab-separated columns: language, pos, lemma, sg_form, pl_form, tags.
  // Tags are comma-separated key or key=value items, "-" for none.
  // Lines starting with '#' and blank lines are skipped.
  static Lexicon parse_tsv(const std::string& text);
  static Lexicon load(const std::filesystem::path& path);

  void add(LexiconEntry entry);
  void merge(const Lexicon& other);

  const std::vector<LexiconEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

  // File-order selection; required_tags must all be present, banned_tags absent.
  std::vector<const LexiconEntry*> select(const std::string& language, Pos pos,
                                          const std::vector<std::string>& required_tags = {},
                                          const std::vector<std::string>& banned_tags = {}) const;

  // Every surface form in the lexicon: sg/pl forms plus all det_* and obl_*
  // tag values. Feeds vocabulary construction.
  std::vector<std::string> surface_forms() const;

  std::vector<std::string> languages() const;

 private:
  std::vector<LexiconEntry> entries_;
};

struct LexiconSplit {
  Lexicon train;
  Lexicon probe;
};

// Splits noun and verb entries per language into train/probe; all other
// parts of speech are shared. Entries linked by a short-word counterpart
// (the short=<lemma> tag) move as one group so the short variant of a
// held-out word never leaks into training. Deterministic in seed.
LexiconSplit split_lexicon(const Lexicon& lexicon, double probe_fraction, std::uint64_t seed);

// True when no noun/verb surface form appears on both sides.
bool split_is_disjoint(const LexiconSplit& split);

}  // namespace agscan
