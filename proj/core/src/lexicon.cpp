#include "agscan/lexicon.hpp"

#include <algorithm>
#include <set>

#include "agscan/errors.hpp"
#include "agscan/io_util.hpp"
#include "agscan/rng.hpp"

namespace agscan {

const std::vector<std::string> kLanguages = {"en", "fr", "de", "nl", "fi"};

Number flip(Number n) { return n == Number::kSg ? Number::kPl : Number::kSg; }

std::string to_string(Number n) { return n == Number::kSg ? "sg" : "pl"; }

Number number_from_string(const std::string& s) {
  if (s == "sg") return Number::kSg;
  if (s == "pl") return Number::kPl;
  throw DataError("unknown number: " + s);
}

std::string to_string(Pos pos) {
  switch (pos) {
    case Pos::kNoun: return "noun";
    case Pos::kVerb: return "verb";
    case Pos::kAdjective: return "adjective";
    case Pos::kDeterminer: return "determiner";
    case Pos::kAdposition: return "adposition";
    case Pos::kComplementizer: return "complementizer";
    case Pos::kFiller: return "filler";
  }
  return "?";
}

Pos pos_from_string(const std::string& s) {
  if (s == "noun") return Pos::kNoun;
  if (s == "verb") return Pos::kVerb;
  if (s == "adjective") return Pos::kAdjective;
  if (s == "determiner") return Pos::kDeterminer;
  if (s == "adposition" || s == "preposition" || s == "postposition") return Pos::kAdposition;
  if (s == "complementizer") return Pos::kComplementizer;
  if (s == "filler") return Pos::kFiller;
  throw DataError("unknown part of speech: " + s);
}

bool is_known_language(const std::string& language) {
  return std::find(kLanguages.begin(), kLanguages.end(), language) != kLanguages.end();
}

namespace {

bool single_token(const std::string& s) {
  return !s.empty() && s.find(' ') == std::string::npos && s.find('\t') == std::string::npos;
}

void validate_entry(const LexiconEntry& e) {
  if (!is_known_language(e.language)) throw DataError("lexicon: unknown language: " + e.language);
  if (e.lemma.empty()) throw DataError("lexicon: empty lemma");
  if (!single_token(e.sg_form) || !single_token(e.pl_form))
    throw DataError("lexicon: forms must be single tokens: " + e.lemma);
  if ((e.pos == Pos::kNoun || e.pos == Pos::kVerb) && e.sg_form == e.pl_form)
    throw DataError("lexicon: sg and pl forms must differ for " + e.lemma);
  for (const auto& [key, value] : e.tags) {
    if (key.empty()) throw DataError("lexicon: empty tag key on " + e.lemma);
    if (!value.empty() && !single_token(value))
      throw DataError("lexicon: tag value must be a single token on " + e.lemma);
  }
}

}  // namespace

Lexicon Lexicon::parse_tsv(const std::string& text) {
  Lexicon lex;
  std::size_t line_no = 0;
  for (const std::string& raw : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols = split_on(raw, '\t');
    if (cols.size() != 6)
      throw DataError("lexicon line " + std::to_string(line_no) + ": expected 6 tab-separated columns");
    LexiconEntry e;
    e.language = trim(cols[0]);
    e.pos = pos_from_string(trim(cols[1]));
    e.lemma = trim(cols[2]);
    e.sg_form = trim(cols[3]);
    e.pl_form = trim(cols[4]);
    const std::string tags = trim(cols[5]);
    if (tags != "-" && !tags.empty()) {
      for (const std::string& item : split_on(tags, ',')) {
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos)
          e.tags[trim(item)] = "";
        else
          e.tags[trim(item.substr(0, eq))] = trim(item.substr(eq + 1));
      }
    }
    try {
      validate_entry(e);
    } catch (const DataError& err) {
      throw DataError("lexicon line " + std::to_string(line_no) + ": " + err.what());
    }
    lex.add(std::move(e));
  }
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  try {
    return parse_tsv(read_text_file(path));
  } catch (const DataError& err) {
    throw DataError(path.string() + ": " + err.what());
  }
}

void Lexicon::add(LexiconEntry entry) {
  validate_entry(entry);
  entries_.push_back(std::move(entry));
}

void Lexicon::merge(const Lexicon& other) {
  for (const LexiconEntry& e : other.entries_) entries_.push_back(e);
}

std::vector<const LexiconEntry*> Lexicon::select(const std::string& language, Pos pos,
                                                 const std::vector<std::string>& required_tags,
                                                 const std::vector<std::string>& banned_tags) const {
  std::vector<const LexiconEntry*> out;
  for (const LexiconEntry& e : entries_) {
    if (e.language != language || e.pos != pos) continue;
    bool ok = true;
    for (const std::string& t : required_tags) ok = ok && e.has_tag(t);
    for (const std::string& t : banned_tags) ok = ok && !e.has_tag(t);
    if (ok) out.push_back(&e);
  }
  return out;
}

std::vector<std::string> Lexicon::surface_forms() const {
  std::vector<std::string> out;
  for (const LexiconEntry& e : entries_) {
    out.push_back(e.sg_form);
    out.push_back(e.pl_form);
    for (const auto& [key, value] : e.tags) {
      if (value.empty()) continue;
      if (key.rfind("det_", 0) == 0 || key.rfind("obl_", 0) == 0) out.push_back(value);
    }
  }
  return out;
}

std::vector<std::string> Lexicon::languages() const {
  std::vector<std::string> out;
  for (const LexiconEntry& e : entries_)
    if (std::find(out.begin(), out.end(), e.language) == out.end()) out.push_back(e.language);
  return out;
}

LexiconSplit split_lexicon(const Lexicon& lexicon, double probe_fraction, std::uint64_t seed) {
  require(probe_fraction > 0.0 && probe_fraction < 1.0, "split: probe_fraction must be in (0,1)");
  LexiconSplit split;

  for (const std::string& language : kLanguages) {
    for (Pos pos : {Pos::kNoun, Pos::kVerb}) {
      std::vector<const LexiconEntry*> pool;
      for (const LexiconEntry& e : lexicon.entries())
        if (e.language == language && e.pos == pos && !e.has_tag("cop")) pool.push_back(&e);
      if (pool.empty()) continue;

      // Group by short-counterpart lemma so linked words travel together.
      std::vector<std::string> group_keys;
      std::map<std::string, std::vector<const LexiconEntry*>> groups;
      for (const LexiconEntry* e : pool) {
        const std::string key = e->has_tag("short") ? e->tag("short") : e->lemma;
        if (groups.find(key) == groups.end()) group_keys.push_back(key);
        groups[key].push_back(e);
      }

      // Groups can be much larger than one word, so honor the fraction by
      // word count: take shuffled groups until the probe side is nearest the
      // target, leaving at least one group on each side.
      const std::size_t n_groups = group_keys.size();
      Rng rng(derive_seed(seed, "lexicon-split-" + language + "-" + to_string(pos)));
      std::vector<std::size_t> order = rng.sample_indices(n_groups, n_groups);
      const double target = probe_fraction * static_cast<double>(pool.size());
      std::set<std::size_t> probe_set;
      std::size_t taken = 0;
      for (std::size_t g : order) {
        if (n_groups < 2 || probe_set.size() + 1 == n_groups) break;
        const std::size_t next = taken + groups[group_keys[g]].size();
        if (static_cast<double>(taken) >= target) break;
        if (static_cast<double>(next) - target > target - static_cast<double>(taken) &&
            !probe_set.empty())
          break;
        probe_set.insert(g);
        taken = next;
      }
      for (std::size_t g = 0; g < n_groups; ++g) {
        Lexicon& side = probe_set.count(g) ? split.probe : split.train;
        for (const LexiconEntry* e : groups[group_keys[g]]) side.add(*e);
      }
    }
  }

  // Function words (and the closed-class copula) are shared by both sides;
  // the 70/30 split covers content nouns and verbs only.
  for (const LexiconEntry& e : lexicon.entries()) {
    if ((e.pos == Pos::kNoun || e.pos == Pos::kVerb) && !e.has_tag("cop")) continue;
    split.train.add(e);
    split.probe.add(e);
  }
  return split;
}

bool split_is_disjoint(const LexiconSplit& split) {
  std::set<std::string> train_forms;
  for (const LexiconEntry& e : split.train.entries()) {
    if ((e.pos != Pos::kNoun && e.pos != Pos::kVerb) || e.has_tag("cop")) continue;
    train_forms.insert(e.language + ":" + e.sg_form);
    train_forms.insert(e.language + ":" + e.pl_form);
  }
  for (const LexiconEntry& e : split.probe.entries()) {
    if ((e.pos != Pos::kNoun && e.pos != Pos::kVerb) || e.has_tag("cop")) continue;
    if (train_forms.count(e.language + ":" + e.sg_form) ||
        train_forms.count(e.language + ":" + e.pl_form))
      return false;
  }
  return true;
}

}  // namespace agscan
