#include <set>
#include <string>

#include <doctest.h>

#include "agscan/lexicon.hpp"
#include "helpers.hpp"

using namespace agscan;

namespace {

const char* kMiniTsv =
    "# comment line\n"
    "\n"
    "en\tnoun\tmanager\tmanager\tmanagers\tsubj,det_nom_sg=The,det_nom_pl=The,short=cat\n"
    "en\tnoun\tcat\tcat\tcats\tsubj,wordset=short\n"
    "en\tverb\tobserve\tobserves\tobserve\tmain,emb\n"
    "en\tverb\tbe\tis\tare\tcop\n"
    "en\tadposition\tbehind\tbehind\tbehind\t-\n";

}  // namespace

TEST_CASE("number flips and round-trips through strings") {
  CHECK(flip(Number::kSg) == Number::kPl);
  CHECK(flip(Number::kPl) == Number::kSg);
  CHECK(number_from_string(to_string(Number::kSg)) == Number::kSg);
  CHECK_THROWS_AS(number_from_string("dual"), DataError);
  CHECK(pos_from_string(to_string(Pos::kAdposition)) == Pos::kAdposition);
  CHECK_THROWS_AS(pos_from_string("particle"), DataError);
}

TEST_CASE("tsv parsing reads tags, skips comments, accepts bare and valued tags") {
  Lexicon lex = Lexicon::parse_tsv(kMiniTsv);
  REQUIRE(lex.entries().size() == 5);
  const LexiconEntry& manager = lex.entries()[0];
  CHECK(manager.language == "en");
  CHECK(manager.pos == Pos::kNoun);
  CHECK(manager.form(Number::kSg) == "manager");
  CHECK(manager.form(Number::kPl) == "managers");
  CHECK(manager.has_tag("subj"));
  CHECK(manager.tag("det_nom_sg") == "The");
  CHECK(manager.tag("short") == "cat");
  CHECK(manager.tag("absent", "dflt") == "dflt");
  CHECK_FALSE(lex.entries()[4].has_tag("-"));  // "-" means no tags at all
  CHECK(lex.entries()[4].tags.empty());
}

TEST_CASE("tsv parsing rejects malformed rows") {
  CHECK_THROWS_AS(Lexicon::parse_tsv("en\tnoun\tonly-four\tcols\n"), DataError);
  CHECK_THROWS_AS(Lexicon::parse_tsv("en\tgerund\tx\ta\tb\t-\n"), DataError);
  CHECK_THROWS_AS(Lexicon::parse_tsv("xx\tnoun\tx\ta\tb\t-\n"), DataError);
}

TEST_CASE("select filters by language, pos, and tags in file order") {
  Lexicon lex = Lexicon::parse_tsv(kMiniTsv);
  auto nouns = lex.select("en", Pos::kNoun);
  REQUIRE(nouns.size() == 2);
  CHECK(nouns[0]->lemma == "manager");

  auto subj_nonshort = lex.select("en", Pos::kNoun, {"subj"}, {"wordset"});
  REQUIRE(subj_nonshort.size() == 1);
  CHECK(subj_nonshort[0]->lemma == "manager");

  CHECK(lex.select("fr", Pos::kNoun).empty());
  CHECK(lex.select("en", Pos::kVerb, {"cop"}).size() == 1);
}

TEST_CASE("surface forms include determiner and oblique tag values") {
  Lexicon lex = Lexicon::parse_tsv(
      "de\tnoun\tApfel\tApfel\tÄpfel\tattr_pp,det_obl_sg=dem,det_obl_pl=den,obl_sg=Apfel,obl_pl=Äpfeln\n");
  auto forms = lex.surface_forms();
  std::set<std::string> set(forms.begin(), forms.end());
  CHECK(set.count("Apfel"));
  CHECK(set.count("Äpfel"));
  CHECK(set.count("Äpfeln"));
  CHECK(set.count("dem"));
  CHECK(set.count("den"));
}

TEST_CASE("the lexicon split holds out content words but shares function words") {
  const Lexicon& lex = testutil::en_lexicon();
  LexiconSplit split = split_lexicon(lex, 0.3, 1234);
  CHECK(split_is_disjoint(split));

  auto count_content = [](const Lexicon& l) {
    std::size_t n = 0;
    for (const auto& e : l.entries())
      if ((e.pos == Pos::kNoun || e.pos == Pos::kVerb) && !e.has_tag("cop")) ++n;
    return n;
  };
  std::size_t train_n = count_content(split.train);
  std::size_t probe_n = count_content(split.probe);
  std::size_t total = count_content(lex);
  CHECK(train_n + probe_n == total);
  CHECK(probe_n >= total / 5);
  CHECK(probe_n <= total / 2);

  // The copula and other closed-class words stay available on both sides.
  CHECK(split.train.select("en", Pos::kVerb, {"cop"}).size() == 1);
  CHECK(split.probe.select("en", Pos::kVerb, {"cop"}).size() == 1);
  CHECK(!split.train.select("en", Pos::kAdposition).empty());
  CHECK(!split.probe.select("en", Pos::kAdposition).empty());
  CHECK(!split.probe.select("en", Pos::kFiller).empty());

  SUBCASE("deterministic in the seed") {
    LexiconSplit again = split_lexicon(lex, 0.3, 1234);
    REQUIRE(again.probe.entries().size() == split.probe.entries().size());
    for (std::size_t i = 0; i < again.probe.entries().size(); ++i)
      CHECK(again.probe.entries()[i].lemma == split.probe.entries()[i].lemma);
  }

  SUBCASE("short-word counterparts travel with their long words") {
    for (const auto& e : split.probe.entries()) {
      if ((e.pos != Pos::kNoun && e.pos != Pos::kVerb) || !e.has_tag("short")) continue;
      if (e.has_tag("wordset")) continue;
      const std::string target = e.tag("short");
      bool in_probe = false, in_train = false;
      for (const auto& p : split.probe.entries()) in_probe |= p.lemma == target && p.pos == e.pos;
      for (const auto& t : split.train.entries()) in_train |= t.lemma == target && t.pos == e.pos;
      CAPTURE(e.lemma);
      CHECK(in_probe);
      CHECK(!in_train);
    }
  }
}

TEST_CASE("disjointness detection catches shared surface forms") {
  Lexicon a = Lexicon::parse_tsv("en\tnoun\tcar\tcar\tcars\tsubj\n");
  Lexicon b = Lexicon::parse_tsv("en\tnoun\tauto\tcar\tautos\tsubj\n");
  LexiconSplit bad{a, b};
  CHECK_FALSE(split_is_disjoint(bad));
  Lexicon c = Lexicon::parse_tsv("en\tnoun\tbike\tbike\tbikes\tsubj\n");
  LexiconSplit good{a, c};
  CHECK(split_is_disjoint(good));
}

TEST_CASE("all bundled lexicons parse and carry complete template tags") {
  const Lexicon& lex = testutil::all_lexicons();
  for (const std::string& lang : kLanguages) {
    CAPTURE(lang);
    CHECK(!lex.select(lang, Pos::kNoun, {"subj"}, {"wordset"}).empty());
    CHECK(!lex.select(lang, Pos::kNoun, {"attr_pp"}, {"wordset"}).empty());
    CHECK(!lex.select(lang, Pos::kNoun, {"attr_rc"}, {"wordset"}).empty());
    CHECK(!lex.select(lang, Pos::kVerb, {"main"}, {"wordset"}).empty());
    CHECK(!lex.select(lang, Pos::kVerb, {"emb"}, {"wordset"}).empty());
    CHECK(lex.select(lang, Pos::kVerb, {"cop"}).size() == 1);
    CHECK(!lex.select(lang, Pos::kFiller).empty());

    // Every content word must have a short-word counterpart of the same pos,
    // so the short variant is total.
    for (const auto& e : lex.entries()) {
      if (e.language != lang) continue;
      if ((e.pos != Pos::kNoun && e.pos != Pos::kVerb) || e.has_tag("cop")) continue;
      if (e.has_tag("wordset")) continue;  // short words are the counterparts
      CAPTURE(e.lemma);
      REQUIRE(e.has_tag("short"));
      bool found = false;
      for (const auto& s : lex.entries())
        found |= s.language == lang && s.pos == e.pos && s.lemma == e.tag("short") &&
                 s.has_tag("wordset");
      CHECK(found);
    }
  }
}
