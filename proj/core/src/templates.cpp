#include "agscan/templates.hpp"

#include <algorithm>

#include "agscan/errors.hpp"

namespace agscan {

std::string to_string(Structure s) {
  switch (s) {
    case Structure::kSimple: return "simple";
    case Structure::kAcrossPp: return "across_pp";
    case Structure::kAcrossRc: return "across_rc";
    case Structure::kBigramSwap: return "bigram_swap";
    case Structure::kSemanticShort: return "semantic_short";
    case Structure::kSemanticLong: return "semantic_long";
  }
  return "?";
}

Structure structure_from_string(const std::string& s) {
  if (s == "simple") return Structure::kSimple;
  if (s == "across_pp") return Structure::kAcrossPp;
  if (s == "across_rc") return Structure::kAcrossRc;
  if (s == "bigram_swap") return Structure::kBigramSwap;
  if (s == "semantic_short") return Structure::kSemanticShort;
  if (s == "semantic_long") return Structure::kSemanticLong;
  throw DataError("unknown structure: " + s);
}

bool is_agreement_structure(Structure s) {
  return s == Structure::kSimple || s == Structure::kAcrossPp || s == Structure::kAcrossRc;
}

bool StructureTemplate::has_attractor() const {
  return std::any_of(slots.begin(), slots.end(), [](const TemplateSlot& s) {
    return s.kind == TemplateSlot::Kind::kAttractor;
  });
}

namespace {

using S = TemplateSlot;

// Verb continuation (object pronoun) and end punctuation keep the mask slot
// away from the sequence edge so MLM probing has right context, matching
// the "[MASK] it" prompt shape.
StructureTemplate make(const std::string& language, Structure structure, RangeClass range,
                       std::vector<TemplateSlot> slots) {
  StructureTemplate t;
  t.language = language;
  t.structure = structure;
  t.range_class = range;
  t.slots = std::move(slots);
  return t;
}

std::vector<StructureTemplate> build(const std::string& language) {
  if (language == "en") {
    return {
        make("en", Structure::kSimple, RangeClass::kShort,
             {S::Subject("nom"), S::MainVerb(), S::Lit("it"), S::Lit(".")}),
        make("en", Structure::kAcrossPp, RangeClass::kLong,
             {S::Subject("nom"), S::Adposition(), S::Attractor("attr_pp", "obl"), S::MainVerb(),
              S::Lit("it"), S::Lit(".")}),
        make("en", Structure::kAcrossRc, RangeClass::kLong,
             {S::Subject("nom"), S::Lit("that"), S::Attractor("attr_rc", "emb"),
              S::EmbeddedVerb(), S::MainVerb(), S::Lit("it"), S::Lit(".")}),
    };
  }
  if (language == "fr") {
    return {
        make("fr", Structure::kSimple, RangeClass::kShort,
             {S::Subject("nom"), S::MainVerb(), S::Lit("cela"), S::Lit(".")}),
        make("fr", Structure::kAcrossPp, RangeClass::kLong,
             {S::Subject("nom"), S::Adposition(), S::Attractor("attr_pp", "obl"), S::MainVerb(),
              S::Lit("cela"), S::Lit(".")}),
        make("fr", Structure::kAcrossRc, RangeClass::kLong,
             {S::Subject("nom"), S::Lit("que"), S::Attractor("attr_rc", "emb"),
              S::EmbeddedVerb(), S::MainVerb(), S::Lit("cela"), S::Lit(".")}),
    };
  }
  if (language == "de") {
    // Relative clauses are comma-bounded and verb-final; subjects are
    // restricted to nouns whose nominative determiner is number-invariant.
    return {
        make("de", Structure::kSimple, RangeClass::kShort,
             {S::Subject("nom"), S::MainVerb(), S::Lit("es"), S::Lit(".")}),
        make("de", Structure::kAcrossPp, RangeClass::kLong,
             {S::Subject("nom"), S::Adposition(), S::Attractor("attr_pp", "obl", true),
              S::MainVerb(), S::Lit("es"), S::Lit(".")}),
        make("de", Structure::kAcrossRc, RangeClass::kLong,
             {S::Subject("nom"), S::Lit(","), S::Lit("die"), S::Attractor("attr_rc", "emb"),
              S::EmbeddedVerb(), S::Lit(","), S::MainVerb(), S::Lit("es"), S::Lit(".")}),
    };
  }
  if (language == "nl") {
    return {
        make("nl", Structure::kSimple, RangeClass::kShort,
             {S::Subject("nom"), S::MainVerb(), S::Lit("het"), S::Lit(".")}),
        make("nl", Structure::kAcrossPp, RangeClass::kLong,
             {S::Subject("nom"), S::Adposition(), S::Attractor("attr_pp", "obl"), S::MainVerb(),
              S::Lit("het"), S::Lit(".")}),
        make("nl", Structure::kAcrossRc, RangeClass::kLong,
             {S::Subject("nom"), S::Lit("die"), S::Attractor("attr_rc", "emb"),
              S::EmbeddedVerb(), S::MainVerb(), S::Lit("het"), S::Lit(".")}),
    };
  }
  if (language == "fi") {
    // No determiners; across_pp is postpositional with a genitive attractor
    // (noun before adposition).
    return {
        make("fi", Structure::kSimple, RangeClass::kShort,
             {S::Subject(""), S::MainVerb(), S::Lit("sen"), S::Lit(".")}),
        make("fi", Structure::kAcrossPp, RangeClass::kLong,
             {S::Subject(""), S::Attractor("attr_pp", "", true), S::Adposition(), S::MainVerb(),
              S::Lit("sen"), S::Lit(".")}),
        make("fi", Structure::kAcrossRc, RangeClass::kLong,
             {S::Subject(""), S::Lit(","), S::Lit("jota"), S::Attractor("attr_rc", ""),
              S::EmbeddedVerb(), S::Lit(","), S::MainVerb(), S::Lit("sen"), S::Lit(".")}),
    };
  }
  throw DataError("no templates for language: " + language);
}

}  // namespace

std::vector<StructureTemplate> agreement_templates(const std::string& language) {
  return build(language);
}

StructureTemplate agreement_template(const std::string& language, Structure s) {
  require(is_agreement_structure(s), "not an agreement structure: " + to_string(s));
  for (StructureTemplate& t : build(language))
    if (t.structure == s) return std::move(t);
  throw DataError("no template for " + language + "/" + to_string(s));
}

std::vector<std::string> template_literals(const std::string& language) {
  std::vector<std::string> out;
  for (const StructureTemplate& t : build(language))
    for (const TemplateSlot& slot : t.slots)
      if (slot.kind == TemplateSlot::Kind::kLiteral &&
          std::find(out.begin(), out.end(), slot.literal) == out.end())
        out.push_back(slot.literal);
  return out;
}

}  // namespace agscan
