#pragma once

#include <string>
#include <vector>

#include "agscan/lexicon.hpp"

namespace agscan {

enum class Structure {
  kSimple,
  kAcrossPp,
  kAcrossRc,
  kBigramSwap,
  kSemanticShort,
  kSemanticLong,
};

std::string to_string(Structure s);
Structure structure_from_string(const std::string& s);
bool is_agreement_structure(Structure s);

enum class RangeClass { kShort, kLong, kBaseline };

// One position in a sentence template. Noun slots may expand to a
// determiner token (looked up in the drawn noun's det_<det_key>_{sg,pl}
// tags) followed by the noun form; oblique_forms selects the obl_{sg,pl}
// tag forms instead of the nominative ones (Finnish genitive attractors).
struct TemplateSlot {
  enum class Kind { kLiteral, kSubject, kAttractor, kMainVerb, kEmbeddedVerb, kAdposition };

  Kind kind = Kind::kLiteral;
  std::string literal;
  std::string entry_tag;  // eligibility tag for drawn entries
  std::string det_key;    // "" = no determiner
  bool oblique_forms = false;

  static TemplateSlot Lit(std::string token) { return {Kind::kLiteral, std::move(token), "", "", false}; }
  static TemplateSlot Subject(std::string det_key) {
    return {Kind::kSubject, "", "subj", std::move(det_key), false};
  }
  static TemplateSlot Attractor(std::string tag, std::string det_key, bool oblique = false) {
    return {Kind::kAttractor, "", std::move(tag), std::move(det_key), oblique};
  }
  static TemplateSlot MainVerb() { return {Kind::kMainVerb, "", "main", "", false}; }
  static TemplateSlot EmbeddedVerb() { return {Kind::kEmbeddedVerb, "", "emb", "", false}; }
  static TemplateSlot Adposition() { return {Kind::kAdposition, "", "", "", false}; }
};

struct StructureTemplate {
  std::string language;
  Structure structure = Structure::kSimple;
  RangeClass range_class = RangeClass::kShort;
  std::vector<TemplateSlot> slots;

  bool has_attractor() const;
};

inline constexpr const char* kMaskLiteral = "[MASK]";

// The simple / across_pp / across_rc templates for one language.
std::vector<StructureTemplate> agreement_templates(const std::string& language);
StructureTemplate agreement_template(const std::string& language, Structure s);

// Every literal token any of the language's templates can emit.
std::vector<std::string> template_literals(const std::string& language);

}  // namespace agscan
