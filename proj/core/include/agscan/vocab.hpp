#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "agscan/errors.hpp"
#include "agscan/model.hpp"

namespace agscan {

// Closed word-level vocabulary. Index 0 is always the mask token.
class Vocabulary {
 public:
  static constexpr const char* kMaskToken = "[MASK]";

  Vocabulary() = default;

  // `words` must not contain duplicates or the mask token; order is preserved.
  static Vocabulary from_words(const std::vector<std::string>& words) {
    Vocabulary v;
    v.tokens_.reserve(words.size() + 1);
    v.push(kMaskToken);
    for (const std::string& w : words) v.push(w);
    return v;
  }

  // Rebuilds from a serialized token list (mask token already at index 0).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    require(!tokens.empty() && tokens.front() == kMaskToken,
            "vocabulary: token list must start with the mask token");
    Vocabulary v;
    v.tokens_.reserve(tokens.size());
    for (const std::string& t : tokens) v.push(t);
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  TokenId mask_id() const { return 0; }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) throw DataError("vocabulary: unknown token: " + token);
    return it->second;
  }

  const std::string& token(TokenId id) const {
    require(id < tokens_.size(), "vocabulary: token id out of range");
    return tokens_[id];
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<TokenId> encode(const std::vector<std::string>& words) const {
    std::vector<TokenId> ids;
    ids.reserve(words.size());
    for (const std::string& w : words) ids.push_back(id(w));
    return ids;
  }

 private:
  void push(const std::string& token) {
    if (!index_.emplace(token, static_cast<TokenId>(tokens_.size())).second)
      throw DataError("vocabulary: duplicate token: " + token);
    tokens_.push_back(token);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace agscan
